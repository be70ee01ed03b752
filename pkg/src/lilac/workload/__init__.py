from .base import REGISTRY, WorkloadJob, execute, register
from .bank import BALANCE, TRANSFER, Bank, BankConfig
from .tpcc import NEW_ORDER, PAYMENT, Tpcc, TpccConfig
from .overload import OverloadSchedule, overload_scenario

__all__ = [
    "REGISTRY", "WorkloadJob", "execute", "register",
    "Bank", "BankConfig", "TRANSFER", "BALANCE",
    "Tpcc", "TpccConfig", "PAYMENT", "NEW_ORDER",
    "OverloadSchedule", "overload_scenario",
]
