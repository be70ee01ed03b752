from dataclasses import dataclass

from .bank import Bank, BankConfig


@dataclass(frozen=True)
class OverloadSchedule:
    hot_partition: int
    node: int              # owner of the hot partition; receives the external load
    inject_at_s: float
    external_load: float


def overload_scenario(cfg: BankConfig, inject_at_s: float = 40.0, external_load: float = 0.95,
                      hot_partition: int = 0) -> tuple:
    """Bank workload with one hot partition plus the load-injection schedule.

    Returns ``(bank, schedule)``; ``cfg`` is updated in place to mark the hot
    partition.
    """
    if not 0.0 <= external_load < 1.0:
        raise ValueError("external_load must lie in [0, 1)")
    cfg.hot_partition = hot_partition
    bank = Bank(cfg)
    return bank, OverloadSchedule(hot_partition, bank.owner(hot_partition), inject_at_s, external_load)
