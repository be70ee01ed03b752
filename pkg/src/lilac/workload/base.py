from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from ..stm import Replica, TxContext

# logic(store, tx, params) -> result; runs against one replica's store
Logic = Callable[[Replica, TxContext, tuple], object]


@dataclass(frozen=True)
class WorkloadJob:
    """A re-executable transaction: logic reference plus its input parameters."""

    ref: str
    params: tuple
    read_only: bool
    partition: Optional[int] = None
    owner: Optional[int] = None      # node the accessed partition is associated with
    cost: int = 1                    # execution CPU ticks


REGISTRY: Dict[str, Logic] = {}


def register(ref: str):
    def deco(fn: Logic) -> Logic:
        if ref in REGISTRY and REGISTRY[ref] is not fn:
            raise ValueError(f"job ref {ref!r} registered twice")
        REGISTRY[ref] = fn
        return fn
    return deco


def execute(job: WorkloadJob, store: Replica, tx: TxContext):
    try:
        logic = REGISTRY[job.ref]
    except KeyError:
        raise LookupError(f"unknown job ref {job.ref!r}") from None
    return logic(store, tx, job.params)


def op_cost(ops: int, ops_per_tick: int) -> int:
    return max(1, -(-ops // ops_per_tick))
