"""Transaction dispatcher: picks the node that runs a transaction's commit phase.

The choice is an argmin over nodes of a per-node cost, restricted to nodes
whose CPU utilization is below ``max_cpu``.  Ties go to the lowest cost, then
the origin, then the lowest node id.  If no node is eligible the origin keeps
the transaction and the event is counted in ``fallbacks``.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple


class Policy(str, Enum):
    NONE = "none"
    ST = "st"      # short-term: communication steps of the commit path
    LT = "lt"      # long-term: other nodes' access frequencies
    OPT = "opt"    # workload-declared partition owner (Bank only)


@dataclass(frozen=True)
class CostConstants:
    p2p: int = 1
    urb: int = 2
    ab: int = 3


def sc_cost(i: int, origin: int, owns_all: bool, c: CostConstants = CostConstants()) -> int:
    if i == origin:
        return c.urb if owns_all else c.ab + 2 * c.urb
    return c.p2p + c.urb if owns_all else c.p2p + c.ab + 2 * c.urb


def argmin_eligible(costs: Sequence[float], cpu: Sequence[float], max_cpu: float,
                    origin: int) -> Tuple[int, bool]:
    """Return (chosen node, fallback_used)."""
    best = None
    best_key = None
    for i, cost in enumerate(costs):
        if not cpu[i] < max_cpu:
            continue
        key = (cost, i != origin, i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    if best is None:
        return origin, True
    return best, False


@dataclass
class StatsGossip:
    sender: int
    seq: int
    freq: Dict[int, float]
    cpu: float


class AccessStats:
    """Decayed per-class access counts, one row per node."""

    def __init__(self, n: int, half_life_s: float = 10.0):
        self.n = n
        self.rows: List[Dict[int, float]] = [dict() for _ in range(n)]
        self.decay = 0.5 ** (1.0 / half_life_s) if half_life_s > 0 else 0.0

    def bump(self, node: int, classes: Iterable[int]):
        row = self.rows[node]
        for cc in classes:
            row[cc] = row.get(cc, 0.0) + 1.0

    def tick_second(self, node: int):
        row = self.rows[node]
        d = self.decay
        for cc in row:
            row[cc] *= d

    def get(self, node: int, cc: int) -> float:
        return self.rows[node].get(cc, 0.0)


class Dispatcher:
    """Decision state held by one node."""

    def __init__(self, node: int, n: int, lease_manager=None, policy: Policy = Policy.NONE,
                 costs: CostConstants = CostConstants(), max_cpu: float = 0.85,
                 half_life_s: float = 10.0):
        self.node = node
        self.n = n
        self.lm = lease_manager
        self.policy = Policy(policy)
        self.costs = costs
        self.max_cpu = max_cpu
        self.stats = AccessStats(n, half_life_s)
        self.cpu: List[float] = [0.0] * n
        self._gossip_seq = 0
        self._seen_seq = [-1] * n
        self.fallbacks = 0
        self.decisions = 0
        self.cpu_learned_at: List[Optional[int]] = [None] * n   # last gossip merge tick per sender
        self.clock: Callable[[], int] = lambda: 0

    # -- lease view --------------------------------------------------------

    def owns(self, i: int, cc: int) -> bool:
        if i == self.node:
            return self.lm.owns(cc)
        return self.lm.tail_owner(cc) == i

    def owns_all(self, i: int, classes: Iterable[int]) -> bool:
        return all(self.owns(i, cc) for cc in classes)

    # -- cost functions ----------------------------------------------------

    def sc_cost(self, i: int, classes: Iterable[int], origin: int) -> int:
        return sc_cost(i, origin, self.owns_all(i, classes), self.costs)

    def lc_cost(self, i: int, classes: Iterable[int]) -> float:
        rows = self.stats.rows
        total = 0.0
        for cc in classes:
            for j in range(self.n):
                if j != i:
                    total += rows[j].get(cc, 0.0)
        return total

    def cost_vector(self, classes, origin: int, policy: Policy, owner: Optional[int] = None) -> List[float]:
        classes = tuple(classes)
        if policy is Policy.ST:
            return [self.sc_cost(i, classes, origin) for i in range(self.n)]
        if policy is Policy.LT:
            # summed directly rather than total-minus-own so equal inputs give bit-equal costs
            return [self.lc_cost(i, classes) for i in range(self.n)]
        if policy is Policy.OPT:
            if owner is None:
                raise ValueError("opt policy needs the partition owner")
            return [0 if i == owner else 1 for i in range(self.n)]
        return [0 if i == origin else 1 for i in range(self.n)]

    def decide(self, classes: Iterable[int], policy: Optional[Policy] = None,
               origin: Optional[int] = None, owner: Optional[int] = None) -> int:
        classes = tuple(classes)
        if not classes:
            raise ValueError("decide needs a non-empty class set")
        policy = self.policy if policy is None else Policy(policy)
        origin = self.node if origin is None else origin
        self.decisions += 1
        if policy is Policy.NONE:
            return origin
        costs = self.cost_vector(classes, origin, policy, owner)
        chosen, fallback = argmin_eligible(costs, self.cpu, self.max_cpu, origin)
        if fallback:
            self.fallbacks += 1
        return chosen

    # -- statistics --------------------------------------------------------

    def record_access(self, classes: Iterable[int]):
        self.stats.bump(self.node, classes)

    def tick_second(self):
        self.stats.tick_second(self.node)

    def set_local_cpu(self, value: float):
        self.cpu[self.node] = value

    def gossip_out(self) -> StatsGossip:
        self._gossip_seq += 1
        return StatsGossip(self.node, self._gossip_seq, dict(self.stats.rows[self.node]),
                           self.cpu[self.node])

    def gossip_in(self, g: Optional[StatsGossip]):
        if g is None or g.sender == self.node:
            return
        if g.seq <= self._seen_seq[g.sender]:
            return
        self._seen_seq[g.sender] = g.seq
        self.stats.rows[g.sender] = dict(g.freq)
        self.cpu[g.sender] = g.cpu
        self.cpu_learned_at[g.sender] = self.clock()


def no_cpu_cap() -> float:
    return math.inf
