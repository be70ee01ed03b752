"""Simulated group communication: optimistic atomic broadcast (OAB),
causal uniform reliable broadcast (URB) and FIFO point-to-point links.

One stable view, no loss, no crashes.  Latencies are whole ticks per
communication step.
"""
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, TextIO

from .sim import Simulator


class Kind(str, Enum):
    LEASE_REQUEST = "LeaseRequest"
    LEASE_FREED = "LeaseFreed"
    COMMIT = "Commit"
    FORWARD = "Forward"
    FORWARD_REPLY = "ForwardReply"
    STATS_GOSSIP = "StatsGossip"


OAB_KINDS = frozenset({Kind.LEASE_REQUEST})
URB_KINDS = frozenset({Kind.LEASE_FREED, Kind.COMMIT, Kind.STATS_GOSSIP})
P2P_KINDS = frozenset({Kind.FORWARD, Kind.FORWARD_REPLY, Kind.STATS_GOSSIP})

# delivery event kinds as they appear in the event log
OPT = "opt"
TO = "to"
UR = "ur"
P2P = "p2p"


@dataclass(frozen=True)
class LatencyConfig:
    p2p: int = 1
    urb: int = 2
    oab_opt: int = 1
    oab_total: int = 3

    def __post_init__(self):
        for name in ("p2p", "urb", "oab_opt", "oab_total"):
            if getattr(self, name) < 1:
                raise ValueError(f"latency {name} must be >= 1")
        if self.oab_opt >= self.oab_total:
            raise ValueError("oab_opt must be strictly smaller than oab_total")

    def scaled(self, factor: int) -> "LatencyConfig":
        return LatencyConfig(self.p2p * factor, self.urb * factor,
                             self.oab_opt * factor, self.oab_total * factor)


@dataclass(eq=False)
class Message:
    id: int
    sender: int
    kind: Kind
    payload: Any
    send_time: int
    seq: Optional[int] = None          # OAB total-order stamp
    deps: Optional[tuple] = None       # URB causal dependencies

    def __repr__(self):
        return f"Message({self.id}, {self.kind.value} from {self.sender} @{self.send_time})"


@dataclass(frozen=True)
class Delivery:
    tick: int
    node: int
    event: str
    msg: Message

    def log_line(self) -> str:
        return f"{self.tick},{self.node},{self.event},{self.msg.id},{self.msg.kind.value}"


Handler = Callable[[Delivery], None]


class GroupComm:
    """Message services for a fixed population of ``n`` nodes."""

    def __init__(self, sim: Simulator, n: int, latency: LatencyConfig = LatencyConfig(),
                 reorder_prob: float = 0.0, seed: int = 0, keep_log: bool = True):
        if n < 1:
            raise ValueError("group needs at least one node")
        self.sim = sim
        self.n = n
        self.latency = latency
        self.reorder_prob = reorder_prob
        self._rng = random.Random(seed)
        self.keep_log = keep_log
        self.log: List[Delivery] = []
        self._handlers: Dict[int, Handler] = {}
        self._next_seq = 0
        self._urb_sent = [0] * n
        self._urb_delivered = [[0] * n for _ in range(n)]
        self._urb_held: List[List[Message]] = [[] for _ in range(n)]
        self._collect: Optional[list] = None
        self.sent_count = {k: 0 for k in Kind}

    def set_handler(self, node: int, handler: Handler):
        self._check(node)
        self._handlers[node] = handler

    def _check(self, node: int):
        if not 0 <= node < self.n:
            raise ValueError(f"node {node} not in group of {self.n}")

    def _new(self, sender: int, kind: Kind, payload, allowed) -> Message:
        self._check(sender)
        kind = Kind(kind)
        if kind not in allowed:
            raise ValueError(f"{kind.value} cannot travel on this service")
        self.sent_count[kind] += 1
        return Message(self.sim.next_id(), sender, kind, payload, self.sim.now)

    # -- services ----------------------------------------------------------

    def oa_broadcast(self, sender: int, kind: Kind, payload=None) -> Message:
        m = self._new(sender, kind, payload, OAB_KINDS)
        m.seq = self._next_seq
        self._next_seq += 1
        lat = self.latency
        slack = lat.oab_total - lat.oab_opt - 1
        for node in range(self.n):
            opt_at = m.send_time + lat.oab_opt
            if slack > 0 and self.reorder_prob and self._rng.random() < self.reorder_prob:
                opt_at += self._rng.randint(1, slack)
            self.sim.at(opt_at, self._deliver, node, OPT, m, key=m.id, sub=node)
            # sub offsets keep opt/to entries distinct even if times coincide
            self.sim.at(m.send_time + lat.oab_total, self._deliver, node, TO, m,
                        key=m.id, sub=self.n + node)
        return m

    def ur_broadcast(self, sender: int, kind: Kind, payload=None) -> Message:
        m = self._new(sender, kind, payload, URB_KINDS)
        deps = list(self._urb_delivered[sender])
        deps[sender] = self._urb_sent[sender]
        self._urb_sent[sender] += 1
        m.deps = tuple(deps)
        at = m.send_time + self.latency.urb
        for node in range(self.n):
            self.sim.at(at, self._urb_arrive, node, m, key=m.id, sub=node)
        return m

    def send_p2p(self, sender: int, dest: int, kind: Kind, payload=None) -> Message:
        self._check(dest)
        m = self._new(sender, kind, payload, P2P_KINDS)
        self.sim.at(m.send_time + self.latency.p2p, self._deliver, dest, P2P, m, key=m.id, sub=dest)
        return m

    # -- delivery ----------------------------------------------------------

    def _urb_ready(self, node: int, m: Message) -> bool:
        got = self._urb_delivered[node]
        s = m.sender
        for k, need in enumerate(m.deps):
            if k == s:
                if got[k] != need:
                    return False
            elif got[k] < need:
                return False
        return True

    def _urb_arrive(self, node: int, m: Message):
        if not self._urb_ready(node, m):
            self._urb_held[node].append(m)
            return
        self._urb_commit(node, m)
        held = self._urb_held[node]
        progress = True
        while progress and held:
            progress = False
            for i, h in enumerate(held):
                if self._urb_ready(node, h):
                    del held[i]
                    self._urb_commit(node, h)
                    progress = True
                    break

    def _urb_commit(self, node: int, m: Message):
        self._urb_delivered[node][m.sender] += 1
        self._deliver(node, UR, m)

    def _deliver(self, node: int, event: str, m: Message):
        d = Delivery(self.sim.now, node, event, m)
        if self.keep_log:
            self.log.append(d)
        if self._collect is not None:
            self._collect.append(d)
        h = self._handlers.get(node)
        if h is not None:
            h(d)

    def step(self) -> List[Delivery]:
        """Advance to the next event tick; return the deliveries made there."""
        self._collect = []
        try:
            self.sim.step()
            return self._collect
        finally:
            self._collect = None

    def held_count(self) -> int:
        return sum(len(h) for h in self._urb_held)

    def dump_log(self, fp: TextIO):
        for d in self.log:
            fp.write(d.log_line() + "\n")
