"""One replica: store, lease manager, dispatcher, forwarder, replication
manager and a small CPU model, wired to the group communication layer."""
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .dtd import CostConstants, Dispatcher, Policy
from .forwarder import Forwarder
from .gcs import OPT, P2P, TO, UR, Delivery, GroupComm, Kind
from .lease import ClassMap, LeaseManager
from .replication import ReplicationManager
from .sim import Pending, Simulator
from .stm import Replica


class Cpu:
    """The node's task budget: ``cores`` FIFO servers.

    External load stretches every job by ``1 / (1 - load)``.  Utilization is
    the fraction of the window during which the whole budget was busy, plus
    the external load, capped at 1.
    """

    def __init__(self, sim: Simulator, cores: int = 2, window: int = 100):
        if cores < 1:
            raise ValueError("need at least one core")
        self.sim = sim
        self.cores = cores
        self.window = window
        self.external_load = 0.0
        self.busy = 0
        self._queue: deque = deque()
        self._saturated = 0
        self._last_change = 0
        self._window_start = 0
        self.last_utilization = 0.0
        self.jobs_done = 0

    def _account(self):
        now = self.sim.now
        if self.busy >= self.cores:
            self._saturated += now - self._last_change
        self._last_change = now

    def service_time(self, cost: int) -> int:
        if cost <= 0:
            return 0
        return math.ceil(cost / (1.0 - self.external_load))

    def run(self, cost: int) -> Pending:
        done = Pending()
        if self.busy < self.cores:
            self._start(cost, done)
        else:
            self._queue.append((cost, done))
        return done

    def _start(self, cost: int, done: Pending):
        self._account()
        self.busy += 1
        self.sim.schedule(self.service_time(cost), self._finish, done)

    def _finish(self, done: Pending):
        self._account()
        self.busy -= 1
        self.jobs_done += 1
        if self._queue:
            cost, nxt = self._queue.popleft()
            self._start(cost, nxt)
        done.resolve()

    def close_window(self) -> float:
        self._account()
        saturated = self._saturated - self._window_start
        self._window_start = self._saturated
        measured = saturated / self.window if self.window else 0.0
        self.last_utilization = min(1.0, measured + self.external_load)
        return self.last_utilization

    def queue_length(self) -> int:
        return len(self._queue)


class NullRecorder:
    def lease_request(self, tick, node): pass
    def forward(self, tick, tx_id, origin, target): pass
    def forward_abort(self, tick, tx_id): pass
    def commit(self, tick, tx_id, origin, committer, n_classes, reused, forwarded, read_only): pass
    def abort(self, tick, tx_id, origin): pass
    def history(self, tx_id, reads, writes): pass
    def lease_trace(self, tick, node, event, cc): pass
    def commit_broadcast(self, tick, node, tx_id, enabled, valid): pass


@dataclass
class NodeSettings:
    coarse: bool = False
    policy: Policy = Policy.NONE
    costs: CostConstants = CostConstants()
    max_cpu: float = 0.85
    half_life_s: float = 10.0
    max_retries: int = 3
    validate_cost: int = 1
    re_execute_always: bool = False
    request_missing_only: bool = False
    cores: int = 2
    cpu_window: int = 100
    trace_leases: bool = False


class Env:
    """State shared by all nodes of one simulated cluster."""

    def __init__(self, sim: Simulator, gcs: GroupComm, class_map: ClassMap,
                 settings: NodeSettings, recorder=None):
        self.sim = sim
        self.gcs = gcs
        self.class_map = class_map
        self.settings = settings
        self.recorder = recorder or NullRecorder()
        self._tx_ids = itertools.count(1)
        self.errors: list = []     # failures of background tasks (forward handling)

    def task_exit(self, value, error):
        if error is not None:
            self.errors.append(error)

    def new_tx_id(self) -> int:
        return next(self._tx_ids)


class Node:
    def __init__(self, idx: int, env: Env, items=None):
        self.idx = idx
        self.env = env
        s = env.settings
        self.store = Replica(idx, items)
        self.cpu = Cpu(env.sim, s.cores, s.cpu_window)
        trace = env.recorder.lease_trace if s.trace_leases else None
        self.lm = LeaseManager(idx, env.gcs, coarse=s.coarse,
                               request_missing_only=s.request_missing_only,
                               piggyback=self._gossip, trace=trace)
        self.dtd = Dispatcher(idx, env.gcs.n, self.lm, s.policy, s.costs, s.max_cpu, s.half_life_s)
        self.dtd.clock = lambda: env.sim.now
        self.rm = ReplicationManager(self)
        self.fwd = Forwarder(self)
        self.apply_log: list = []          # tx ids in write-set application order
        self.last_gossip = -1
        env.gcs.set_handler(idx, self.on_delivery)

    def _gossip(self):
        self.last_gossip = self.env.sim.now
        return self.dtd.gossip_out()

    def send_gossip(self):
        self.env.gcs.ur_broadcast(self.idx, Kind.STATS_GOSSIP, self._gossip())

    def apply(self, write_set, tx_id):
        self.store.apply_writeset(write_set, tx_id)
        if write_set:
            self.apply_log.append(tx_id)

    def on_delivery(self, d: Delivery):
        m = d.msg
        kind = m.kind
        payload = m.payload
        if kind is Kind.LEASE_REQUEST:
            if d.event == OPT:
                self.dtd.gossip_in(payload.gossip)
                self.lm.on_opt_deliver(payload)
            elif d.event == TO:
                self.lm.on_to_deliver(payload, m.id)
        elif kind is Kind.COMMIT:
            self.dtd.gossip_in(payload.gossip)
            self.rm.on_commit_delivered(payload)
        elif kind is Kind.LEASE_FREED:
            self.dtd.gossip_in(payload.gossip)
            self.lm.on_ur_deliver_freed(payload, m.id)
        elif kind is Kind.FORWARD:
            self.dtd.gossip_in(payload.gossip)
            self.fwd.handle_forwarded(payload)
        elif kind is Kind.FORWARD_REPLY:
            self.fwd.on_reply(payload)
        elif kind is Kind.STATS_GOSSIP:
            self.dtd.gossip_in(payload)
