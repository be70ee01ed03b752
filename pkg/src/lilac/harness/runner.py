"""Wires a simulated cluster together, drives the workload and checks the
run's safety and liveness properties."""
import random
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from ..gcs import GroupComm
from ..lease import ClassMap
from ..node import Env, Node, NodeSettings
from ..replication import RetryExhausted
from ..sim import Pending, Simulator
from ..workload import Bank, BankConfig, Tpcc, TpccConfig, overload_scenario
from ..workload.base import WorkloadJob
from .config import ExperimentConfig
from .metrics import MetricsRow, Recorder
from .serializability import Verdict, check_serializability, version_order


class LivenessViolation(AssertionError):
    pass


class SafetyViolation(AssertionError):
    pass


Generator = Callable[[int, random.Random], Tuple[int, WorkloadJob]]


@dataclass
class WorkloadSetup:
    generate: Generator
    class_map: ClassMap
    items: Dict
    balance_keys: Optional[List] = None     # keys whose sum is conserved
    initial_total: Optional[int] = None
    overload: Optional[object] = None
    model: Optional[object] = None


def build_workload(cfg: ExperimentConfig) -> WorkloadSetup:
    if cfg.workload in ("bank", "overload"):
        bc = BankConfig(nodes=cfg.nodes, partitions_per_node=cfg.partitions_per_node,
                        accounts_per_partition=cfg.accounts_per_partition,
                        classes_per_partition=cfg.classes_per_partition, locality=cfg.locality,
                        read_write_ratio=cfg.read_write_ratio,
                        transfers_per_tx=cfg.transfers_per_tx, ops_per_tick=cfg.ops_per_tick,
                        hot_prob=cfg.hot_prob)
        schedule = None
        if cfg.workload == "overload":
            bank, schedule = overload_scenario(bc, cfg.inject_at_s, cfg.external_load, cfg.hot_partition)
        else:
            bank = Bank(bc)
        items = bank.initial_items()
        return WorkloadSetup(lambda node, rng: (node, bank.next_tx(node, rng)), bank.class_map, items,
                             sorted(items), bank.initial_total(), schedule, bank)
    tc = TpccConfig(nodes=cfg.nodes, warehouses=cfg.nodes * cfg.warehouses_per_node,
                    classes_per_warehouse=cfg.classes_per_warehouse,
                    payment_fraction=cfg.payment_fraction, mistake_prob=cfg.mistake_prob,
                    ops_per_tick=cfg.ops_per_tick)
    tpcc = Tpcc(tc)
    return WorkloadSetup(tpcc.next_tx, tpcc.class_map, tpcc.initial_items(), model=tpcc)


@dataclass
class SafetyReport:
    serializability: Verdict
    conservation: bool
    convergence: bool
    cq_agreement: bool
    max_forwards: int
    unsafe_commits: int
    accounting: bool

    @property
    def ok(self) -> bool:
        return (self.serializability.serializable and self.conservation and self.convergence
                and self.cq_agreement and self.max_forwards <= 1 and self.unsafe_commits == 0
                and self.accounting)

    def failures(self) -> List[str]:
        out = []
        if not self.serializability.serializable:
            out.append(f"serialization cycle {self.serializability.cycle}")
        for name in ("conservation", "convergence", "cq_agreement", "accounting"):
            if not getattr(self, name):
                out.append(name)
        if self.max_forwards > 1:
            out.append(f"a transaction was forwarded {self.max_forwards} times")
        if self.unsafe_commits:
            out.append(f"{self.unsafe_commits} commits broadcast without enabled leases")
        return out


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: List[MetricsRow]
    recorder: Recorder
    cluster: "Cluster"
    safety: Optional[SafetyReport] = None
    lease_handles: int = 0
    unresolved_handles: int = 0

    def totals(self, warmup: int = 1, until: Optional[int] = None) -> Dict[str, float]:
        last = self.config.duration if until is None else until
        return self.recorder.totals(min(warmup, last - 1), last)


class Cluster:
    def __init__(self, cfg: ExperimentConfig, recorder: Optional[Recorder] = None):
        cfg.validate()
        self.cfg = cfg
        self.sim = Simulator()
        self.setup = build_workload(cfg)
        self.recorder = recorder or Recorder(cfg.nodes, cfg.ticks_per_second)
        self.gcs = GroupComm(self.sim, cfg.nodes, cfg.latency, cfg.reorder_prob, cfg.seed, keep_log=False)
        settings = NodeSettings(
            coarse=cfg.coarse, policy=cfg.policy, costs=cfg.costs,
            max_cpu=cfg.max_cpu if cfg.cpu_control else float("inf"),
            half_life_s=cfg.half_life_s, max_retries=cfg.max_retries,
            validate_cost=cfg.validate_cost, re_execute_always=cfg.re_execute_always,
            request_missing_only=cfg.request_missing_only, cores=cfg.task_budget,
            cpu_window=cfg.cpu_window, trace_leases=cfg.trace_leases)
        self.env = Env(self.sim, self.gcs, self.setup.class_map, settings, self.recorder)
        self.nodes = [Node(i, self.env, self.setup.items) for i in range(cfg.nodes)]
        if cfg.check:
            for n in self.nodes:
                n.lm.enable_digests()
        self._count_handles()
        self.tasks: List[Pending] = []
        self.task_errors: List[BaseException] = []
        self.overloaded: Optional[int] = None
        self.inject_tick: Optional[int] = None

    def _count_handles(self):
        """Wrap every lease manager's get_lease to keep every handle it issues."""
        self.handles: List[Pending] = []
        for n in self.nodes:
            original = n.lm.get_lease

            def counted(classes, _orig=original):
                h = _orig(classes)
                self.handles.append(h)
                return h
            n.lm.get_lease = counted

    # -- drivers -----------------------------------------------------------

    def _client(self, node: Node, rng: random.Random):
        cfg = self.cfg
        end = cfg.end_tick
        gen = self.setup.generate
        rm_by_idx = self.nodes
        while self.sim.now < end:
            target, job = gen(node.idx, rng)
            self.recorder.generated += 1
            try:
                yield from rm_by_idx[target].rm.run_transaction(job)
            except RetryExhausted:
                pass

    def _on_task_exit(self, value, error):
        if error is not None:
            self.task_errors.append(error)

    def _sample_cpu(self):
        values = []
        for n in self.nodes:
            u = n.cpu.close_window()
            n.dtd.set_local_cpu(u)
            values.append(u)
        self.recorder.cpu_sample(self.sim.now, values)
        if self.sim.now < self.cfg.end_tick:
            self.sim.schedule(self.cfg.cpu_window, self._sample_cpu)

    def _gossip(self):
        now = self.sim.now
        for n in self.nodes:
            if now - n.last_gossip >= self.cfg.gossip_interval:
                n.send_gossip()
        if now < self.cfg.end_tick:
            self.sim.schedule(self.cfg.gossip_interval, self._gossip)

    def _second(self):
        for n in self.nodes:
            n.dtd.tick_second()
        if self.sim.now < self.cfg.end_tick:
            self.sim.schedule(self.cfg.ticks_per_second, self._second)

    def _inject(self, node: int, load: float):
        self.nodes[node].cpu.external_load = load

    def start(self):
        cfg = self.cfg
        master = random.Random(cfg.seed)
        for n in self.nodes:
            for _ in range(cfg.threads):
                rng = random.Random(master.getrandbits(64))
                self.tasks.append(self.sim.spawn(self._client(n, rng), self._on_task_exit))
        self.sim.schedule(cfg.cpu_window, self._sample_cpu)
        self.sim.schedule(cfg.gossip_interval, self._gossip)
        self.sim.schedule(cfg.ticks_per_second, self._second)
        sched = self.setup.overload
        if sched is not None:
            self.overloaded = sched.node
            self.inject_tick = int(sched.inject_at_s * cfg.ticks_per_second)
            self.sim.at(self.inject_tick, self._inject, sched.node, sched.external_load)

    def run(self, max_events: Optional[int] = None) -> RunResult:
        self.start()
        self.sim.run(max_events=max_events)
        errors = self.task_errors + self.env.errors
        if errors:
            raise errors[0]
        unresolved = [h for h in self.handles if not h.done]
        unfinished = [t for t in self.tasks if not t.done]
        if self.sim.empty() and (unresolved or unfinished):
            raise LivenessViolation(
                f"{len(unresolved)} lease handles and {len(unfinished)} client tasks never completed")
        res = RunResult(self.cfg, self.recorder.rows(self.cfg.variant, self.cfg.duration), self.recorder,
                        self, lease_handles=len(self.handles), unresolved_handles=len(unresolved))
        if self.cfg.check:
            res.safety = self.check_safety()
        return res

    # -- checks --------------------------------------------------------------

    def check_safety(self) -> SafetyReport:
        rec = self.recorder
        ref = self.nodes[0]
        order = version_order(ref.apply_log, rec.histories)
        verdict = check_serializability(rec.histories, order)

        states = [n.store.state() for n in self.nodes]
        convergence = all(s == states[0] for s in states[1:])

        conservation = True
        if self.setup.initial_total is not None:
            keys = self.setup.balance_keys
            conservation = all(n.store.total(keys) == self.setup.initial_total for n in self.nodes)

        cq = cq_agreement([n.lm.digests or [] for n in self.nodes])
        max_fwd = max(rec.forward_counts.values(), default=0)
        in_flight = sum(1 for t in self.tasks if not t.done)
        accounting = rec.committed == rec.generated - rec.aborted - in_flight
        return SafetyReport(verdict, conservation, convergence, cq, max_fwd, len(rec.unsafe_commits), accounting)


def cq_agreement(digest_lists: List[List[Tuple[int, int]]]) -> bool:
    """Replicas that processed the same sequence of queue-changing events
    must hold identical queues after each of them."""
    for i in range(len(digest_lists)):
        for j in range(i + 1, len(digest_lists)):
            for (ma, da), (mb, db) in zip(digest_lists[i], digest_lists[j]):
                if ma != mb:
                    break
                if da != db:
                    return False
    return True


def run(cfg: ExperimentConfig, max_events: Optional[int] = None) -> RunResult:
    return Cluster(cfg).run(max_events)
