"""Replication manager: drives the commit phase of local transactions and
applies remote write-sets on UR-delivery."""
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

from .gcs import Kind
from .sim import Pending
from .stm import StaleRead, TxContext
from .workload.base import WorkloadJob, execute


class RetryExhausted(Exception):
    """The transaction failed validation ``max_retries`` times and aborted."""

    def __init__(self, tx_id: int):
        super().__init__(f"transaction {tx_id} aborted after exhausting its retries")
        self.tx_id = tx_id


class CommitSafetyViolation(AssertionError):
    pass


@dataclass
class CommitMessage:
    tx_id: int
    origin: int
    committer: int
    write_set: Dict[Any, int]
    result: Any = None
    gossip: Any = None
    n_classes: int = 0
    reused: bool = False


@dataclass
class CommitOutcome:
    tx_id: int
    result: Any
    committer: int
    reused: bool = False
    forwarded: bool = False
    read_only: bool = False


class ReplicationManager:
    def __init__(self, node):
        self.node = node
        self.env = node.env
        self._waiters: Dict[int, Pending] = {}
        self.validation_failures = 0
        self.reexecutions = 0

    # -- execution ---------------------------------------------------------

    def execute(self, job: WorkloadJob, tx_id: int, origin: Optional[int] = None):
        """Run ``job`` once on this replica: CPU time first, then the logic
        against the store as it stands when the burst ends."""
        node = self.node
        yield node.cpu.run(job.cost)
        while True:
            tx = node.store.begin(job.read_only, tx_id, origin)
            try:
                result = execute(job, node.store, tx)
            except StaleRead:
                continue
            return tx, result

    def classes_of(self, tx: TxContext) -> frozenset:
        return self.env.class_map.classes(tx.keys())

    def run_transaction(self, job: WorkloadJob):
        """Task body: execute then commit ``job``.  Returns a CommitOutcome or
        raises RetryExhausted."""
        node = self.node
        tx_id = self.env.new_tx_id()
        tx, result = yield from self.execute(job, tx_id)
        if job.read_only:
            attempts = 0
            while not node.store.validate(tx.read_set):
                attempts += 1
                if attempts > self.env.settings.max_retries:
                    self.env.recorder.abort(self.env.sim.now, tx_id, node.idx)
                    raise RetryExhausted(tx_id)
                tx, result = yield from self.execute(job, tx_id)
            self.env.recorder.commit(self.env.sim.now, tx_id, node.idx, node.idx, 0, False, False, True)
            return CommitOutcome(tx_id, result, node.idx, read_only=True)
        return (yield from self.commit_local(tx, job, result))

    def commit_local(self, tx: TxContext, job: WorkloadJob, result):
        node = self.node
        env = self.env
        classes = self.classes_of(tx)
        node.dtd.record_access(classes)
        target = node.dtd.decide(classes, owner=job.owner)
        if target != node.idx:
            waiter = node.fwd.forward(tx, job, result, classes, target)
            try:
                cm = yield waiter
            except RetryExhausted:
                env.recorder.abort(env.sim.now, tx.tx_id, node.idx)
                raise
            env.recorder.commit(env.sim.now, tx.tx_id, node.idx, cm.committer, cm.n_classes,
                                cm.reused, True, False)
            return CommitOutcome(tx.tx_id, cm.result, cm.committer, cm.reused, True)

        waiter = self.expect_commit(tx.tx_id)
        ok, reused, result, tx = yield from self.commit_phase(tx, job, result, classes, node.idx)
        if not ok:
            self._waiters.pop(tx.tx_id, None)
            env.recorder.abort(env.sim.now, tx.tx_id, node.idx)
            raise RetryExhausted(tx.tx_id)
        cm = yield waiter
        env.recorder.commit(env.sim.now, tx.tx_id, node.idx, node.idx, cm.n_classes, reused, False, False)
        return CommitOutcome(tx.tx_id, cm.result, node.idx, reused, False)

    def commit_phase(self, tx: TxContext, job: WorkloadJob, result, classes: frozenset, origin: int,
                     remote_meta: Optional[Mapping] = None, force_reexec: bool = False):
        """Acquire leases, validate (re-executing under the held leases on
        failure) and broadcast the commit.

        Returns ``(committed, reused, result, tx)``.  Runs at the origin for
        local commits and at the target for forwarded ones.
        """
        node = self.node
        env = self.env
        lm = node.lm
        held = lm.get_lease(classes)
        if not held.reused:
            env.recorder.lease_request(env.sim.now, node.idx)
        reused = held.reused
        yield held
        attempts = 0
        reexec = force_reexec
        while True:
            if reexec:
                self.reexecutions += 1
                tx, result = yield from self.execute(job, tx.tx_id, origin)
                needed = self.classes_of(tx)
                if not needed <= held.classes:
                    # never re-forward: this node requests the leases itself
                    lm.finished_xact(held.lors)
                    held = lm.get_lease(needed)
                    if not held.reused:
                        env.recorder.lease_request(env.sim.now, node.idx)
                        reused = False
                    yield held
            yield node.cpu.run(env.settings.validate_cost)
            if remote_meta is not None and not reexec:
                valid = node.store.validate_writers(remote_meta)
            else:
                valid = node.store.validate(tx.read_set)
            if valid:
                break
            self.validation_failures += 1
            attempts += 1
            if attempts > env.settings.max_retries:
                lm.finished_xact(held.lors)
                return False, reused, None, tx
            reexec = True

        enabled = lm.is_enabled(held.lors)
        write_classes = env.class_map.classes(tx.write_set)
        env.recorder.commit_broadcast(env.sim.now, node.idx, tx.tx_id, enabled, valid)
        if not enabled or not write_classes <= held.classes:
            raise CommitSafetyViolation(f"tx {tx.tx_id} committing without enabled leases")
        node.apply(tx.write_set, tx.tx_id)
        reads = remote_meta if (remote_meta is not None and not reexec) else tx.read_writers
        env.recorder.history(tx.tx_id, dict(reads), tuple(tx.write_set))
        cm = CommitMessage(tx.tx_id, origin, node.idx, dict(tx.write_set), result,
                           node._gossip(), len(held.classes), reused)
        env.gcs.ur_broadcast(node.idx, Kind.COMMIT, cm)
        lm.finished_xact(held.lors)
        return True, reused, result, tx

    # -- commit notification ----------------------------------------------

    def expect_commit(self, tx_id: int) -> Pending:
        p = Pending()
        self._waiters[tx_id] = p
        return p

    def fail_waiter(self, tx_id: int, error: BaseException):
        p = self._waiters.pop(tx_id, None)
        if p is not None:
            p.fail(error)

    def on_commit_delivered(self, cm: CommitMessage):
        node = self.node
        if cm.committer != node.idx:
            node.apply(cm.write_set, cm.tx_id)
        if cm.origin == node.idx:
            p = self._waiters.pop(cm.tx_id, None)
            if p is not None:
                p.resolve(cm)

    def pending_commits(self) -> int:
        return len(self._waiters)
