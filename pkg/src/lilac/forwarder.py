"""Transaction forwarder: ships a transaction's commit phase to another node.

The forward carries the job reference (logic id plus inputs), the read-set
version names used for validation at the target, the write-set and the
result of the origin's execution.  The target never forwards again.
"""
from dataclasses import dataclass
from typing import Any, Dict

from .gcs import Kind
from .replication import RetryExhausted
from .sim import Pending
from .stm import TxContext
from .workload.base import WorkloadJob


@dataclass
class ForwardMessage:
    tx_id: int
    origin: int
    target: int
    job: WorkloadJob
    read_meta: Dict[Any, int]
    write_set: Dict[Any, int]
    classes: frozenset
    result: Any = None
    gossip: Any = None


@dataclass
class ForwardReply:
    tx_id: int
    origin: int
    target: int
    aborted: bool = True


class Forwarder:
    def __init__(self, node):
        self.node = node
        self.env = node.env
        self.re_execute_always = node.env.settings.re_execute_always
        self.sent = 0
        self.handled = 0
        self.aborted = 0

    def forward(self, tx: TxContext, job: WorkloadJob, result, classes: frozenset, target: int) -> Pending:
        node = self.node
        if target == node.idx:
            raise ValueError("cannot forward to self")
        if job.read_only:
            raise ValueError("read-only transactions are never forwarded")
        waiter = node.rm.expect_commit(tx.tx_id)
        fm = ForwardMessage(tx.tx_id, node.idx, target, job, dict(tx.read_writers),
                            dict(tx.write_set), classes, result, node._gossip())
        self.sent += 1
        self.env.recorder.forward(self.env.sim.now, tx.tx_id, node.idx, target)
        self.env.gcs.send_p2p(node.idx, target, Kind.FORWARD, fm)
        return waiter

    def handle_forwarded(self, fm: ForwardMessage):
        self.handled += 1
        self.env.sim.spawn(self._serve(fm), self.env.task_exit)

    def _serve(self, fm: ForwardMessage):
        node = self.node
        tx = TxContext(fm.tx_id, fm.origin, node.store.clock, False, 0,
                       read_set={}, read_writers=dict(fm.read_meta), write_set=dict(fm.write_set))
        ok, _, _, _ = yield from node.rm.commit_phase(
            tx, fm.job, fm.result, fm.classes, fm.origin,
            remote_meta=fm.read_meta, force_reexec=self.re_execute_always)
        if not ok:
            self.aborted += 1
            self.env.recorder.forward_abort(self.env.sim.now, fm.tx_id)
            self.env.gcs.send_p2p(node.idx, fm.origin, Kind.FORWARD_REPLY,
                                  ForwardReply(fm.tx_id, fm.origin, node.idx))

    def on_reply(self, reply: ForwardReply):
        if reply.aborted:
            self.node.rm.fail_waiter(reply.tx_id, RetryExhausted(reply.tx_id))
