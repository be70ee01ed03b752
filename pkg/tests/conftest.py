import pytest

from lilac.gcs import GroupComm, LatencyConfig
from lilac.lease import ClassMap
from lilac.node import Env, Node, NodeSettings
from lilac.sim import Simulator
from lilac.workload.base import REGISTRY, WorkloadJob, register


class ExplicitMap(ClassMap):
    """Class map with a hand-written item -> class table."""

    def __init__(self, table):
        super().__init__(max(table.values()) + 1)
        self.table = dict(table)

    def of(self, item) -> int:
        return self.table[item]


INCR = "test.incr"
POINTER = "test.pointer"
SET = "test.set"

if INCR not in REGISTRY:
    @register(INCR)
    def _incr(store, tx, keys):
        out = []
        for k in keys:
            v = store.read(tx, k) + 1
            store.write(tx, k, v)
            out.append(v)
        return tuple(out)

    @register(POINTER)
    def _pointer(store, tx, _params):
        slot = f"slot{store.read(tx, 'ptr')}"
        v = store.read(tx, slot) + 1
        store.write(tx, slot, v)
        return slot, v

    @register(SET)
    def _set(store, tx, pairs):
        for k, v in pairs:
            store.read(tx, k)
            store.write(tx, k, v)
        return None


def incr_job(*keys, cost=1):
    return WorkloadJob(INCR, tuple(keys), False, None, None, cost)


class Mini:
    """A few nodes on default unit latencies, for protocol-level tests."""

    def __init__(self, n=2, items=None, table=None, latency=LatencyConfig(), recorder=None, **settings):
        self.sim = Simulator()
        self.gcs = GroupComm(self.sim, n, latency)
        table = table or {k: i for i, k in enumerate(sorted(items or {}))}
        self.class_map = ExplicitMap(table)
        self.env = Env(self.sim, self.gcs, self.class_map, NodeSettings(**settings), recorder)
        self.nodes = [Node(i, self.env, items) for i in range(n)]

    def run_tx(self, node, job):
        """Spawn a transaction task on ``node``; returns its done handle."""
        return self.sim.spawn(self.nodes[node].rm.run_transaction(job))

    def settle(self):
        self.sim.run()
        if self.env.errors:
            raise self.env.errors[0]

    def sent(self):
        return dict(self.gcs.sent_count)


@pytest.fixture
def mini():
    return Mini


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
