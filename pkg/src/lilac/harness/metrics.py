"""Per-second metrics, commit log and traces collected during a run."""
import csv
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, TextIO, Tuple


@dataclass
class MetricsRow:
    second: int
    variant: str
    throughput: int
    lease_reuse_rate: float
    lease_req_rate: int
    forwards: int
    aborts: int
    cpu: Tuple[float, ...]

    def as_list(self) -> list:
        return ([self.second, self.variant, self.throughput, f"{self.lease_reuse_rate:.4f}",
                 self.lease_req_rate, self.forwards, self.aborts]
                + [f"{c:.4f}" for c in self.cpu])


def csv_header(nodes: int) -> List[str]:
    return (["second", "variant", "throughput", "lease_reuse_rate", "lease_req_rate", "forwards", "aborts"]
            + [f"cpu_{i}" for i in range(nodes)])


class _Bucket:
    __slots__ = ("commits", "rw", "reused", "requests", "forwards", "aborts")

    def __init__(self):
        self.commits = self.rw = self.reused = self.requests = self.forwards = self.aborts = 0


class Recorder:
    """Collects everything the harness reports.  Hook signatures match
    :class:`lilac.node.NullRecorder`."""

    def __init__(self, nodes: int, ticks_per_second: int = 1000, keep_logs: bool = True):
        self.nodes = nodes
        self.tps = ticks_per_second
        self.keep_logs = keep_logs
        self.buckets: Dict[int, _Bucket] = {}
        self.cpu_sum: Dict[int, List[float]] = {}
        self.cpu_n: Dict[int, int] = {}
        self.commit_log: List[tuple] = []
        self.forward_trace: List[tuple] = []
        self.lease_log: List[tuple] = []
        self.histories: Dict[int, Tuple[Dict, Tuple]] = {}
        self.forward_counts: Counter = Counter()
        self.unsafe_commits: List[int] = []
        self.generated = 0
        self.committed = 0
        self.committed_rw = 0
        self.aborted = 0
        self.decisions: List[tuple] = []   # (tick, origin, target) for every forward

    def _bucket(self, tick: int) -> _Bucket:
        s = tick // self.tps
        b = self.buckets.get(s)
        if b is None:
            b = self.buckets[s] = _Bucket()
        return b

    # -- hooks -------------------------------------------------------------

    def lease_request(self, tick, node):
        self._bucket(tick).requests += 1

    def forward(self, tick, tx_id, origin, target):
        self._bucket(tick).forwards += 1
        self.forward_counts[tx_id] += 1
        self.decisions.append((tick, origin, target))
        if self.keep_logs:
            self.forward_trace.append((tick, tx_id, "forward", origin, target))

    def forward_abort(self, tick, tx_id):
        if self.keep_logs:
            self.forward_trace.append((tick, tx_id, "forward_abort"))

    def commit(self, tick, tx_id, origin, committer, n_classes, reused, forwarded, read_only):
        b = self._bucket(tick)
        b.commits += 1
        self.committed += 1
        if not read_only:
            b.rw += 1
            self.committed_rw += 1
            if reused:
                b.reused += 1
            if self.keep_logs:
                self.commit_log.append((tick, tx_id, origin, committer, n_classes, int(reused), int(forwarded)))

    def abort(self, tick, tx_id, origin):
        self._bucket(tick).aborts += 1
        self.aborted += 1

    def history(self, tx_id, reads, writes):
        self.histories[tx_id] = (reads, writes)

    def lease_trace(self, tick, node, event, cc):
        self.lease_log.append((tick, node, event, cc))

    def commit_broadcast(self, tick, node, tx_id, enabled, valid):
        if not (enabled and valid):
            self.unsafe_commits.append(tx_id)

    def cpu_sample(self, tick, values):
        s = (tick - 1) // self.tps
        acc = self.cpu_sum.get(s)
        if acc is None:
            acc = self.cpu_sum[s] = [0.0] * self.nodes
            self.cpu_n[s] = 0
        for i, v in enumerate(values):
            acc[i] += v
        self.cpu_n[s] += 1

    # -- reporting ---------------------------------------------------------

    def rows(self, variant: str, seconds: int) -> List[MetricsRow]:
        out = []
        for s in range(seconds):
            b = self.buckets.get(s) or _Bucket()
            n = self.cpu_n.get(s, 0)
            cpu = tuple(x / n for x in self.cpu_sum[s]) if n else (0.0,) * self.nodes
            rate = b.reused / b.rw if b.rw else 0.0
            out.append(MetricsRow(s, variant, b.commits, rate, b.requests, b.forwards, b.aborts, cpu))
        return out

    def totals(self, first: int, last: int) -> Dict[str, float]:
        """Aggregates over seconds ``first .. last - 1``."""
        agg = _Bucket()
        for s in range(first, last):
            b = self.buckets.get(s)
            if b is None:
                continue
            for name in _Bucket.__slots__:
                setattr(agg, name, getattr(agg, name) + getattr(b, name))
        span = max(1, last - first)
        return {
            "throughput": agg.commits / span,
            "rw_throughput": agg.rw / span,
            "lease_reuse_rate": agg.reused / agg.rw if agg.rw else 0.0,
            "lease_req_rate": agg.requests / span,
            "forwards": agg.forwards / span,
            "aborts": agg.aborts / span,
        }


def write_rows(fp: TextIO, rows: List[MetricsRow], nodes: int):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(csv_header(nodes))
    for r in rows:
        w.writerow(r.as_list())


def write_table(fp: TextIO, header: List[str], rows):
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
