"""Lease manager: per-conflict-class FIFO queues of lease ownership records.

Every node keeps a full copy of the conflict queues.  Queue contents change
only on TO-delivery of lease requests and UR-delivery of lease releases, so
replicas that processed the same delivery prefix hold identical queues.

Two granularities are supported:

* fine-grained (default): one record per conflict class, each with its own
  ``active_xacts`` counter and ``blocked`` flag;
* coarse (ALC baseline): one record per request, shared by all of the
  request's classes, reusable only when a transaction's class set is a subset
  of the record's.
"""
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from .gcs import Kind
from .sim import Pending


class UnderflowViolation(AssertionError):
    pass


class UnblockViolation(AssertionError):
    pass


class MissingLor(AssertionError):
    pass


def stable_hash(item: Hashable) -> int:
    return zlib.crc32(str(item).encode())


class ClassMap:
    """Deterministic item -> conflict class mapping, ``hash(item) mod n``."""

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise ValueError("need at least one conflict class")
        self.num_classes = num_classes

    def of(self, item) -> int:
        return stable_hash(item) % self.num_classes

    def classes(self, items: Iterable) -> frozenset:
        return frozenset(self.of(i) for i in items)


class PartitionedClassMap(ClassMap):
    """Each partition owns a contiguous range of ``per_partition`` classes.

    ``partition_of`` maps an item to its partition index.
    """

    def __init__(self, num_partitions: int, per_partition: int, partition_of: Callable[[Any], int]):
        super().__init__(num_partitions * per_partition)
        self.num_partitions = num_partitions
        self.per_partition = per_partition
        self.partition_of = partition_of
        self._cache: Dict[Any, int] = {}

    def of(self, item) -> int:
        cc = self._cache.get(item)
        if cc is None:
            p = self.partition_of(item)
            cc = p * self.per_partition + stable_hash(item) % self.per_partition
            self._cache[item] = cc
        return cc

    def partition_range(self, p: int) -> range:
        return range(p * self.per_partition, (p + 1) * self.per_partition)


class LeaseRecord:
    """Shared usage state: one per LOR in fine mode, one per request in coarse."""

    __slots__ = ("active_xacts", "_blocked", "freed", "lors")

    def __init__(self):
        self.active_xacts = 1
        self._blocked = False
        self.freed = False
        self.lors: List["LOR"] = []

    @property
    def blocked(self) -> bool:
        return self._blocked

    @blocked.setter
    def blocked(self, value: bool):
        if self._blocked and not value:
            raise UnblockViolation("a blocked lease record cannot be unblocked")
        self._blocked = bool(value)

    def block(self) -> bool:
        """Set the blocked flag; returns True on the false->true transition."""
        if self._blocked:
            return False
        self._blocked = True
        return True

    def release_one(self):
        if self.active_xacts <= 0:
            raise UnderflowViolation("activeXacts would go negative")
        self.active_xacts -= 1


class LOR:
    __slots__ = ("proc", "req", "cc", "rec")

    def __init__(self, proc: int, req: int, cc: int, rec: LeaseRecord):
        self.proc = proc
        self.req = req
        self.cc = cc
        self.rec = rec
        rec.lors.append(self)

    @property
    def id(self) -> Tuple[int, int, int]:
        return (self.proc, self.req, self.cc)

    @property
    def active_xacts(self) -> int:
        return self.rec.active_xacts

    @property
    def blocked(self) -> bool:
        return self.rec.blocked

    def __repr__(self):
        return f"LOR(p{self.proc} r{self.req} cc{self.cc} a={self.rec.active_xacts}{' B' if self.rec.blocked else ''})"


@dataclass
class LeaseRequest:
    requester: int
    seq: int
    classes: Tuple[int, ...]
    gossip: Any = None


@dataclass
class LeaseFreed:
    sender: int
    lors: Tuple[Tuple[int, int, int], ...]
    gossip: Any = None


class LeaseHandle(Pending):
    """Resolves with the set of LORs once all are at the head of their queues."""

    __slots__ = ("lors", "classes", "reused", "request_seq", "issued_at")

    def __init__(self, lors: List[LOR], classes: frozenset, reused: bool, request_seq: Optional[int], now: int):
        super().__init__()
        self.lors = lors
        self.classes = classes
        self.reused = reused
        self.request_seq = request_seq
        self.issued_at = now


def make_lors(proc: int, seq: int, classes: Sequence[int], coarse: bool) -> List[LOR]:
    if coarse:
        rec = LeaseRecord()
        return [LOR(proc, seq, cc, rec) for cc in classes]
    return [LOR(proc, seq, cc, LeaseRecord()) for cc in classes]


TraceFn = Callable[[int, int, str, int], None]   # (tick, node, event, cc)


class LeaseManager:
    """The lease manager at one node."""

    def __init__(self, node: int, gcs, coarse: bool = False, request_missing_only: bool = False,
                 piggyback: Optional[Callable[[], Any]] = None, trace: Optional[TraceFn] = None):
        self.node = node
        self.gcs = gcs
        self.coarse = coarse
        self.request_missing_only = request_missing_only and not coarse
        self.piggyback = piggyback
        self.trace = trace
        self.cq: Dict[int, deque] = {}
        self._index: Dict[Tuple[int, int, int], LOR] = {}
        self._own_pending: Dict[int, List[LOR]] = {}
        self._own_records: Dict[int, LeaseRecord] = {}   # id(rec) -> rec, enqueued and not freed
        self._waiting: List[LeaseHandle] = []
        self._next_seq = 0
        # counters
        self.requests = 0
        self.reuses = 0
        self.lease_freed_msgs = 0
        self.block_events = 0
        self.digests: Optional[List[Tuple[int, int]]] = None   # (delivery msg id, cq digest)
        self._queue_hashes: Dict[int, int] = {}
        self._digest_acc = 0

    # -- helpers -----------------------------------------------------------

    def _emit(self, event: str, cc: int):
        if self.trace is not None:
            self.trace(self.gcs.sim.now, self.node, event, cc)

    def queue(self, cc: int) -> deque:
        q = self.cq.get(cc)
        if q is None:
            q = self.cq[cc] = deque()
        return q

    def is_enabled(self, lors: Iterable[LOR]) -> bool:
        cq = self.cq
        for lor in lors:
            q = cq.get(lor.cc)
            if not q or q[0] is not lor:
                return False
        return True

    def _own_unblocked(self, cc: int) -> Optional[LOR]:
        q = self.cq.get(cc)
        if not q:
            return None
        me = self.node
        for lor in reversed(q):
            if lor.proc == me and not lor.rec.blocked:
                return lor
        return None

    def owns(self, cc: int) -> bool:
        """Exact local ownership: an unblocked own LOR sits in the queue."""
        return self._own_unblocked(cc) is not None

    def tail_owner(self, cc: int) -> Optional[int]:
        q = self.cq.get(cc)
        return q[-1].proc if q else None

    def snapshot(self) -> Dict[int, Tuple[Tuple[int, int, int], ...]]:
        return {cc: tuple(l.id for l in q) for cc, q in sorted(self.cq.items()) if q}

    def digest(self) -> int:
        """Order-independent sum of per-queue hashes; equal queues give equal digests."""
        total = 0
        for cc, q in self.cq.items():
            if q:
                total += _queue_hash(cc, q)
        return total & _MASK

    def enable_digests(self):
        """Start recording a queue digest after every queue-changing delivery."""
        self.digests = []
        self._queue_hashes = {}
        self._digest_acc = 0
        self._refresh_digest(list(self.cq))

    def _refresh_digest(self, touched: Iterable[int]):
        acc = self._digest_acc
        for cc in set(touched):
            acc -= self._queue_hashes.pop(cc, 0)
            q = self.cq.get(cc)
            if q:
                h = self._queue_hashes[cc] = _queue_hash(cc, q)
                acc += h
        self._digest_acc = acc
        return acc & _MASK

    def waiting(self) -> List[LeaseHandle]:
        return list(self._waiting)

    # -- GetLease ----------------------------------------------------------

    def get_lease(self, classes: Iterable[int]) -> LeaseHandle:
        cc_set = frozenset(classes)
        if not cc_set:
            raise ValueError("get_lease needs a non-empty class set")
        now = self.gcs.sim.now
        reuse = self._find_reusable(cc_set)
        if reuse is not None:
            for rec in _records(reuse):
                rec.active_xacts += 1
            self.reuses += 1
            for lor in reuse:
                self._emit("reuse", lor.cc)
            handle = LeaseHandle(reuse, cc_set, True, None, now)
        else:
            reused_part: List[LOR] = []
            missing = sorted(cc_set)
            if self.request_missing_only:
                missing = []
                for cc in sorted(cc_set):
                    lor = self._own_unblocked(cc)
                    if lor is None:
                        missing.append(cc)
                    else:
                        reused_part.append(lor)
                for lor in reused_part:
                    lor.rec.active_xacts += 1
            seq = self._next_seq
            self._next_seq += 1
            fresh = make_lors(self.node, seq, missing, self.coarse)
            self._own_pending[seq] = fresh
            self.requests += 1
            for cc in missing:
                self._emit("request", cc)
            payload = LeaseRequest(self.node, seq, tuple(missing),
                                   self.piggyback() if self.piggyback else None)
            self.gcs.oa_broadcast(self.node, Kind.LEASE_REQUEST, payload)
            handle = LeaseHandle(reused_part + fresh, cc_set, False, seq, now)
        if self.is_enabled(handle.lors):
            self._enable(handle)
        else:
            self._waiting.append(handle)
        return handle

    def _find_reusable(self, cc_set: frozenset) -> Optional[List[LOR]]:
        if self.coarse:
            for rec in self._own_records.values():
                if rec.blocked or rec.freed:
                    continue
                if cc_set <= {l.cc for l in rec.lors}:
                    return list(rec.lors)
            return None
        found = []
        for cc in sorted(cc_set):
            lor = self._own_unblocked(cc)
            if lor is None:
                return None
            found.append(lor)
        return found

    def _enable(self, handle: LeaseHandle):
        if self.trace is not None:
            for lor in handle.lors:
                self._emit("enable", lor.cc)
        handle.resolve(handle.lors)

    def _recheck(self):
        if not self._waiting:
            return
        still = []
        ready = []
        for h in self._waiting:
            (ready if self.is_enabled(h.lors) else still).append(h)
        self._waiting = still
        for h in ready:
            self._enable(h)

    # -- FinishedXact ------------------------------------------------------

    def finished_xact(self, lors: Iterable[LOR]):
        to_free: List[LeaseRecord] = []
        for rec in _records(lors):
            rec.release_one()
            if rec.blocked and rec.active_xacts == 0 and not rec.freed:
                to_free.append(rec)
        self._free(to_free)

    def _free(self, records: List[LeaseRecord]):
        if not records:
            return
        ids = []
        for rec in records:
            rec.freed = True
            self._own_records.pop(id(rec), None)
            for lor in rec.lors:
                ids.append(lor.id)
                self._emit("free", lor.cc)
        self.lease_freed_msgs += 1
        payload = LeaseFreed(self.node, tuple(ids), self.piggyback() if self.piggyback else None)
        self.gcs.ur_broadcast(self.node, Kind.LEASE_FREED, payload)

    def free_local_leases(self, classes: Iterable[int]):
        me = self.node
        to_free: List[LeaseRecord] = []
        for cc in classes:
            q = self.cq.get(cc)
            if not q:
                continue
            for lor in q:
                if lor.proc != me:
                    continue
                rec = lor.rec
                if rec.block():
                    self.block_events += 1
                    self._emit("block", cc)
                if rec.active_xacts == 0 and not rec.freed and q[0] is lor and rec not in to_free:
                    to_free.append(rec)
        self._free(to_free)

    # -- delivery handlers -------------------------------------------------

    def on_opt_deliver(self, req: LeaseRequest):
        self.free_local_leases(req.classes)

    def on_to_deliver(self, req: LeaseRequest, msg_id: int = 0):
        # safety net for requests whose Opt-delivery overtook our own TO-delivery
        self.free_local_leases(req.classes)
        if req.requester == self.node:
            lors = self._own_pending.pop(req.seq)
            for rec in _records(lors):
                self._own_records[id(rec)] = rec
        else:
            lors = make_lors(req.requester, req.seq, req.classes, self.coarse)
        for lor in lors:
            self.queue(lor.cc).append(lor)
            self._index[lor.id] = lor
        if self.digests is not None:
            self.digests.append((msg_id, self._refresh_digest(l.cc for l in lors)))
        self._recheck()

    def on_ur_deliver_freed(self, freed: LeaseFreed, msg_id: int = 0):
        for lor_id in freed.lors:
            lor = self._index.pop(lor_id, None)
            if lor is None:
                raise MissingLor(lor_id)
            self.cq[lor.cc].remove(lor)
        if self.digests is not None:
            self.digests.append((msg_id, self._refresh_digest(i[2] for i in freed.lors)))
        self._recheck()


_MASK = (1 << 64) - 1


def _queue_hash(cc: int, q) -> int:
    return hash((cc, tuple(l.id for l in q)))


def _records(lors: Iterable[LOR]) -> List[LeaseRecord]:
    seen = []
    for lor in lors:
        rec = lor.rec
        if not any(r is rec for r in seen):
            seen.append(rec)
    return seen
