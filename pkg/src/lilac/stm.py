"""Per-replica versioned store with TL2-style transactions.

Each replica keeps a single version clock.  A committed write-set bumps the
clock once and stamps every written cell with the new value.  Cells also
remember the id of the transaction that wrote them; that id is the
replica-independent name of a version and is what forwarded transactions
carry as validation metadata.
"""
import csv
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, TextIO, Tuple

ItemId = Hashable

INITIAL_WRITER = 0


class StaleRead(Exception):
    """A read observed a cell newer than the transaction's snapshot."""


class ReadOnlyViolation(Exception):
    pass


class UnknownKey(KeyError):
    pass


@dataclass(slots=True)
class Cell:
    value: int
    version: int
    writer: int = INITIAL_WRITER


@dataclass
class TxContext:
    tx_id: int
    origin: int
    start_version: int
    read_only: bool = False
    retries_left: int = 0
    read_set: Dict[ItemId, int] = field(default_factory=dict)
    read_writers: Dict[ItemId, int] = field(default_factory=dict)
    write_set: Dict[ItemId, int] = field(default_factory=dict)

    def keys(self) -> set:
        return set(self.read_set) | set(self.write_set)


class Replica:
    def __init__(self, node: int = 0, items: Optional[Mapping[ItemId, int]] = None):
        self.node = node
        self.clock = 0
        self.cells: Dict[ItemId, Cell] = {}
        if items:
            self.load(items)

    def load(self, items: Mapping[ItemId, int]):
        for k, v in items.items():
            self.cells[k] = Cell(v, 0)

    def begin(self, read_only: bool = False, tx_id: int = 0, origin: Optional[int] = None,
              retries: int = 0) -> TxContext:
        return TxContext(tx_id, self.node if origin is None else origin, self.clock,
                         read_only, retries)

    def read(self, tx: TxContext, key: ItemId) -> int:
        if key in tx.write_set:
            return tx.write_set[key]
        try:
            cell = self.cells[key]
        except KeyError:
            raise UnknownKey(key) from None
        if cell.version > tx.start_version:
            raise StaleRead(key)
        if key not in tx.read_set:
            tx.read_set[key] = cell.version
            tx.read_writers[key] = cell.writer
        return cell.value

    def get(self, key: ItemId, default=None):
        cell = self.cells.get(key)
        return default if cell is None else cell.value

    def write(self, tx: TxContext, key: ItemId, value: int):
        if tx.read_only:
            raise ReadOnlyViolation(f"tx {tx.tx_id} is read-only")
        tx.write_set[key] = value

    def validate(self, read_set: Mapping[ItemId, int]) -> bool:
        cells = self.cells
        for k, ver in read_set.items():
            cell = cells.get(k)
            if cell is None:
                raise UnknownKey(k)
            if cell.version != ver:
                return False
        return True

    def validate_writers(self, read_writers: Mapping[ItemId, int]) -> bool:
        """Validation against replica-independent version names."""
        cells = self.cells
        for k, writer in read_writers.items():
            cell = cells.get(k)
            if cell is None:
                raise UnknownKey(k)
            if cell.writer != writer:
                return False
        return True

    def apply_writeset(self, write_set: Mapping[ItemId, int], tx_id: int):
        if not write_set:
            return
        self.clock += 1
        clock = self.clock
        cells = self.cells
        for k, v in write_set.items():
            cell = cells.get(k)
            if cell is None:
                cells[k] = Cell(v, clock, tx_id)
            else:
                cell.value = v
                cell.version = clock
                cell.writer = tx_id

    # -- inspection --------------------------------------------------------

    def snapshot(self) -> List[Tuple[ItemId, int, int]]:
        return sorted(((k, c.value, c.version) for k, c in self.cells.items()), key=lambda r: str(r[0]))

    def state(self) -> Dict[ItemId, Tuple[int, int]]:
        """Values plus writer ids; equal across converged replicas."""
        return {k: (c.value, c.writer) for k, c in self.cells.items()}

    def canonical(self) -> List[Tuple[ItemId, int, int]]:
        """Snapshot with versions densely renumbered from 0.

        Replicas that applied the same sequence of write-sets compare equal
        here even if their clocks started apart.
        """
        ranks = {v: i for i, v in enumerate(sorted({c.version for c in self.cells.values()}))}
        return [(k, v, ranks[ver]) for k, v, ver in self.snapshot()]

    def total(self, keys: Optional[Iterable[ItemId]] = None) -> int:
        if keys is None:
            return sum(c.value for c in self.cells.values())
        return sum(self.cells[k].value for k in keys)

    def dump_csv(self, fp: TextIO):
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["key", "value", "version"])
        for row in self.snapshot():
            w.writerow(row)
