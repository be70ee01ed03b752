"""Partitioned Bank benchmark.

Accounts are split into partitions, ``partitions_per_node`` of them
associated with each node.  Every transaction touches a single partition,
local to its origin with probability ``locality``.
"""
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..lease import PartitionedClassMap
from .base import WorkloadJob, op_cost, register

TRANSFER = "bank.transfer"
BALANCE = "bank.balance"


@dataclass
class BankConfig:
    nodes: int = 4
    partitions_per_node: int = 2
    accounts_per_partition: int = 64
    classes_per_partition: int = 8
    locality: float = 0.5
    read_write_ratio: float = 0.5
    transfers_per_tx: int = 2
    read_ops: Tuple[int, int] = (5, 20)
    initial_balance: int = 1000
    max_amount: int = 10
    ops_per_tick: int = 4
    # overload scenario: every node but the hot partition's owner picks the
    # hot partition with this probability; the owner only ever picks it
    hot_partition: Optional[int] = None
    hot_prob: float = 0.2

    @property
    def num_partitions(self) -> int:
        return self.nodes * self.partitions_per_node

    @property
    def num_accounts(self) -> int:
        return self.num_partitions * self.accounts_per_partition

    def validate(self):
        if not 0.0 <= self.locality <= 1.0:
            raise ValueError("locality must lie in [0, 1]")
        if self.nodes > 1 and self.partitions_per_node < 1:
            raise ValueError("each node needs at least one partition")
        lo, hi = self.read_ops
        if not 1 <= lo <= hi <= self.accounts_per_partition:
            raise ValueError("read_ops range must fit inside a partition")
        if self.accounts_per_partition < 2:
            raise ValueError("transfers need two accounts per partition")


def account_key(idx: int) -> str:
    return f"a{idx}"


class Bank:
    def __init__(self, cfg: BankConfig):
        cfg.validate()
        self.cfg = cfg
        self.class_map = PartitionedClassMap(cfg.num_partitions, cfg.classes_per_partition,
                                             self.partition_of)
        self._local: List[List[int]] = [
            [p for p in range(cfg.num_partitions) if self.owner(p) == n] for n in range(cfg.nodes)]
        self._remote: List[List[int]] = [
            [p for p in range(cfg.num_partitions) if self.owner(p) != n] for n in range(cfg.nodes)]

    def owner(self, partition: int) -> int:
        return partition // self.cfg.partitions_per_node

    def partition_of(self, key: str) -> int:
        return int(key[1:]) // self.cfg.accounts_per_partition

    def accounts(self, partition: int) -> range:
        a = self.cfg.accounts_per_partition
        return range(partition * a, (partition + 1) * a)

    def initial_items(self) -> Dict[str, int]:
        return {account_key(i): self.cfg.initial_balance for i in range(self.cfg.num_accounts)}

    def initial_total(self) -> int:
        return self.cfg.num_accounts * self.cfg.initial_balance

    def choose_partition(self, node: int, rng: random.Random) -> int:
        cfg = self.cfg
        hot = cfg.hot_partition
        if hot is not None:
            if self.owner(hot) == node:
                return hot
            if rng.random() < cfg.hot_prob:
                return hot
        if not self._remote[node] or rng.random() < cfg.locality:
            return rng.choice(self._local[node])
        return rng.choice(self._remote[node])

    def next_tx(self, node: int, rng: random.Random) -> WorkloadJob:
        cfg = self.cfg
        p = self.choose_partition(node, rng)
        base = p * cfg.accounts_per_partition
        n = cfg.accounts_per_partition
        if rng.random() < cfg.read_write_ratio:
            moves = []
            for _ in range(cfg.transfers_per_tx):
                src, dst = rng.sample(range(n), 2)
                moves.append((account_key(base + src), account_key(base + dst),
                              rng.randint(1, cfg.max_amount)))
            cost = op_cost(4 * cfg.transfers_per_tx, cfg.ops_per_tick)
            return WorkloadJob(TRANSFER, tuple(moves), False, p, self.owner(p), cost)
        k = rng.randint(*cfg.read_ops)
        keys = tuple(account_key(base + i) for i in rng.sample(range(n), k))
        return WorkloadJob(BALANCE, keys, True, p, self.owner(p), op_cost(k, cfg.ops_per_tick))


@register(TRANSFER)
def transfer_logic(store, tx, moves):
    for src, dst, amount in moves:
        a = store.read(tx, src)
        b = store.read(tx, dst)
        store.write(tx, src, a - amount)
        store.write(tx, dst, b + amount)
    return tuple(store.read(tx, k) for k in sorted({m[0] for m in moves} | {m[1] for m in moves}))


@register(BALANCE)
def balance_logic(store, tx, keys):
    return sum(store.read(tx, k) for k in keys)
