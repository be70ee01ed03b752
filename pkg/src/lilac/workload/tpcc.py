"""TPC-C-lite: Payment and New Order over a flattened key space.

Key layout (all values are integers):

    w{w}              warehouse year-to-date amount
    wt{w}             warehouse tax (read-only)
    dy{w}.{d}         district year-to-date amount
    dn{w}.{d}         district next order id
    c{w}.{d}.{c}      customer balance
    s{w}.{i}          stock quantity
    o{w}.{d}.{o}      order header (customer id), inserted
    ol{w}.{d}.{o}.{l} order line (item id), inserted

Each warehouse is one partition with its own contiguous conflict-class range.
"""
import random
from dataclasses import dataclass
from typing import Dict, Tuple

from ..lease import PartitionedClassMap
from .base import WorkloadJob, op_cost, register

PAYMENT = "tpcc.payment"
NEW_ORDER = "tpcc.neworder"


@dataclass
class TpccConfig:
    nodes: int = 4
    warehouses: int = 4
    districts: int = 10
    customers_per_district: int = 30
    items: int = 1000
    classes_per_warehouse: int = 16
    payment_fraction: float = 0.95
    mistake_prob: float = 0.2
    order_lines: Tuple[int, int] = (5, 15)
    remote_line_prob: float = 0.01
    initial_stock: int = 50
    ops_per_tick: int = 4

    @property
    def new_order_fraction(self) -> float:
        return 1.0 - self.payment_fraction

    def validate(self):
        if self.warehouses % self.nodes:
            raise ValueError("warehouses must split evenly across nodes")
        if not 0.0 <= self.payment_fraction <= 1.0:
            raise ValueError("payment_fraction must lie in [0, 1]")
        if not 0.0 <= self.mistake_prob <= 1.0:
            raise ValueError("mistake_prob must lie in [0, 1]")


def warehouse_of(key: str) -> int:
    i = 0
    while key[i].isalpha():
        i += 1
    j = i
    while j < len(key) and key[j] != ".":
        j += 1
    return int(key[i:j])


class Tpcc:
    def __init__(self, cfg: TpccConfig):
        cfg.validate()
        self.cfg = cfg
        self.per_node = cfg.warehouses // cfg.nodes
        self.class_map = PartitionedClassMap(cfg.warehouses, cfg.classes_per_warehouse, warehouse_of)

    def owner(self, warehouse: int) -> int:
        return warehouse // self.per_node

    def warehouses_of(self, node: int) -> range:
        return range(node * self.per_node, (node + 1) * self.per_node)

    def initial_items(self) -> Dict[str, int]:
        cfg = self.cfg
        items: Dict[str, int] = {}
        for w in range(cfg.warehouses):
            items[f"w{w}"] = 0
            items[f"wt{w}"] = 5 + w % 10
            for d in range(cfg.districts):
                items[f"dy{w}.{d}"] = 0
                items[f"dn{w}.{d}"] = 1
                for c in range(cfg.customers_per_district):
                    items[f"c{w}.{d}.{c}"] = 0
            for i in range(cfg.items):
                items[f"s{w}.{i}"] = cfg.initial_stock
        return items

    def next_tx(self, region: int, rng: random.Random) -> Tuple[int, WorkloadJob]:
        """Returns (dispatch node, job).  The balancer always dispatches to the
        region's node; with ``mistake_prob`` the user belongs elsewhere."""
        cfg = self.cfg
        if cfg.nodes > 1 and rng.random() < cfg.mistake_prob:
            others = [n for n in range(cfg.nodes) if n != region]
            w = rng.choice(self.warehouses_of(rng.choice(others)))
        else:
            w = rng.choice(self.warehouses_of(region))
        d = rng.randrange(cfg.districts)
        if rng.random() < cfg.payment_fraction:
            c = rng.randrange(cfg.customers_per_district)
            amount = rng.randint(1, 5000)
            job = WorkloadJob(PAYMENT, (w, d, c, amount), False, w, self.owner(w),
                              op_cost(6, cfg.ops_per_tick))
            return region, job
        c = rng.randrange(cfg.customers_per_district)
        n_lines = rng.randint(*cfg.order_lines)
        lines = []
        for item in rng.sample(range(cfg.items), n_lines):
            supply = w
            if cfg.warehouses > 1 and rng.random() < cfg.remote_line_prob:
                supply = rng.choice([x for x in range(cfg.warehouses) if x != w])
            lines.append((item, supply, rng.randint(1, 10)))
        ops = 5 + 3 * n_lines
        job = WorkloadJob(NEW_ORDER, (w, d, c, tuple(lines)), False, w, self.owner(w),
                          op_cost(ops, cfg.ops_per_tick))
        return region, job


@register(PAYMENT)
def payment_logic(store, tx, params):
    w, d, c, amount = params
    store.write(tx, f"w{w}", store.read(tx, f"w{w}") + amount)
    store.write(tx, f"dy{w}.{d}", store.read(tx, f"dy{w}.{d}") + amount)
    bal = store.read(tx, f"c{w}.{d}.{c}") - amount
    store.write(tx, f"c{w}.{d}.{c}", bal)
    return bal


@register(NEW_ORDER)
def new_order_logic(store, tx, params):
    w, d, c, lines = params
    store.read(tx, f"wt{w}")
    store.read(tx, f"c{w}.{d}.{c}")
    o_id = store.read(tx, f"dn{w}.{d}")
    store.write(tx, f"dn{w}.{d}", o_id + 1)
    store.write(tx, f"o{w}.{d}.{o_id}", c)
    for n, (item, supply, qty) in enumerate(lines):
        key = f"s{supply}.{item}"
        s = store.read(tx, key)
        s = s - qty if s - qty >= 10 else s - qty + 91
        store.write(tx, key, s)
        store.write(tx, f"ol{w}.{d}.{o_id}.{n}", item)
    return o_id
