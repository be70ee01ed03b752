import random

import pytest
from hypothesis import given, settings, strategies as st

from lilac.stm import Replica
from lilac.workload import (BALANCE, NEW_ORDER, PAYMENT, TRANSFER, Bank, BankConfig, Tpcc, TpccConfig,
                            WorkloadJob, execute, overload_scenario, register)
from lilac.workload.base import op_cost


def draws(bank, node, count, seed=0):
    rng = random.Random(seed)
    return [bank.next_tx(node, rng) for _ in range(count)]


@pytest.mark.parametrize("p, local", [(1.0, True), (0.0, False)])
def test_locality_boundaries(p, local):
    bank = Bank(BankConfig(locality=p))
    for node in range(4):
        assert all((bank.owner(j.partition) == node) is local for j in draws(bank, node, 500, node))


def test_locality_fraction_at_0_8():
    bank = Bank(BankConfig(locality=0.8))
    jobs = draws(bank, 2, 10_000, seed=11)
    frac = sum(bank.owner(j.partition) == 2 for j in jobs) / len(jobs)
    assert abs(frac - 0.8) <= 0.02


def test_read_write_mix_and_job_shape():
    bank = Bank(BankConfig())
    jobs = draws(bank, 0, 4000, seed=3)
    rw = [j for j in jobs if not j.read_only]
    assert abs(len(rw) / len(jobs) - 0.5) < 0.03
    assert all(j.ref == TRANSFER and len(j.params) == 2 for j in rw)
    ro = [j for j in jobs if j.read_only]
    assert all(j.ref == BALANCE and 5 <= len(j.params) <= 20 for j in ro)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1))
def test_single_partition_property(seed, p):
    bank = Bank(BankConfig(locality=p))
    rng = random.Random(seed)
    store = Replica(0, bank.initial_items())
    for _ in range(20):
        node = rng.randrange(4)
        job = bank.next_tx(node, rng)
        tx = store.begin(job.read_only)
        execute(job, store, tx)
        classes = bank.class_map.classes(tx.keys())
        assert classes <= set(bank.class_map.partition_range(job.partition))
        assert {bank.partition_of(k) for k in tx.keys()} == {job.partition}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_transfers_conserve_balance(seed):
    bank = Bank(BankConfig())
    rng = random.Random(seed)
    store = Replica(0, bank.initial_items())
    for i in range(30):
        job = bank.next_tx(rng.randrange(4), rng)
        tx = store.begin(job.read_only)
        execute(job, store, tx)
        store.apply_writeset(tx.write_set, i + 1)
    assert store.total() == bank.initial_total()


def test_bank_config_validation():
    with pytest.raises(ValueError):
        Bank(BankConfig(locality=1.5))
    with pytest.raises(ValueError):
        Bank(BankConfig(accounts_per_partition=4, read_ops=(5, 20)))


def test_tpcc_mix_and_balancer():
    tpcc = Tpcc(TpccConfig())
    rng = random.Random(5)
    jobs, mistakes = [], 0
    for i in range(12_000):
        region = i % 4
        target, job = tpcc.next_tx(region, rng)
        assert target == region
        mistakes += tpcc.owner(job.partition) != region
        jobs.append(job)
    pay = sum(j.ref == PAYMENT for j in jobs) / len(jobs)
    assert abs(pay - 0.95) <= 0.01
    assert abs(mistakes / len(jobs) - 0.2) <= 0.015
    assert TpccConfig().new_order_fraction + TpccConfig().payment_fraction == 1.0


def test_tpcc_logic_effects():
    tpcc = Tpcc(TpccConfig(nodes=2, warehouses=2, items=50))
    store = Replica(0, tpcc.initial_items())
    pay = WorkloadJob(PAYMENT, (1, 3, 4, 100), False, 1, 1)
    tx = store.begin()
    assert execute(pay, store, tx) == -100
    assert tx.write_set == {"w1": 100, "dy1.3": 100, "c1.3.4": -100}
    no = WorkloadJob(NEW_ORDER, (0, 2, 7, ((5, 0, 3), (6, 1, 45))), False, 0, 0)
    tx = store.begin()
    assert execute(no, store, tx) == 1
    assert tx.write_set["dn0.2"] == 2 and tx.write_set["o0.2.1"] == 7
    assert tx.write_set["s0.5"] == 47 and tx.write_set["s1.6"] == 50 - 45 + 91
    assert tx.write_set["ol0.2.1.1"] == 6
    classes = tpcc.class_map.classes(tx.keys())
    assert len({c // 16 for c in classes}) == 2          # remote stock line spans two warehouses


def test_tpcc_config_validation():
    with pytest.raises(ValueError):
        Tpcc(TpccConfig(nodes=3, warehouses=4))


def test_overload_hot_partition_choice():
    bank, sched = overload_scenario(BankConfig(locality=1.0), 40.0, 0.95, hot_partition=0)
    assert sched.node == 0 and sched.inject_at_s == 40.0
    rng = random.Random(1)
    assert all(bank.choose_partition(0, rng) == 0 for _ in range(500))
    picks = [bank.choose_partition(1, rng) for _ in range(10_000)]
    assert abs(picks.count(0) / len(picks) - 0.2) < 0.02
    assert set(picks) == {0, 2, 3}
    with pytest.raises(ValueError):
        overload_scenario(BankConfig(), external_load=1.0)


def test_registry_rules():
    with pytest.raises(ValueError):
        register(TRANSFER)(lambda s, t, p: None)
    with pytest.raises(LookupError):
        execute(WorkloadJob("nope", (), True), Replica(0), Replica(0).begin())
    assert op_cost(8, 4) == 2 and op_cost(9, 4) == 3 and op_cost(0, 4) == 1
