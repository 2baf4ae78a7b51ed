import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilevelnn import problems as P


def small_kip():
    return P.KipInstance((6, 5, 4), (3, 4, 5), 7, 1)


def test_generate_kip_invariants():
    inst = P.generate_instance("kip", 18, 1, k=5)
    assert inst.n == 18 and inst.k == 5
    assert min(inst.p) >= 1 and min(inst.a) >= 1
    assert 0 <= inst.b < sum(inst.a)


def test_generate_deterministic():
    assert P.generate_instance("kip", 3, 42, k=3) == P.generate_instance("kip", 3, 42, k=3)
    assert P.generate_instance("drp", 5, 9) == P.generate_instance("drp", 5, 9)


def test_generate_cnp_budget():
    inst = P.generate_instance("cnp", 10, 7)
    assert inst.D < sum(inst.d) and inst.A < sum(inst.a)
    assert all(0.05 <= getattr(inst, f) <= 0.95 for f in ("gamma", "eta", "epsilon", "delta"))


def test_generate_kip_default_budget_from_triple():
    ks = {P.generate_instance("kip", 18, s).k for s in range(40)}
    assert ks <= set(P.budget_triple(18)) and len(ks) > 1


@pytest.mark.parametrize("n,k", [(0, 0), (3, 4)])
def test_generate_rejects_bad_sizes(n, k):
    with pytest.raises(ValueError):
        P.generate_instance("kip", n, 0, k=k)


def test_instance_validation():
    with pytest.raises(ValueError):
        P.KipInstance((1, 2), (1, 1), 2, 1)  # b == sum(a)
    with pytest.raises(ValueError):
        P.CnpInstance((1.0,), (1.0,), (1,), (1,), 0, 0, 1.5, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        P.DrpInstance((1.0,), (1.0,), (0.0,), 0.0, 1.0, 1.0, 1.0)


def test_leader_feasible_kip_budget():
    inst = P.generate_instance("kip", 10, 3, k=5)
    x = np.zeros(10)
    x[:5] = 1
    assert P.leader_feasible(inst, x)
    x[5] = 1
    assert not P.leader_feasible(inst, x)
    assert not P.leader_feasible(inst, np.full(10, 0.5))


def test_leader_feasible_drp_cost():
    inst = P.DrpInstance((1.0,), (1.0,), (4.0,), 0.0, 1.0, 1.0, 1.0)
    assert not P.leader_feasible(inst, [0.5])
    assert P.leader_feasible(inst, [0.25])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        P.leader_feasible(small_kip(), [0, 1])


def test_objectives_examples():
    assert P.leader_objective(small_kip(), [0, 0, 0], [1, 1, 0]) == 11
    cnp = P.CnpInstance((10.0,), (8.0,), (1,), (1,), 1, 1, 0.5, 0.6, 0.5, 0.2)
    assert P.leader_objective(cnp, [1], [1]) == pytest.approx(6.0)
    assert P.follower_objective(cnp, [0], [0]) == pytest.approx(-4.0)
    drp = P.DrpInstance((1.0,), (5.0,), (1.0,), 1.0, 1.0, 1.0, 2.0)
    assert P.follower_objective(drp, [0.0], [1], y0=1.0) == pytest.approx(6.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_kip_objectives_coincide(seed, n):
    inst = P.generate_instance("kip", n, seed)
    rng = np.random.default_rng(seed)
    x, y = rng.integers(0, 2, n), rng.integers(0, 2, n)
    assert P.leader_objective(inst, x, y) == P.follower_objective(inst, x, y)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["kip", "cnp", "drp"]), st.integers(0, 2**32 - 1))
def test_zero_follower_always_feasible(kind, seed):
    inst = P.generate_instance(kind, 6, seed)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, 6) if kind == "drp" else rng.integers(0, 2, 6)
    assert P.follower_feasible(inst, x, np.zeros(6))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cnp_objectives_affine_in_y(seed):
    inst = P.generate_instance("cnp", 5, seed)
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, 5).astype(float)
    y0 = np.zeros(5)
    for fn in (P.leader_objective, P.follower_objective):
        base = fn(inst, x, y0)
        grads = [fn(inst, x, np.eye(5)[i]) - base for i in range(5)]
        y = rng.integers(0, 2, 5).astype(float)
        assert fn(inst, x, y) == pytest.approx(base + float(np.dot(grads, y)))


def test_greedy_order_ties_lower_index_first():
    inst = P.KipInstance((2, 4, 1), (1, 2, 1), 2, 1)
    assert P.greedy_order(inst) == [0, 1, 2]


def test_roundtrip(tmp_path):
    for kind in ("kip", "cnp", "drp"):
        inst = P.generate_instance(kind, 6, 11)
        path = tmp_path / f"{kind}.json"
        P.save_instance(inst, path)
        assert P.load_instance(path) == inst
        d = json.loads(path.read_text())
        assert d["kind"] == kind and d["n"] == 6 and d["seed"] == 11
