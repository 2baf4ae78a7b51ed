import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilevelnn import oracle as O
from bilevelnn import problems as P


def small_kip(k=1):
    return P.KipInstance((6, 5, 4), (3, 4, 5), 7, k)


def cnp_one():
    return P.CnpInstance((10.0,), (8.0,), (1,), (1,), 1, 1, 0.5, 0.6, 0.5, 0.2)


def enumerate_follower(inst, x):
    best = -np.inf
    for y in itertools.product((0.0, 1.0), repeat=inst.n):
        y = np.array(y)
        if P.follower_feasible(inst, x, y):
            best = max(best, P.follower_objective(inst, x, y))
    return best


def test_follower_examples():
    fs = O.solve_follower(small_kip(), [0, 0, 0])
    assert fs.value == 11 and fs.y.tolist() == [1, 1, 0]
    fs = O.solve_follower(small_kip(), [1, 1, 1])
    assert fs.value == 0 and not fs.y.any()
    assert O.solve_follower(cnp_one(), [1]).value == pytest.approx(3.2)


def test_greedy_examples():
    g = O.greedy_knapsack(small_kip(), [0, 0, 0])
    assert g.y.tolist() == [1, 1, 0] and g.value == 11 and not g.optimal
    g = O.greedy_knapsack(small_kip(), [1, 0, 0])
    assert g.y.tolist() == [0, 1, 0] and g.value == 5
    zero = P.KipInstance((6, 5, 4), (3, 4, 5), 0, 1)
    assert O.greedy_knapsack(zero, [0, 0, 0]).value == 0


def test_non_integer_weights_refused():
    inst = P.KipInstance((6, 5), (3.5, 4), 4, 1)
    with pytest.raises(O.OracleError):
        O.solve_follower(inst, [0, 0])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["kip", "cnp"]), st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_dp_matches_enumeration(kind, seed, n):
    inst = P.generate_instance(kind, n, seed)
    x = O.enumerate_leader(inst)[seed % len(O.enumerate_leader(inst))]
    fs = O.solve_follower(inst, x)
    assert P.follower_feasible(inst, x, fs.y)
    assert fs.value == pytest.approx(enumerate_follower(inst, x), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_greedy_never_beats_optimum(seed, n):
    inst = P.generate_instance("kip", n, seed)
    x = np.random.default_rng(seed).integers(0, 2, n)
    assert O.greedy_knapsack(inst, x).value <= O.solve_follower(inst, x).value


def test_drp_follower_milp_matches_enumeration():
    inst = P.generate_instance("drp", 5, 3)
    x = np.array([0.2, 0.0, 0.5, 0.0, 0.1])
    fs = O.solve_follower(inst, x)
    best = -np.inf
    c = np.asarray(inst.c)
    for y in itertools.product((0.0, 1.0), repeat=5):
        y = np.array(y)
        room = inst.Br - float(np.dot(c - c * x, y))
        if room < 0:
            continue
        y0 = min(1.0, room / inst.c0)
        best = max(best, float(np.dot(inst.v, y)) + inst.v0 * y0)
    assert fs.value == pytest.approx(best, abs=1e-6)


def test_repair_kip_identity_and_contract():
    inst = P.generate_instance("kip", 10, 4, k=3)
    x = np.zeros(10)
    x[[1, 4]] = 1
    sol = O.repair(inst, x)
    assert sol.status == "heuristic"
    assert sol.leader_value == sol.follower_value == O.solve_follower(inst, x).value


@pytest.mark.parametrize("kind", ["cnp", "drp"])
def test_repair_is_optimistic(kind):
    inst = P.generate_instance(kind, 5, 8)
    rng = np.random.default_rng(0)
    from bilevelnn.dataset import sample_decision

    for _ in range(3):
        x = sample_decision(inst, rng)
        sol = O.repair(inst, x)
        phi = O.solve_follower(inst, x).value
        assert sol.follower_value == pytest.approx(phi, abs=1e-6)
        assert P.follower_feasible(inst, x, sol.y, sol.y0)
        if kind == "cnp":
            # no other follower optimum is better for the leader
            for y in itertools.product((0.0, 1.0), repeat=5):
                y = np.array(y)
                if P.follower_feasible(inst, x, y) and P.follower_objective(inst, x, y) >= phi - 1e-9:
                    assert P.leader_objective(inst, x, y) <= sol.leader_value + 1e-9


def test_repair_infeasible_leader():
    assert O.repair(small_kip(k=1), [1, 1, 0]).status == "infeasible"


def test_toy_repair():
    toy = P.ToyInstance()
    assert O.repair(toy, [1]).status == "infeasible"
    sol = O.repair(toy, [0])
    assert sol.y.tolist() == [1] and sol.leader_value == 1


def test_bruteforce_examples():
    sol = O.solve_bruteforce(small_kip(k=1))
    assert sol.status == "optimal" and sol.x.tolist() == [1, 0, 0] and sol.leader_value == 5
    assert O.solve_bruteforce(small_kip(k=0)).leader_value == 11
    sol = O.solve_bruteforce(cnp_one())
    assert sol.x.tolist() == [1] and sol.leader_value == pytest.approx(6.0)


def test_bruteforce_maximal_only_matches_full():
    for seed in range(5):
        inst = P.generate_instance("kip", 8, seed, k=3)
        a = O.solve_bruteforce(inst, maximal_only=True).leader_value
        b = O.solve_bruteforce(inst, maximal_only=False).leader_value
        assert a == b


def test_bruteforce_cap():
    inst = P.generate_instance("kip", 18, 0, k=9)
    with pytest.raises(O.SizeError):
        O.solve_bruteforce(inst, cap=100)


def test_drp_bruteforce_grid_status():
    inst = P.generate_instance("drp", 3, 2)
    sol = O.solve_bruteforce(inst)
    assert sol.status == "grid-optimal"
    assert P.leader_feasible(inst, sol.x)


def test_kip_batch_values_match_dp():
    inst = P.generate_instance("kip", 9, 5, k=4)
    X = np.array(O.enumerate_leader(inst))
    vals = O.kip_values_batch(inst, X)
    assert all(v == O.solve_follower(inst, x).value for v, x in zip(vals, X))
