import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilevelnn import dataset as D
from bilevelnn import embed as E
from bilevelnn import mlp
from bilevelnn import oracle as O
from bilevelnn import problems as P
from bilevelnn.milp import MilpModel, check, solve


def random_net(inst, seed, greedy=False, target="lower", scale=2.0):
    cfg = mlp.TrainConfig(hidden=(6, 6, 6), embed_dim=4, instance_dim=3, seed=seed)
    fc = D.fit_feature_config(inst.kind, [inst], greedy)
    fs = fc.normalize(D.features_static(inst, greedy))
    dec = D.decision_columns(inst, np.zeros(inst.n), greedy)
    net = mlp.init_network(fs.shape[1], dec.shape[1], cfg, inst.kind, target, fc.to_dict())
    for k in net.params:
        net.params[k] *= scale  # wider weights leave more neurons undecided by bounds
    net.label_offset, net.label_scale = 1.5, 0.7
    return net


def encoded_range(net, inst, x, mode):
    """(min, max) of the encoded prediction with the leader fixed to ``x``."""
    vals = []
    for sense in ("min", "max"):
        m = MilpModel()
        if inst.kind == "drp":
            xv = [m.add_var(f"x{i}", 0.0, 1.0) for i in range(inst.n)]
        else:
            xv = [m.add_binary(f"x{i}") for i in range(inst.n)]
        for v, val in zip(xv, x):
            m.fix(v, float(val))
        yg = E.encode_greedy(m, inst, xv)[0] if E.needs_greedy(net) else None
        out = E.encode_set_network(m, net, inst, xv, yg, mode=mode)
        m.set_objective(out, sense)
        sol = solve(m)
        assert sol.status == "optimal"
        assert check(m, sol.values) == []
        vals.append(sol.objective)
    return vals


def test_propagate_bounds_examples():
    t = E.propagate_bounds([(np.array([[1.0, -1.0]]), np.zeros(1))], [0, 0], [1, 1])
    assert t.lower[0].tolist() == [-1.0] and t.upper[0].tolist() == [1.0]
    t = E.propagate_bounds([(np.zeros((2, 2)), np.array([0.5, -2.0]))], [-3, -3], [3, 3])
    assert t.lower[0].tolist() == t.upper[0].tolist() == [0.5, -2.0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_propagate_bounds_monotone(seed):
    rng = np.random.default_rng(seed)
    layers = [(rng.normal(size=(4, 3)), rng.normal(size=4)), (rng.normal(size=(1, 4)), rng.normal(size=1))]
    lo, hi = -rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
    a = E.propagate_bounds(layers, lo, hi)
    b = E.propagate_bounds(layers, lo - 0.5, hi + 0.5)
    for la, lb_, ua, ub_ in zip(a.lower, b.lower, a.upper, b.upper):
        assert np.all(lb_ <= la + 1e-12) and np.all(ub_ >= ua - 1e-12)


def test_relu_difference_example():
    layers = [(np.array([[1.0, -1.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1))]
    for pt, want in (((1, 0), 1.0), ((0, 1), 0.0), ((1, 1), 0.0), ((0, 0), 0.0)):
        m = MilpModel()
        xs = [m.add_binary("x1"), m.add_binary("x2")]
        out = E.encode_relu_network(m, layers, xs)[0]
        m.fix(xs[0], pt[0])
        m.fix(xs[1], pt[1])
        m.set_objective(out, "max")
        sol = solve(m)
        assert sol.objective == pytest.approx(want, abs=1e-9)
        assert check(m, sol.values) == []


def test_zero_network_constant_output():
    m = MilpModel()
    xs = [m.add_binary("a"), m.add_binary("b")]
    layers = [(np.zeros((3, 2)), np.zeros(3)), (np.zeros((1, 3)), np.zeros(1))]
    stats = E.EncodingStats()
    out = E.encode_relu_network(m, layers, xs, stats=stats)[0]
    assert out.terms == {} and out.constant == 0.0
    assert stats.binaries == 0


def test_unbounded_input_refused():
    m = MilpModel()
    v = m.add_var("v", 0.0, 1.0)
    m.ub[v.index] = np.inf
    with pytest.raises(E.EncodingError):
        E.encode_relu_network(m, [(np.ones((1, 1)), np.zeros(1))], [v])


@pytest.mark.parametrize("kind,greedy", [("kip", False), ("kip", True), ("cnp", False), ("drp", False)])
def test_set_network_encoding_matches_forward(kind, greedy):
    rng = np.random.default_rng(5)
    for s in range(3):
        inst = P.generate_instance(kind, 5, 100 + s)
        net = random_net(inst, s, greedy)
        for _ in range(4):
            x = D.sample_decision(inst, rng)
            want = E.predict(net, inst, x)
            modes = ["bigm"] if kind == "drp" else ["bigm", "tabulate"]
            for mode in modes:
                lo, hi = encoded_range(net, inst, x, mode)
                assert lo == pytest.approx(want, abs=1e-5) and hi == pytest.approx(want, abs=1e-5)


def test_tabulation_refused_for_continuous_leader():
    inst = P.generate_instance("drp", 3, 1)
    net = random_net(inst, 0)
    m = MilpModel()
    xv = [m.add_var(f"x{i}", 0, 1) for i in range(3)]
    with pytest.raises(E.EncodingError):
        E.encode_set_network(m, net, inst, xv, mode="tabulate")


def test_network_kind_mismatch():
    kip = P.generate_instance("kip", 4, 0)
    net = random_net(P.generate_instance("cnp", 4, 0), 0)
    m = MilpModel()
    with pytest.raises(E.EncodingError):
        E.encode_set_network(m, net, kip, [m.add_binary() for _ in range(4)])


def test_binary_count_bound():
    inst = P.generate_instance("cnp", 4, 3)
    net = random_net(inst, 1)
    m = MilpModel()
    xv = [m.add_binary(f"x{i}") for i in range(4)]
    stats = E.EncodingStats()
    E.encode_set_network(m, net, inst, xv, mode="bigm", stats=stats)
    hidden = net.params["v.W1"].shape[0]
    assert 0 < stats.binaries <= inst.n * hidden
    assert stats.binaries + stats.fixed_active + stats.fixed_inactive == inst.n * hidden


def greedy_model(inst, x):
    m = MilpModel()
    xv = [m.add_binary(f"x{i}") for i in range(inst.n)]
    for v, val in zip(xv, x):
        m.fix(v, float(val))
    yg, val = E.encode_greedy(m, inst, xv)
    m.set_objective(val, "max")
    sol = solve(m)
    return m, sol, [sol[v] for v in yg], sol.value(val)


def test_greedy_encoding_examples():
    inst = P.KipInstance((6, 5, 4), (3, 4, 5), 7, 1)
    _, _, y, v = greedy_model(inst, [0, 0, 0])
    assert y == [1, 1, 0] and v == pytest.approx(11)
    _, _, y, v = greedy_model(inst, [1, 1, 1])
    assert y == [0, 0, 0] and v == pytest.approx(0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10))
def test_greedy_encoding_matches_procedure(seed, n):
    inst = P.generate_instance("kip", n, seed)
    x = np.random.default_rng(seed).integers(0, 2, n)
    want = O.greedy_knapsack(inst, x)
    for sense in ("min", "max"):  # the system admits exactly one y^g
        m = MilpModel()
        xv = [m.add_binary(f"x{i}") for i in range(n)]
        for v, val in zip(xv, x):
            m.fix(v, float(val))
        yg, val = E.encode_greedy(m, inst, xv)
        m.set_objective(val, sense)
        sol = solve(m)
        assert [round(sol[v]) for v in yg] == want.y.astype(int).tolist()
        assert sol.value(val) == pytest.approx(want.value, abs=1e-9)


def test_greedy_encoding_rejects_fractional_weights():
    inst = P.KipInstance((6, 5), (3.5, 4), 4, 1)
    m = MilpModel()
    with pytest.raises(E.EncodingError):
        E.encode_greedy(m, inst, [m.add_binary(), m.add_binary()])


@pytest.mark.parametrize("u,v,z", [(1.0, 1.0, 1.0), (0.5, 1.0, 0.5), (0.7, 0.0, 0.0), (1.0, 0.0, 0.0)])
def test_linearize_product(u, v, z):
    for sense in ("min", "max"):
        m = MilpModel()
        uu = m.add_var("u", 0.0, 1.0)
        vv = m.add_binary("v")
        zz = E.linearize_product(m, uu, vv)
        m.fix(uu, u)
        m.fix(vv, v)
        m.set_objective(zz, sense)
        assert solve(m).objective == pytest.approx(z)


def test_linearize_product_refuses_wide_factor():
    m = MilpModel()
    u = m.add_var("u", 0.0, 2.0)
    with pytest.raises(E.EncodingError):
        E.linearize_product(m, u, m.add_binary("v"))


def test_table_predictor_encoding():
    inst = P.ToyInstance()
    pred = E.TablePredictor.from_function(inst, lambda x: 2.0 - 2.0 * x[0])
    for xval in (0, 1):
        m = MilpModel()
        x = m.add_binary("x")
        m.fix(x, xval)
        out = E.encode_table(m, pred, [x])
        m.set_objective(out, "min")
        assert solve(m).objective == pytest.approx(2.0 - 2.0 * xval)


def test_predict_batch_matches_single():
    inst = P.generate_instance("kip", 6, 2, k=2)
    net = random_net(inst, 3, greedy=True)
    X = np.array(O.enumerate_leader(inst))
    batch = E.predict_batch(net, inst, X)
    assert np.allclose(batch, [E.predict(net, inst, x) for x in X], atol=1e-12)
