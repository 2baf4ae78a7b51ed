import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilevelnn import dataset as D
from bilevelnn import oracle as O
from bilevelnn import problems as P


def small_kip():
    return P.KipInstance((6, 5, 4), (3, 4, 5), 7, 1)


def test_sample_kip_zero_budget():
    inst = P.generate_instance("kip", 8, 1, k=0)
    rng = np.random.default_rng(0)
    assert all(not D.sample_decision(inst, rng).any() for _ in range(50))


@pytest.mark.parametrize("kind", ["kip", "cnp", "drp"])
def test_samples_always_feasible(kind):
    inst = P.generate_instance(kind, 10, 3)
    rng = np.random.default_rng(1)
    assert all(P.leader_feasible(inst, D.sample_decision(inst, rng)) for _ in range(1000))


def test_sample_count_mean():
    inst = P.generate_instance("kip", 18, 2, k=9)
    rng = np.random.default_rng(2)
    counts = [D.sample_decision(inst, rng).sum() for _ in range(10_000)]
    assert 3.5 <= np.mean(counts) <= 5.5


def test_collect_kip_identity():
    ds = D.collect("kip", 10, 5, 0, 8)
    assert len(ds.samples) == 50
    assert all(s.F == s.f for s in ds.samples)


def test_collect_labels_match_oracle():
    ds = D.collect("kip", 1, 1, 3, 8, sampler=lambda inst, rng: np.zeros(inst.n))
    inst = ds.instances[0]
    assert ds.samples[0].f == O.solve_follower(inst, np.zeros(inst.n)).value


@pytest.mark.parametrize("kind", ["kip", "cnp"])
def test_labels_recompute(kind):
    ds = D.collect(kind, 3, 4, 5, 6)
    for s in ds.samples:
        assert s.f == pytest.approx(O.solve_follower(ds.instances[s.instance_id], s.x).value, abs=1e-9)


def test_collect_deterministic(tmp_path):
    for i in range(2):
        D.save_dataset(D.collect("cnp", 3, 4, 11, 5), tmp_path / f"d{i}.jsonl")
    assert (tmp_path / "d0.jsonl").read_bytes() == (tmp_path / "d1.jsonl").read_bytes()
    assert (tmp_path / "d0.meta.json").read_bytes() == (tmp_path / "d1.meta.json").read_bytes()


def test_collect_split_ratio():
    ds = D.collect("kip", 10, 10, 1, 6)
    assert len(ds.split("val")) == 10 and len(ds.split("train")) == 90


def test_collect_rejects_infeasible_sampler():
    with pytest.raises(O.OracleError):
        D.collect("kip", 1, 1, 0, 6, k=1, sampler=lambda inst, rng: np.ones(inst.n))


def test_static_features_examples():
    f = D.features_static(small_kip())
    assert np.allclose(f[:, 0], [1.0, 0.625, 0.4])
    g = D.features_static(P.generate_instance("kip", 18, 0, k=9))
    assert np.all(g[:, 3] == 0.5)


def test_greedy_strategy_example():
    xdg, ydg, obj = D.greedy_strategy(small_kip())
    assert xdg.tolist() == [1, 0, 0] and ydg.tolist() == [0, 1, 0] and obj == 5
    f = D.features_static(small_kip(), use_greedy=True)
    assert f[:, 4].tolist() == [1, 0, 0] and f[:, 5].tolist() == [0, 1, 0]


def test_decision_feature_examples():
    inst = small_kip()
    cols = D.decision_columns(inst, np.zeros(3), use_greedy=True)
    assert cols[:, 1].tolist() == O.greedy_knapsack(inst, np.zeros(3)).y.tolist()
    cnp = P.CnpInstance((10.0,), (8.0,), (1,), (1,), 1, 1, 0.5, 0.6, 0.5, 0.2)
    assert D.decision_columns(cnp, [1.0])[0].tolist() == pytest.approx([1.0, 0.0, 0.0, 0.4])
    drp = P.generate_instance("drp", 1, 0)
    cfg = D.fit_feature_config("drp", [drp])
    h = D.features_decision(drp, [0.5], cfg)
    assert h[0, -1] == 0.5
    assert np.allclose(h[0, :-1], cfg.normalize(D.features_static(drp))[0])


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["kip", "cnp", "drp"]), st.integers(0, 2**32 - 1))
def test_ratio_features_in_unit_interval(kind, seed):
    inst = P.generate_instance(kind, 7, seed)
    f = D.features_static(inst)
    for c in D.RATIO_COLUMNS[kind]:
        assert np.all(f[:, c] > 0) and np.all(f[:, c] <= 1)


def test_static_features_decision_independent():
    inst = P.generate_instance("cnp", 6, 1)
    cfg = D.fit_feature_config("cnp", [inst])
    rng = np.random.default_rng(0)
    heads = [D.features_decision(inst, D.sample_decision(inst, rng), cfg)[:, :12] for _ in range(5)]
    assert all(np.array_equal(heads[0], h) for h in heads)


def test_greedy_features_only_for_kip():
    with pytest.raises(ValueError):
        D.FeatureConfig("cnp", use_greedy_features=True)


def test_objective_coefficients():
    cnp = P.generate_instance("cnp", 4, 0)
    assert D.objective_coefficients(cnp, "upper").tolist() == list(cnp.pd)
    assert D.objective_coefficients(cnp, "lower").tolist() == list(cnp.pa)
    with pytest.raises(ValueError):
        D.objective_coefficients(cnp, "middle")


def test_roundtrip(tmp_path):
    ds = D.collect("kip", 3, 4, 2, 6, use_greedy=True)
    D.save_dataset(ds, tmp_path / "d.jsonl")
    back = D.load_dataset(tmp_path / "d.jsonl")
    assert back.kind == ds.kind and back.instances == ds.instances and back.config == ds.config
    for a, b in zip(ds.samples, back.samples):
        assert (a.instance_id, a.F, a.f, a.split) == (b.instance_id, b.F, b.f, b.split)
        assert np.array_equal(a.x, b.x)
    assert all(np.array_equal(a, b) for a, b in zip(ds.decision_features, back.decision_features))
    A, B = D.to_arrays(ds, "lower"), D.to_arrays(back, "lower")
    assert np.array_equal(A.static, B.static) and np.array_equal(A.labels, B.labels)
