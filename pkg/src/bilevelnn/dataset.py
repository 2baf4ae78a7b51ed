"""Training data: sampled leader decisions labeled by the follower oracle,
and the per-variable feature maps fed to the set network."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import oracle
from . import problems as P
from .mlp import ArrayData

log = logging.getLogger(__name__)

# columns of the static features that are ratios already scaled to (0, 1]
RATIO_COLUMNS = {"kip": (0,), "cnp": (0, 1), "drp": (0, 1)}


@dataclass
class FeatureConfig:
    kind: str
    use_greedy_features: bool = False
    # min-max constants per static column; ratio columns keep (0, 1)
    col_min: list = field(default_factory=list)
    col_max: list = field(default_factory=list)

    def __post_init__(self):
        if self.use_greedy_features and self.kind != "kip":
            raise ValueError("greedy features are only defined for KIP")

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.col_min, dtype=float)
        hi = np.asarray(self.col_max, dtype=float)
        span = np.where(hi - lo > 1e-12, hi - lo, 1.0)
        return (raw - lo) / span

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(**d)


@dataclass
class Sample:
    instance_id: int
    x: np.ndarray
    F: float
    f: float
    split: str = "train"


@dataclass
class Dataset:
    kind: str
    instances: list
    samples: list
    config: FeatureConfig
    decision_features: list  # per sample: (n, Fd) decision-dependent columns

    def split(self, tag: str) -> list:
        return [i for i, s in enumerate(self.samples) if s.split == tag]


def sample_decision(inst, rng) -> np.ndarray:
    """Random leader-feasible decision: budget use drawn uniformly first."""
    n = inst.n
    x = np.zeros(n)
    if inst.kind == "kip":
        count = int(rng.integers(0, inst.k + 1))
        x[rng.choice(n, size=count, replace=False)] = 1.0
        return x
    if inst.kind == "cnp":
        target = rng.uniform(0.0, inst.D)
        spent = 0
        for i in rng.permutation(n):
            if spent + inst.d[i] <= target:
                x[i] = 1.0
                spent += inst.d[i]
        return x
    if inst.kind == "drp":
        x = rng.uniform(0.0, 1.0, n)
        cost = float(np.dot(inst.c, x))
        if cost > inst.Bd:
            x = x * (inst.Bd / cost) * (1.0 - 1e-12)
        return x
    return rng.integers(0, 2, n).astype(float)


def greedy_strategy(inst):
    """Purely greedy play: leader removes the k best-ratio items, follower fills greedily."""
    x = np.zeros(inst.n)
    x[P.greedy_order(inst)[: inst.k]] = 1.0
    fs = oracle.greedy_knapsack(inst, x)
    return x, fs.y, fs.value


def features_static(inst, use_greedy: bool = False) -> np.ndarray:
    """Raw (unscaled) per-variable static features, shape (n, Fs)."""
    n = inst.n
    one = np.ones(n)
    if inst.kind == "kip":
        p = np.asarray(inst.p, dtype=float)
        a = np.asarray(inst.a, dtype=float)
        r = p / a
        cols = [r / r.max(), p, a, one * inst.k / n]
        if use_greedy:
            xdg, ydg, obj = greedy_strategy(inst)
            cols += [xdg, ydg, one * obj / n]
        return np.column_stack(cols)
    if inst.kind == "cnp":
        pd, pa = np.asarray(inst.pd, dtype=float), np.asarray(inst.pa, dtype=float)
        d, a = np.asarray(inst.d, dtype=float), np.asarray(inst.a, dtype=float)
        rd, ra = pd / d, pa / a
        scal = [inst.gamma, inst.eta, inst.epsilon, inst.delta, inst.A, inst.D]
        return np.column_stack([rd / rd.max(), ra / ra.max(), d, a, pa, pd] + [one * s for s in scal])
    if inst.kind == "drp":
        w, v, c = (np.asarray(t, dtype=float) for t in (inst.w, inst.v, inst.c))
        rw, rv = w / c, v / c
        return np.column_stack([rw / rw.max(), rv / rv.max(), w, v, c, one * inst.Bd, one * inst.Br])
    raise ValueError(f"no features for kind {inst.kind!r}")


def decision_columns(inst, x, use_greedy: bool = False) -> np.ndarray:
    """Decision-dependent part of h(x_i); column 0 is always x_i."""
    x = np.asarray(x, dtype=float)
    if inst.kind == "kip":
        if use_greedy:
            return np.column_stack([x, oracle.greedy_knapsack(inst, x).y])
        return x[:, None].copy()
    if inst.kind == "cnp":
        return np.column_stack([x, -inst.gamma * (1.0 - x), 1.0 - x, (1.0 - inst.eta) * x])
    return x[:, None].copy()


def features_decision(inst, x, config: FeatureConfig) -> np.ndarray:
    """Full h(x_i) = [f_i, decision columns], with f_i normalized."""
    static = config.normalize(features_static(inst, config.use_greedy_features))
    return np.hstack([static, decision_columns(inst, x, config.use_greedy_features)])


def fit_feature_config(kind: str, instances, use_greedy: bool = False) -> FeatureConfig:
    raws = np.vstack([features_static(inst, use_greedy) for inst in instances])
    lo, hi = raws.min(axis=0), raws.max(axis=0)
    for c in RATIO_COLUMNS[kind]:
        lo[c], hi[c] = 0.0, 1.0
    if use_greedy:
        lo[4:6], hi[4:6] = 0.0, 1.0  # 0/1 greedy indicators stay as they are
    return FeatureConfig(kind, use_greedy, lo.tolist(), hi.tolist())


def objective_coefficients(inst, target: str) -> np.ndarray:
    """Coefficients multiplying the per-variable outputs of the set network."""
    if target not in ("upper", "lower"):
        raise ValueError(f"target must be 'upper' or 'lower', got {target!r}")
    if inst.kind == "kip":
        c = inst.p
    elif inst.kind == "cnp":
        c = inst.pd if target == "upper" else inst.pa
    elif inst.kind == "drp":
        c = inst.w if target == "upper" else inst.v
    else:
        raise ValueError(f"no coefficients for kind {inst.kind!r}")
    return np.asarray(c, dtype=float)


def collect(kind: str, n_instances: int, decisions_per_instance: int, seed: int, n: int,
            k: int | None = None, use_greedy: bool = False, instances=None, sampler=None,
            val_fraction: float = 0.1) -> Dataset:
    """Generate instances, sample decisions, and label each with ``oracle.repair``.

    ``instances`` replaces generation; ``sampler(inst, rng)`` replaces
    ``sample_decision``. Everything is derived from ``seed``.
    """
    if n_instances <= 0 or decisions_per_instance <= 0:
        raise ValueError("instance and decision counts must be positive")
    if instances is None:
        seeds = np.random.SeedSequence(seed).generate_state(n_instances, dtype=np.uint32)
        instances = [P.generate_instance(kind, n, int(s), k) for s in seeds]
    elif len(instances) != n_instances:
        raise ValueError("number of supplied instances does not match n_instances")
    sampler = sampler or sample_decision
    samples, dec = [], []
    for iid, inst in enumerate(instances):
        rng = np.random.default_rng([seed, iid])
        for _ in range(decisions_per_instance):
            x = sampler(inst, rng)
            try:
                sol = oracle.repair(inst, x)
            except Exception as exc:
                raise oracle.OracleError(f"labeling failed on instance {iid} at x={x.tolist()}: {exc}") from exc
            if sol.status == "infeasible":
                raise oracle.OracleError(f"instance {iid}: sampled decision {x.tolist()} is infeasible")
            samples.append(Sample(iid, x, float(sol.leader_value), float(sol.follower_value)))
            dec.append(decision_columns(inst, x, use_greedy))
    order = np.random.default_rng([seed, 2**31]).permutation(len(samples))
    n_val = max(1, int(round(val_fraction * len(samples)))) if len(samples) > 1 else 0
    for j in order[:n_val]:
        samples[j].split = "val"
    config = fit_feature_config(kind, instances, use_greedy)
    log.info("collected %d samples over %d %s instances", len(samples), len(instances), kind)
    return Dataset(kind, list(instances), samples, config, dec)


def to_arrays(ds: Dataset, target: str, split: str | None = None) -> ArrayData:
    """Arrays for ``mlp``; labels are F for the upper target and f for the lower one."""
    idx = list(range(len(ds.samples))) if split is None else ds.split(split)
    static = np.stack([ds.config.normalize(features_static(inst, ds.config.use_greedy_features))
                       for inst in ds.instances])
    coeffs = np.stack([objective_coefficients(inst, target) for inst in ds.instances])
    inst_idx = np.array([ds.samples[i].instance_id for i in idx], dtype=int)
    Fd = ds.decision_features[0].shape[1]
    decision = (np.stack([ds.decision_features[i] for i in idx]) if idx
                else np.zeros((0, static.shape[1], Fd)))
    attr = "F" if target == "upper" else "f"
    labels = np.array([getattr(ds.samples[i], attr) for i in idx], dtype=float)
    return ArrayData(static, coeffs, inst_idx, decision, labels)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def save_dataset(ds: Dataset, path):
    """JSONL samples plus a ``<stem>.meta.json`` with instances and feature config."""
    path = Path(path)
    with open(path, "w") as fh:
        for s, h in zip(ds.samples, ds.decision_features):
            rec = {"instance_id": s.instance_id, "x": s.x.tolist(), "F": s.F, "f": s.f,
                   "h_features": h.tolist(), "split": s.split}
            fh.write(json.dumps(rec) + "\n")
    static = [features_static(inst, ds.config.use_greedy_features).tolist() for inst in ds.instances]
    meta = {"kind": ds.kind, "feature_config": ds.config.to_dict(),
            "instances": [P.to_dict(inst) for inst in ds.instances], "static_features": static}
    with open(_meta_path(path), "w") as fh:
        json.dump(meta, fh)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(_meta_path(path)) as fh:
        meta = json.load(fh)
    samples, dec = [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            r = json.loads(line)
            samples.append(Sample(r["instance_id"], np.array(r["x"], dtype=float), r["F"], r["f"], r["split"]))
            dec.append(np.array(r["h_features"], dtype=float))
    return Dataset(meta["kind"], [P.from_dict(d) for d in meta["instances"]], samples,
                   FeatureConfig.from_dict(meta["feature_config"]), dec)
