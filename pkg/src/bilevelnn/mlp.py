"""Set-based value-function regressor.

Per-variable static features go through a shared encoder, are sum-pooled and
encoded again into an instance embedding. Each variable's decision features
are concatenated with that embedding and mapped to one scalar by a shared
value head; the prediction is the dot product of those scalars with known
objective coefficients. For interdiction instances the value-head input is
multiplied by (1 - x_i).

Everything is plain numpy with hand-written gradients.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SUBNETS = ("d", "s", "v")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 0.01
    max_epochs: int = 1000
    patience: int = 200
    seed: int = 0
    hidden: tuple = (16, 16, 16)  # psi_d, psi_s, psi_v
    embed_dim: int = 16  # per-variable static embedding
    instance_dim: int = 8
    label_scaling: str = "scale"  # none | scale | standardize

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be nonnegative")
        if min(self.batch_size, self.patience, self.embed_dim, self.instance_dim, *self.hidden) <= 0:
            raise ValueError("sizes and patience must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.label_scaling not in ("none", "scale", "standardize"):
            raise ValueError(f"unknown label scaling {self.label_scaling!r}")


@dataclass
class SetNetwork:
    params: dict
    kind: str
    target: str  # upper | lower
    mask: bool
    feature_config: dict = field(default_factory=dict)
    label_offset: float = 0.0
    label_scale: float = 1.0

    @property
    def static_dim(self) -> int:
        return self.params["d.W1"].shape[1]

    @property
    def decision_dim(self) -> int:
        # columns of h(x_i): static features plus decision-dependent columns
        return self.params["v.W1"].shape[1] - self.params["s.W2"].shape[0]

    def psi_layers(self, name: str) -> list:
        p = self.params
        return [(p[f"{name}.W1"], p[f"{name}.b1"]), (p[f"{name}.W2"], p[f"{name}.b2"])]

    def copy(self) -> "SetNetwork":
        return copy.deepcopy(self)


@dataclass
class ArrayData:
    """Model-ready arrays. ``static`` is per instance; the rest per sample."""

    static: np.ndarray  # (n_inst, n, Fs), already normalized
    coeffs: np.ndarray  # (n_inst, n)
    inst_idx: np.ndarray  # (N,)
    decision: np.ndarray  # (N, n, Fd) decision-dependent columns, column 0 is x_i
    labels: np.ndarray  # (N,)

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "ArrayData":
        return ArrayData(self.static, self.coeffs, self.inst_idx[idx], self.decision[idx], self.labels[idx])


@dataclass
class TrainReport:
    train_loss: list
    val_mae: list
    best_val_mae: float
    best_epoch: int
    mal: float
    epochs_run: int
    stopped_early: bool
    degenerate: bool = False


def _init_dense(rng, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, (fan_out, fan_in)), rng.uniform(-bound, bound, fan_out)


def init_network(static_dim: int, decision_cols: int, cfg: TrainConfig, kind: str, target: str,
                 feature_config: dict | None = None, rng=None) -> SetNetwork:
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    hd, hs, hv = cfg.hidden
    dims = {
        "d": (static_dim, hd, cfg.embed_dim),
        "s": (cfg.embed_dim, hs, cfg.instance_dim),
        "v": (static_dim + decision_cols + cfg.instance_dim, hv, 1),
    }
    params = {}
    for name in SUBNETS:
        i, h, o = dims[name]
        params[f"{name}.W1"], params[f"{name}.b1"] = _init_dense(rng, i, h)
        params[f"{name}.W2"], params[f"{name}.b2"] = _init_dense(rng, h, o)
    return SetNetwork(params, kind, target, kind == "kip", dict(feature_config or {}))


def _relu(a):
    return np.maximum(a, 0.0)


def instance_embedding(net: SetNetwork, static: np.ndarray) -> np.ndarray:
    """Embedding of one instance from its (n, Fs) normalized static features."""
    p = net.params
    e = _relu(static @ p["d.W1"].T + p["d.b1"]) @ p["d.W2"].T + p["d.b2"]
    h = _relu(e.sum(axis=0) @ p["s.W1"].T + p["s.b1"])
    return h @ p["s.W2"].T + p["s.b2"]


def value_head(net: SetNetwork, V: np.ndarray) -> np.ndarray:
    """Per-variable scalar outputs for value-head inputs ``V`` (..., F)."""
    p = net.params
    return (_relu(V @ p["v.W1"].T + p["v.b1"]) @ p["v.W2"].T + p["v.b2"])[..., 0]


def _forward(params, net, S, D, C, cache=False):
    # S (B,n,Fs)  D (B,n,Fd)  C (B,n)
    a1 = S @ params["d.W1"].T + params["d.b1"]
    h1 = _relu(a1)
    e = h1 @ params["d.W2"].T + params["d.b2"]
    pooled = e.sum(axis=1)
    a2 = pooled @ params["s.W1"].T + params["s.b1"]
    h2 = _relu(a2)
    emb = h2 @ params["s.W2"].T + params["s.b2"]
    B, n, _ = S.shape
    V = np.concatenate([S, D, np.broadcast_to(emb[:, None, :], (B, n, emb.shape[1]))], axis=2)
    M = (1.0 - D[:, :, 0]) if net.mask else np.ones((B, n))
    Vm = V * M[:, :, None]
    a3 = Vm @ params["v.W1"].T + params["v.b1"]
    h3 = _relu(a3)
    out = (h3 @ params["v.W2"].T + params["v.b2"])[..., 0]
    raw = (C * out).sum(axis=1)
    pred = net.label_offset + net.label_scale * raw
    if not cache:
        return pred
    return pred, dict(S=S, a1=a1, h1=h1, pooled=pooled, a2=a2, h2=h2,
                      Vm=Vm, M=M, a3=a3, h3=h3, C=C, Fs=S.shape[2] + D.shape[2])


def _backward(params, net, cache, g_pred):
    g = {}
    g_out = (g_pred * net.label_scale)[:, None] * cache["C"]  # (B,n)
    h3 = cache["h3"]
    g["v.W2"] = np.einsum("bn,bnh->h", g_out, h3)[None, :]
    g["v.b2"] = np.array([g_out.sum()])
    g_a3 = g_out[:, :, None] * params["v.W2"][0] * (cache["a3"] > 0)
    g["v.W1"] = np.einsum("bnh,bnf->hf", g_a3, cache["Vm"])
    g["v.b1"] = g_a3.sum(axis=(0, 1))
    g_V = (g_a3 @ params["v.W1"]) * cache["M"][:, :, None]
    g_emb = g_V[:, :, cache["Fs"]:].sum(axis=1)
    g["s.W2"] = g_emb.T @ cache["h2"]
    g["s.b2"] = g_emb.sum(axis=0)
    g_a2 = (g_emb @ params["s.W2"]) * (cache["a2"] > 0)
    g["s.W1"] = g_a2.T @ cache["pooled"]
    g["s.b1"] = g_a2.sum(axis=0)
    g_pooled = g_a2 @ params["s.W1"]  # (B,m), broadcast to every variable
    g["d.W2"] = np.einsum("bm,bnh->mh", g_pooled, cache["h1"])
    g["d.b2"] = g_pooled.sum(axis=0) * cache["h1"].shape[1]
    g_a1 = (g_pooled @ params["d.W2"])[:, None, :] * (cache["a1"] > 0)
    g["d.W1"] = np.einsum("bnh,bnf->hf", g_a1, cache["S"])
    g["d.b1"] = g_a1.sum(axis=(0, 1))
    return g


def _batch(data: ArrayData, idx):
    ii = data.inst_idx[idx]
    return data.static[ii], data.decision[idx], data.coeffs[ii]


def predict(net: SetNetwork, data: ArrayData, chunk: int = 4096) -> np.ndarray:
    out = np.empty(len(data))
    for s in range(0, len(data), chunk):
        idx = np.arange(s, min(s + chunk, len(data)))
        out[idx] = _forward(net.params, net, *_batch(data, idx))
    return out


def forward(net: SetNetwork, static, decision, coeffs) -> float:
    """Prediction for one instance/decision.

    ``static`` is (n, Fs) normalized static features, ``decision`` the (n, Fd)
    decision-dependent columns (column 0 holds x_i), ``coeffs`` the objective
    coefficients used in the final dot product.
    """
    static = np.asarray(static, dtype=float)
    decision = np.asarray(decision, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if static.shape[1] != net.static_dim or static.shape[1] + decision.shape[1] != net.decision_dim:
        raise ValueError("feature dimensions do not match the network")
    if not (static.shape[0] == decision.shape[0] == coeffs.shape[0]):
        raise ValueError("static features, decision features and coefficients disagree on n")
    return float(_forward(net.params, net, static[None], decision[None], coeffs[None])[0])


def loss_and_grad(net: SetNetwork, data: ArrayData, idx=None):
    """Mean squared error over ``idx`` and its gradient w.r.t. every parameter."""
    idx = np.arange(len(data)) if idx is None else np.asarray(idx)
    S, D, C = _batch(data, idx)
    pred, cache = _forward(net.params, net, S, D, C, cache=True)
    err = pred - data.labels[idx]
    loss = float(np.mean(err ** 2))
    grads = _backward(net.params, net, cache, 2.0 * err / len(idx))
    return loss, grads


def prediction_grad(net: SetNetwork, data: ArrayData, idx=None):
    """Sum of predictions over ``idx`` and its gradient w.r.t. every parameter."""
    idx = np.arange(len(data)) if idx is None else np.asarray(idx)
    S, D, C = _batch(data, idx)
    pred, cache = _forward(net.params, net, S, D, C, cache=True)
    return float(pred.sum()), _backward(net.params, net, cache, np.ones(len(idx)))


def evaluate_regressor(net: SetNetwork, data: ArrayData):
    """(mean absolute error, mean absolute label)."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    pred = predict(net, data)
    return float(np.mean(np.abs(pred - data.labels))), float(np.mean(np.abs(data.labels)))


def _label_scaling(labels, mode):
    if mode == "none" or len(labels) < 2:
        return 0.0, 1.0
    std = float(np.std(labels))
    std = std if std > 1e-12 else 1.0
    if mode == "scale":
        return 0.0, std
    return float(np.mean(labels)), std


def train(train_data: ArrayData, val_data: ArrayData, cfg: TrainConfig, kind: str, target: str,
          feature_config: dict | None = None, net: SetNetwork | None = None):
    """Adam on mean squared error; keeps the weights with the best validation MAE."""
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("training and validation splits must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    if net is None:
        net = init_network(train_data.static.shape[2], train_data.decision.shape[2], cfg, kind, target,
                           feature_config, rng)
        net.label_offset, net.label_scale = _label_scaling(train_data.labels, cfg.label_scaling)
    m = {k: np.zeros_like(v) for k, v in net.params.items()}
    v = {k: np.zeros_like(v) for k, v in net.params.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_mae, mal = evaluate_regressor(net, val_data)
    best = net.copy()
    best_epoch = 0
    losses, maes = [], [best_mae]
    stopped = False
    epoch = 0
    N = len(train_data)
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(N)
        total = 0.0
        for s in range(0, N, cfg.batch_size):
            idx = perm[s: s + cfg.batch_size]
            loss, grads = loss_and_grad(net, train_data, idx)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch starting {s}: {loss}")
            total += loss * len(idx)
            step += 1
            for k, gk in grads.items():
                m[k] = b1 * m[k] + (1 - b1) * gk
                v[k] = b2 * v[k] + (1 - b2) * gk * gk
                mhat = m[k] / (1 - b1 ** step)
                vhat = v[k] / (1 - b2 ** step)
                net.params[k] = net.params[k] - cfg.lr * mhat / (np.sqrt(vhat) + eps)
        losses.append(total / N)
        mae, _ = evaluate_regressor(net, val_data)
        maes.append(mae)
        if mae < best_mae:
            best_mae, best_epoch, best = mae, epoch, net.copy()
        elif epoch - best_epoch >= cfg.patience:
            stopped = True
            break
        if epoch % 50 == 0:
            log.info("epoch %d loss %.4g val MAE %.4g (best %.4g)", epoch, losses[-1], mae, best_mae)
    report = TrainReport(losses, maes, best_mae, best_epoch, mal, epoch if cfg.max_epochs else 0, stopped,
                         degenerate=best_epoch == 0 and cfg.max_epochs > 0)
    return best, report


def to_dict(net: SetNetwork) -> dict:
    return {
        "kind": net.kind,
        "target": net.target,
        "mask": net.mask,
        "label_offset": net.label_offset,
        "label_scale": net.label_scale,
        "feature_config": net.feature_config,
        "layers": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in net.params.items()},
    }


def from_dict(d: dict) -> SetNetwork:
    params = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["layers"].items()}
    return SetNetwork(params, d["kind"], d["target"], d["mask"], d.get("feature_config", {}),
                      d["label_offset"], d["label_scale"])


def save_network(net: SetNetwork, path):
    with open(path, "w") as fh:
        json.dump(to_dict(net), fh)
        fh.write("\n")


def load_network(path) -> SetNetwork:
    with open(path) as fh:
        return from_dict(json.load(fh))
