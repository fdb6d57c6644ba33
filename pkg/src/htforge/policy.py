"""Candidate scoring policy: featurization, a small MLP, ranking, training.

The feature vector concatenates 16 cone-summary components with 12
template-encoding components (see ``featurize``). The network is a plain
28-32-32-2 perceptron with rectified hidden units and per-head sigmoids;
head 0 estimates acceptance odds, head 1 a stealth score. Training is
deterministic minibatch SGD: logistic loss on the acceptance head against
accepted-vs-failed outcomes, squared loss on the stealth head against the
stealth proxy label.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .miner import ConeMeta
from .templates import (
    PAYLOAD_FAMILIES,
    TRIGGER_FAMILIES,
    TemplateDescriptor,
    TemplateParams,
)

FEATURE_DIM = 28
FEATURE_VERSION = 1
LAYER_SIZES = (28, 32, 32, 2)
OUTCOMES = ("accepted", "failed_equivalence", "failed_scan", "failed_budget")

_DEPTH_CAP = 16.0
_EPS = 1e-12


def _norm_depth(d: int) -> float:
    if d < 0:
        return 1.0
    return min(d, _DEPTH_CAP) / _DEPTH_CAP


def featurize(
    meta: ConeMeta,
    d: TemplateDescriptor,
    params: TemplateParams | None = None,
) -> np.ndarray:
    """Deterministic 28-component float vector for one (cone, template) pair."""
    p = params or d.params
    rec = meta.reconv_descriptors
    fan = meta.fan_stats
    if meta.rarity_stats is not None:
        pct_min, pct_med, pct_max = meta.rarity_stats
    else:
        pct_min = pct_med = pct_max = 0.0
    sub = [
        pct_min / 100.0,
        pct_med / 100.0,
        pct_max / 100.0,
        math.log(meta.size) / math.log(512.0),
        _norm_depth(meta.depth_to_interface),
        _norm_depth(meta.depth_to_register),
        rec["overlap_max"],
        rec["overlap_mean"],
        rec["disjointness_mean"],
        math.log1p(meta.boundary_in_count) / math.log1p(64.0),
        math.log1p(meta.boundary_out_count) / math.log1p(64.0),
        min(fan["fanin_mean"], 8.0) / 8.0,
        min(fan["fanin_max"], 16.0) / 16.0,
        math.log1p(fan["fanout_mean"]) / math.log1p(16.0),
        math.log1p(fan["fanout_max"]) / math.log1p(64.0),
        1.0 if meta.truncated else 0.0,
    ]
    trig = [1.0 if d.trigger_family == f else 0.0 for f in TRIGGER_FAMILIES]
    pay = [1.0 if d.payload_family == f else 0.0 for f in PAYLOAD_FAMILIES]
    tmpl = trig + pay + [
        (p.tap_count - 2) / 6.0,
        (p.local_depth - 1) / 5.0,
    ]
    fv = np.array(sub + tmpl, dtype=np.float64)
    assert fv.shape == (FEATURE_DIM,)
    if not np.all(np.isfinite(fv)):
        raise ValueError("non-finite feature component")
    return fv


def stealth_proxy(meta: ConeMeta) -> float:
    """Label standing in for detector hardness: rarity plus reconvergence."""
    anchor = (meta.anchor_pct or 0.0) / 100.0
    return 0.5 * anchor + 0.5 * meta.reconv_descriptors["overlap_max"]


@dataclass
class PolicyNet:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    version: int = FEATURE_VERSION

    @classmethod
    def zeros(cls) -> "PolicyNet":
        d0, d1, d2, d3 = LAYER_SIZES
        return cls(
            w1=np.zeros((d0, d1)), b1=np.zeros(d1),
            w2=np.zeros((d1, d2)), b2=np.zeros(d2),
            w3=np.zeros((d2, d3)), b3=np.zeros(d3),
        )

    @classmethod
    def init(cls, seed: int) -> "PolicyNet":
        rng = np.random.default_rng(seed)
        d0, d1, d2, d3 = LAYER_SIZES
        scale = lambda fan_in: 1.0 / math.sqrt(fan_in)
        return cls(
            w1=rng.normal(0.0, scale(d0), (d0, d1)),
            b1=np.zeros(d1),
            w2=rng.normal(0.0, scale(d1), (d1, d2)),
            b2=np.zeros(d2),
            w3=rng.normal(0.0, scale(d2), (d2, d3)),
            b3=np.zeros(d3),
        )

    def copy(self) -> "PolicyNet":
        return PolicyNet(
            self.w1.copy(), self.b1.copy(), self.w2.copy(),
            self.b2.copy(), self.w3.copy(), self.b3.copy(), self.version,
        )

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(p: PolicyNet, x: np.ndarray):
    h1 = np.maximum(x @ p.w1 + p.b1, 0.0)
    h2 = np.maximum(h1 @ p.w2 + p.b2, 0.0)
    z = h2 @ p.w3 + p.b3
    return z, h1, h2


def score(p: PolicyNet, fv: np.ndarray) -> tuple[float, float]:
    """(acceptance, stealth) for one feature vector, both in (0, 1)."""
    fv = np.asarray(fv, dtype=np.float64)
    if fv.shape != (FEATURE_DIM,):
        raise ValueError(f"feature vector shape {fv.shape} != ({FEATURE_DIM},)")
    z, _, _ = _forward(p, fv[None, :])
    s = np.clip(_sigmoid(z[0]), _EPS, 1.0 - _EPS)
    return float(s[0]), float(s[1])


def score_many(p: PolicyNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z, _, _ = _forward(p, x)
    return np.clip(_sigmoid(z), _EPS, 1.0 - _EPS)


def rank(
    candidates: list[tuple[str, tuple[float, float]]],
    weights: tuple[float, float] = (0.5, 0.5),
) -> list[str]:
    """IDs ordered by descending weighted score; equal scores by id."""
    w_a, w_s = weights
    if w_a < 0 or w_s < 0 or w_a + w_s <= 0:
        raise ValueError(f"bad ranking weights {weights}")
    keyed = [
        (-(w_a * acc + w_s * st), cid) for cid, (acc, st) in candidates
    ]
    return [cid for _, cid in sorted(keyed)]


@dataclass
class HistoryRecord:
    features: tuple[float, ...]
    outcome: str
    stealth_label: float
    candidate_id: str = ""

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "features": list(self.features),
                "outcome": self.outcome,
                "stealth_label": self.stealth_label,
                "candidate_id": self.candidate_id,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "HistoryRecord":
        obj = json.loads(line)
        return cls(
            features=tuple(obj["features"]),
            outcome=obj["outcome"],
            stealth_label=float(obj["stealth_label"]),
            candidate_id=obj.get("candidate_id", ""),
        )


def history_append(path: str, records: list[HistoryRecord]) -> None:
    with open(path, "a", encoding="utf-8") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def history_load(path: str) -> list[HistoryRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(HistoryRecord.from_json(line))
    return out


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0


def _batch_arrays(history: list[HistoryRecord]):
    x = np.array([r.features for r in history], dtype=np.float64)
    y_acc = np.array(
        [1.0 if r.outcome == "accepted" else 0.0 for r in history]
    )
    y_st = np.array([r.stealth_label for r in history], dtype=np.float64)
    return x, y_acc, y_st


def loss_and_grads(p: PolicyNet, x, y_acc, y_st):
    """Mean (logistic + squared) loss and its analytic parameter gradients."""
    n = x.shape[0]
    z, h1, h2 = _forward(p, x)
    z_a, z_s = z[:, 0], z[:, 1]
    s_s = _sigmoid(z_s)
    bce = np.logaddexp(0.0, z_a) - y_acc * z_a
    mse = (s_s - y_st) ** 2
    loss = float(np.mean(bce + mse))

    dz = np.empty_like(z)
    dz[:, 0] = (_sigmoid(z_a) - y_acc) / n
    dz[:, 1] = 2.0 * (s_s - y_st) * s_s * (1.0 - s_s) / n
    dw3 = h2.T @ dz
    db3 = dz.sum(axis=0)
    dh2 = dz @ p.w3.T
    dh2[h2 <= 0.0] = 0.0
    dw2 = h1.T @ dh2
    db2 = dh2.sum(axis=0)
    dh1 = dh2 @ p.w2.T
    dh1[h1 <= 0.0] = 0.0
    dw1 = x.T @ dh1
    db1 = dh1.sum(axis=0)
    return loss, [dw1, db1, dw2, db2, dw3, db3]


def dataset_loss(p: PolicyNet, history: list[HistoryRecord]) -> float:
    x, y_acc, y_st = _batch_arrays(history)
    loss, _ = loss_and_grads(p, x, y_acc, y_st)
    return loss


def train(
    p: PolicyNet, history: list[HistoryRecord], hyper: TrainConfig
) -> PolicyNet:
    """SGD-train a copy of ``p``; deterministic in (p, history, hyper)."""
    if not history:
        raise ValueError("empty history")
    labels = {r.outcome == "accepted" for r in history}
    if len(labels) < 2:
        raise ValueError(
            "history contains a single acceptance class; "
            "need both accepted and failed records"
        )
    x, y_acc, y_st = _batch_arrays(history)
    net = p.copy()
    rng = np.random.default_rng(hyper.seed)
    n = x.shape[0]
    initial = dataset_loss(net, history)
    for _ in range(hyper.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = perm[start : start + hyper.batch_size]
            _, grads = loss_and_grads(net, x[idx], y_acc[idx], y_st[idx])
            for w, g in zip(net.params(), grads):
                w -= hyper.learning_rate * g
    final = dataset_loss(net, history)
    if final > initial + 1e-12:
        raise RuntimeError(
            f"training diverged: loss {initial:.6f} -> {final:.6f}; "
            "lower the learning rate"
        )
    return net


def save_weights(p: PolicyNet, path: str) -> None:
    obj = {
        "format_version": 1,
        "feature_version": p.version,
        "layer_sizes": list(LAYER_SIZES),
        "arrays": {
            "w1": p.w1.tolist(), "b1": p.b1.tolist(),
            "w2": p.w2.tolist(), "b2": p.b2.tolist(),
            "w3": p.w3.tolist(), "b3": p.b3.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True)
        f.write("\n")


def load_weights(path: str) -> PolicyNet:
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    if tuple(obj["layer_sizes"]) != LAYER_SIZES:
        raise ValueError(f"unexpected layer sizes {obj['layer_sizes']}")
    a = obj["arrays"]
    return PolicyNet(
        w1=np.array(a["w1"]), b1=np.array(a["b1"]),
        w2=np.array(a["w2"]), b2=np.array(a["b2"]),
        w3=np.array(a["w3"]), b3=np.array(a["b3"]),
        version=obj.get("feature_version", FEATURE_VERSION),
    )
