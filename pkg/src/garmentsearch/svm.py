"""Discriminative baseline: soft-margin SVM over HSV pixels.

The kernel is an RBF on the circular HSV distance,
k(p, q) = exp(-gamma * ||hsv_distance(p, q)||^2), trained by sequential
minimal optimization with an error cache.  Decision values are mapped to
probabilities with a two-parameter sigmoid fitted by maximum likelihood
on the training decision values (with the usual prior-corrected targets).
A region's retrieval score is the mean calibrated probability of its
pixels.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import colorstats as cs


@dataclass(frozen=True)
class SvmConfig:
    gamma: float = 0.01
    cost: float = 1.0
    kkt_tol: float = 1e-3
    max_passes: int = 200
    pixel_cap: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0 or self.cost <= 0:
            raise ValueError("gamma and cost must be positive")


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray = field(repr=False)  # (m, 3) hsv rows
    dual_coef: np.ndarray = field(repr=False)  # alpha_i * y_i
    bias: float = 0.0
    calib_a: float = -1.0
    calib_b: float = 0.0
    config: SvmConfig = field(default_factory=SvmConfig)
    converged: bool = True
    provenance: dict = field(default_factory=dict)

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]


def pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared circular HSV distance between every row of a and of b."""
    dh = cs.hue_delta(a[:, 0][:, None], b[:, 0][None, :])
    ds = a[:, 1][:, None] - b[:, 1][None, :]
    dv = a[:, 2][:, None] - b[:, 2][None, :]
    return dh * dh + ds * ds + dv * dv


def kernel_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * pairwise_sq_dist(a, b))


def subsample(arr: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if arr.shape[0] <= cap:
        return arr
    return arr[rng.choice(arr.shape[0], size=cap, replace=False)]


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_passes: int):
    """SMO with most-violating-pair working-set selection.

    Optimality holds when max g over the "b >= g" set is within tol of
    min g over the "b <= g" set, with g_i = y_i - f_i.  Each iteration
    takes the analytic two-variable step on the most violating pair.
    The selection is symmetric under a global label flip, so swapping
    classes negates the decision function exactly.

    Returns (alpha, b, converged); max_passes * n pair updates allowed.
    """
    n = K.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)  # sum_j alpha_j y_j K_ij, no bias
    pos = y > 0
    max_iters = max_passes * n
    converged = False
    g_i = g_j = 0.0
    for _ in range(max_iters):
        g = y - f
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        gu = np.where(up, g, -np.inf)
        gl = np.where(low, g, np.inf)
        i = int(np.argmax(gu))
        j = int(np.argmin(gl))
        g_i, g_j = g[i], g[j]
        if g_i - g_j < tol:
            converged = True
            break
        yi, yj = y[i], y[j]
        s = yi * yj
        ai, aj = alpha[i], alpha[j]
        if s > 0:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        else:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 1e-12 or hi - lo < 1e-15:
            break  # degenerate pair; cannot make progress
        # unconstrained minimizer along the pair direction
        aj_new = min(hi, max(lo, aj + yj * (g_j - g_i) / eta))
        if aj_new == aj:
            break
        ai_new = ai + s * (aj - aj_new)
        # snap to the box; values a float-epsilon inside a bound would
        # keep the pair selectable without any representable step left
        snap = 1e-11 * C
        if aj_new < snap:
            aj_new = 0.0
        elif aj_new > C - snap:
            aj_new = C
        if ai_new < snap:
            ai_new = 0.0
        elif ai_new > C - snap:
            ai_new = C
        di = yi * (ai_new - ai)
        dj = yj * (aj_new - aj)
        f += di * K[i] + dj * K[j]
        alpha[i], alpha[j] = ai_new, aj_new
    # bias centers the remaining feasibility interval
    b = 0.5 * (g_i + g_j) if np.isfinite(g_i) and np.isfinite(g_j) else 0.0
    return alpha, float(b), converged


def _fit_sigmoid(decision: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Platt scaling: minimize NLL of t against 1/(1+exp(A*f+B))."""
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    for _ in range(100):
        z = a * decision + b
        p = 1.0 / (1.0 + np.exp(z))
        # gradient of sum(-t*log p - (1-t)*log(1-p)) wrt (a, b)
        d = p - t
        g = np.array([-np.sum(d * decision), -np.sum(d)])
        w = p * (1.0 - p)
        h11 = np.sum(w * decision * decision)
        h12 = np.sum(w * decision)
        h22 = np.sum(w)
        H = np.array([[h11, h12], [h12, h22]]) + 1e-12 * np.eye(2)
        step = np.linalg.solve(H, -g)
        a += step[0]
        b += step[1]
        if np.max(np.abs(step)) < 1e-10:
            break
    return float(a), float(b)


def train_svm(pos_regions, neg_regions, cfg: SvmConfig | None = None,
              provenance: dict | None = None) -> SvmModel:
    """Train on pixels of positive vs negative sample regions.

    Each region is capped at ``pixel_cap`` pixels by seeded uniform
    subsampling before pooling.
    """
    cfg = cfg or SvmConfig()
    rng = np.random.default_rng(cfg.seed)
    pos = [subsample(cs.pixels_to_array(r), cfg.pixel_cap, rng) for r in pos_regions]
    neg = [subsample(cs.pixels_to_array(r), cfg.pixel_cap, rng) for r in neg_regions]
    if not pos or not neg:
        raise ValueError("both classes must be non-empty")
    x = np.vstack(pos + neg)
    y = np.concatenate(
        [np.ones(sum(p.shape[0] for p in pos)), -np.ones(sum(n.shape[0] for n in neg))]
    )
    K = kernel_matrix(x, x, cfg.gamma)
    alpha, b, converged = _smo(K, y, cfg.cost, cfg.kkt_tol, cfg.max_passes)
    decision = (alpha * y) @ K + b
    calib_a, calib_b = _fit_sigmoid(decision, y)
    sv = alpha > 1e-9
    return SvmModel(
        support_vectors=x[sv],
        dual_coef=(alpha * y)[sv],
        bias=float(b),
        calib_a=calib_a,
        calib_b=calib_b,
        config=cfg,
        converged=converged,
        provenance=dict(provenance or {}),
    )


def decision_values(pixels, model: SvmModel) -> np.ndarray:
    arr = cs.pixels_to_array(pixels)
    K = kernel_matrix(model.support_vectors, arr, model.config.gamma)
    return model.dual_coef @ K + model.bias


def pixel_probabilities(pixels, model: SvmModel) -> np.ndarray:
    f = decision_values(pixels, model)
    return 1.0 / (1.0 + np.exp(model.calib_a * f + model.calib_b))


def svm_region_score(pixels, model: SvmModel) -> float:
    """Mean calibrated positive-class probability over the region pixels."""
    probs = pixel_probabilities(pixels, model)
    if probs.size == 0:
        raise cs.DegenerateInputError("cannot score an empty region")
    return float(np.mean(probs))


# --- persistence --------------------------------------------------------


def to_json_dict(model: SvmModel) -> dict:
    cfg = {
        "gamma": model.config.gamma,
        "cost": model.config.cost,
        "kkt_tol": model.config.kkt_tol,
        "max_passes": model.config.max_passes,
        "pixel_cap": model.config.pixel_cap,
        "seed": model.config.seed,
    }
    doc = {
        "kind": "svm_rbf",
        "support_vectors": [list(map(float, row)) for row in model.support_vectors],
        "dual_coef": [float(v) for v in model.dual_coef],
        "bias": model.bias,
        "calib_a": model.calib_a,
        "calib_b": model.calib_b,
        "config": cfg,
        "converged": model.converged,
        "provenance": model.provenance,
    }
    doc["config_hash"] = hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()
    ).hexdigest()[:16]
    return doc


def save(model: SvmModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(model), fh, indent=1, sort_keys=True)


def from_json_dict(doc: dict) -> SvmModel:
    return SvmModel(
        support_vectors=np.array(doc["support_vectors"], dtype=np.float64).reshape(-1, 3),
        dual_coef=np.array(doc["dual_coef"], dtype=np.float64),
        bias=float(doc["bias"]),
        calib_a=float(doc["calib_a"]),
        calib_b=float(doc["calib_b"]),
        config=SvmConfig(**doc["config"]),
        converged=bool(doc["converged"]),
        provenance=doc.get("provenance", {}),
    )


def load(path) -> SvmModel:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
