"""One-class color mixture model with outlier filtering.

Training pipeline: for each annotated sample region, compute its own
circular mean/covariance, drop pixels whose Mahalanobis distance to that
per-sample distribution exceeds tau, pool the survivors across samples
and fit an M-component Gaussian mixture by EM.  All means are circular
in hue and all point-to-mean differences use the wrapped hue delta.

Scoring: a pixel's log-likelihood is the weight-averaged per-component
log density (the sum over components of phi_c * log N_c).  That differs
from the conventional log of the mixture density; the conventional form
is available behind ``standard_mixture_loglik`` for comparison.  A
region's score is the mean of exp(pixel log-likelihood) over its pixels,
and and/or query nodes combine garment log scores by sum/max.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import logsumexp

from . import colorstats as cs
from .colorstats import DegenerateInputError
from .query import Leaf, And, Or, QueryAst

LOG_NORM_3D = -1.5 * math.log(2.0 * math.pi)  # log((2*pi)^(-3/2))

MIN_WEIGHT = 1e-4  # components below this weight are dropped


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    """Mahalanobis filtering threshold; tau=inf disables filtering."""

    tau: float = 2.0

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class EmConfig:
    n_components: int = 2
    max_iters: int = 200
    tol: float = 1e-7
    restarts: int = 5
    seed: int = 0
    standard_mixture_loglik: bool = False

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")


@dataclass(frozen=True)
class Component:
    weight: float
    mean: cs.HsvPixel
    cov: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ColorModel:
    label: str
    garment: str
    components: tuple[Component, ...]
    provenance: dict = field(default_factory=dict)
    standard_mixture_loglik: bool = False

    @property
    def n_components(self) -> int:
        return len(self.components)


def filter_outliers(pixels, cfg: FilterConfig) -> np.ndarray:
    """Keep pixels within tau Mahalanobis units of the sample's own moments.

    Moments come from the unfiltered sample, once; there is no iterative
    re-filtering.  Raises if every pixel is filtered out.
    """
    arr = cs.pixels_to_array(pixels)
    if arr.shape[0] == 0:
        raise DegenerateInputError("cannot filter an empty region")
    if math.isinf(cfg.tau):
        return arr
    mom = cs.circular_moments(arr)
    dist = cs.mahalanobis_many(arr, mom.mean.as_array(), mom.cov)
    kept = arr[dist < cfg.tau]
    if kept.shape[0] == 0:
        raise TrainingError(f"sample degenerate under tau={cfg.tau}")
    return kept


def _component_log_densities(arr: np.ndarray, model: ColorModel) -> np.ndarray:
    """(n, C) matrix of per-component Gaussian log densities."""
    n = arr.shape[0]
    out = np.empty((n, model.n_components))
    for c, comp in enumerate(model.components):
        cov = cs.regularize(comp.cov)
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            raise np.linalg.LinAlgError("covariance not positive definite")
        d2 = cs.mahalanobis_many(arr, comp.mean.as_array(), comp.cov) ** 2
        out[:, c] = LOG_NORM_3D - 0.5 * logdet - 0.5 * d2
    return out


def pixel_loglik_many(arr: np.ndarray, model: ColorModel) -> np.ndarray:
    logn = _component_log_densities(arr, model)
    w = np.array([c.weight for c in model.components])
    if model.standard_mixture_loglik:
        return logsumexp(logn + np.log(w), axis=1)
    return logn @ w


def pixel_loglik(p: cs.HsvPixel, model: ColorModel) -> float:
    return float(pixel_loglik_many(p.as_array()[None, :], model)[0])


def region_score(pixels, model: ColorModel) -> float:
    """Mean over pixels of exp(pixel log-likelihood); in (0, inf)."""
    arr = cs.pixels_to_array(pixels)
    if arr.shape[0] == 0:
        raise DegenerateInputError("cannot score an empty region")
    return float(np.mean(np.exp(pixel_loglik_many(arr, model))))


def combine(query: QueryAst, scores: dict[Leaf, float]) -> float:
    """Ranking key: leaves map to log score, "and" sums, "or" takes max."""
    if isinstance(query, Leaf):
        if query not in scores:
            raise KeyError(f"no score for leaf {query}")
        return math.log(scores[query])
    vals = [combine(c, scores) for c in query.children]
    if isinstance(query, And):
        return float(sum(vals))
    if isinstance(query, Or):
        return max(vals)
    raise TypeError(f"unknown query node {query!r}")


# --- EM fitting ---------------------------------------------------------


def _embed(arr: np.ndarray) -> np.ndarray:
    """Unit-circle hue embedding used only for seeding."""
    return np.column_stack(
        [np.cos(arr[:, 0]), np.sin(arr[:, 0]), arr[:, 1] / 100.0, arr[:, 2] / 100.0]
    )


def _kmeanspp_seed(emb: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ center indices on the embedded points."""
    n = emb.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((emb - emb[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx.append(int(rng.integers(n)))
            continue
        idx.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((emb - emb[idx[-1]]) ** 2, axis=1))
    return np.array(idx)


def _mixture_loglik(arr: np.ndarray, comps: list[Component]) -> float:
    """Standard mixture log-likelihood; the EM monotonicity objective."""
    model = ColorModel("", "upper", tuple(comps), standard_mixture_loglik=True)
    return float(np.sum(pixel_loglik_many(arr, model)))


def _em_run(arr: np.ndarray, cfg: EmConfig, rng: np.random.Generator):
    n = arr.shape[0]
    k = min(cfg.n_components, n)
    emb = _embed(arr)
    centers = emb[_kmeanspp_seed(emb, k, rng)]
    assign = np.argmin(
        ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    resp = np.full((n, k), 1e-3)
    resp[np.arange(n), assign] = 1.0
    resp /= resp.sum(axis=1, keepdims=True)

    comps: list[Component] = []
    trace: list[float] = []
    prev = -np.inf
    for _ in range(cfg.max_iters):
        # M-step: weighted circular moments per component
        new_comps = []
        nk = resp.sum(axis=0)
        for c in range(resp.shape[1]):
            if nk[c] <= 0.0:
                continue
            mom = cs.weighted_circular_moments(arr, resp[:, c])
            new_comps.append(Component(weight=float(nk[c] / n), mean=mom.mean, cov=mom.cov))
        new_comps = [c for c in new_comps if c.weight >= MIN_WEIGHT]
        if not new_comps:
            raise TrainingError("all mixture components collapsed")
        wsum = sum(c.weight for c in new_comps)
        new_comps = [
            Component(c.weight / wsum, c.mean, c.cov) for c in new_comps
        ]
        ll = _mixture_loglik(arr, new_comps)
        if trace and ll < prev - 1e-9:
            # circular M-step is only approximately the maximizer; stop
            # rather than record a decreasing objective
            break
        comps = new_comps
        trace.append(ll)
        if trace[:-1] and abs(ll - prev) <= cfg.tol * max(1.0, abs(prev)):
            prev = ll
            break
        prev = ll
        # E-step
        model = ColorModel("", "upper", tuple(comps))
        logn = _component_log_densities(arr, model)
        logw = np.log(np.array([c.weight for c in comps]))
        logpost = logn + logw
        logpost -= logsumexp(logpost, axis=1, keepdims=True)
        resp = np.exp(logpost)
    return comps, prev, trace


def _merge_duplicates(comps: list[Component], atol: float = 1e-9) -> list[Component]:
    """Collapse components that converged onto the same Gaussian."""
    merged: list[Component] = []
    for comp in comps:
        for i, kept in enumerate(merged):
            same_mean = (
                abs(float(cs.hue_delta(comp.mean.h, kept.mean.h))) < atol
                and abs(comp.mean.s - kept.mean.s) < atol
                and abs(comp.mean.v - kept.mean.v) < atol
            )
            if same_mean and np.allclose(comp.cov, kept.cov, atol=atol):
                merged[i] = Component(kept.weight + comp.weight, kept.mean, kept.cov)
                break
        else:
            merged.append(comp)
    return merged


def train(
    regions,
    filter_cfg: FilterConfig | None = None,
    em_cfg: EmConfig | None = None,
    label: str = "",
    garment: str = "upper",
    provenance: dict | None = None,
) -> ColorModel:
    """Fit a ColorModel from positive sample regions only.

    ``regions`` is an iterable of pixel sets (lists of HsvPixel or (n, 3)
    arrays).  Each region is outlier-filtered against its own moments,
    the survivors are pooled, and the best of ``restarts`` EM runs by
    training log-likelihood wins.
    """
    filter_cfg = filter_cfg or FilterConfig()
    em_cfg = em_cfg or EmConfig()
    filtered = []
    for region in regions:
        try:
            filtered.append(filter_outliers(region, filter_cfg))
        except TrainingError:
            continue
    if not filtered:
        raise TrainingError("no region survives outlier filtering")
    arr = np.vstack(filtered)
    if arr.shape[0] < em_cfg.n_components:
        raise TrainingError(
            f"{arr.shape[0]} pixels cannot support {em_cfg.n_components} components"
        )
    rng = np.random.default_rng(em_cfg.seed)
    best = None
    best_ll = -np.inf
    for _ in range(max(1, em_cfg.restarts)):
        comps, ll, _ = _em_run(arr, em_cfg, rng)
        if ll > best_ll:
            best, best_ll = comps, ll
    best = _merge_duplicates(best)
    prov = dict(provenance or {})
    prov.setdefault("tau", filter_cfg.tau)
    prov.setdefault("n_components", em_cfg.n_components)
    prov.setdefault("seed", em_cfg.seed)
    return ColorModel(
        label=label,
        garment=garment,
        components=tuple(best),
        provenance=prov,
        standard_mixture_loglik=em_cfg.standard_mixture_loglik,
    )


# --- persistence --------------------------------------------------------


def to_json_dict(model: ColorModel) -> dict:
    doc = {
        "kind": "color_mixture",
        "label": model.label,
        "garment": model.garment,
        "standard_mixture_loglik": model.standard_mixture_loglik,
        "components": [
            {
                "weight": comp.weight,
                "mean": [comp.mean.h, comp.mean.s, comp.mean.v],
                "cov": [float(x) for x in comp.cov.reshape(-1)],
            }
            for comp in model.components
        ],
        "provenance": model.provenance,
    }
    doc["config_hash"] = hashlib.sha256(
        json.dumps(doc["provenance"], sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    return doc


def save(model: ColorModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(model), fh, indent=1, sort_keys=True)


def from_json_dict(doc: dict) -> ColorModel:
    comps = tuple(
        Component(
            weight=float(c["weight"]),
            mean=cs.HsvPixel(*c["mean"]),
            cov=np.array(c["cov"], dtype=np.float64).reshape(3, 3),
        )
        for c in doc["components"]
    )
    return ColorModel(
        label=doc["label"],
        garment=doc["garment"],
        components=comps,
        provenance=doc.get("provenance", {}),
        standard_mixture_loglik=bool(doc.get("standard_mixture_loglik", False)),
    )


def load(path) -> ColorModel:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))
