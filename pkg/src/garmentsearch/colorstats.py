"""Circular-hue HSV arithmetic.

Pixels live in HSV with hue as an angle in [0, 2*pi) and saturation/value
in percent [0, 100].  Hue differences are taken on the circle, so means
and covariances need directional statistics; everything downstream (the
mixture model, the SVM kernel, segmentation) is built on the helpers here.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Regularization added to covariances before inversion; uniform-color
# regions produce rank-deficient covariance otherwise.
COV_EPS = 1e-6


class DegenerateInputError(ValueError):
    """Raised when an operation receives an empty or unusable pixel set."""


def wrap_hue(h: float) -> float:
    """Reduce an angle into [0, 2*pi)."""
    h = math.fmod(h, TWO_PI)
    if h < 0.0:
        h += TWO_PI
    if h >= TWO_PI:  # fp rounding of tiny negatives
        h = 0.0
    return h


@dataclass(frozen=True)
class HsvPixel:
    """One HSV pixel: hue in radians [0, 2*pi), s/v in percent [0, 100]."""

    h: float
    s: float
    v: float

    def __post_init__(self):
        if not math.isfinite(self.h):
            raise ValueError(f"hue must be finite, got {self.h}")
        object.__setattr__(self, "h", wrap_hue(self.h))
        object.__setattr__(self, "s", min(100.0, max(0.0, float(self.s))))
        object.__setattr__(self, "v", min(100.0, max(0.0, float(self.v))))

    def as_array(self) -> np.ndarray:
        return np.array([self.h, self.s, self.v], dtype=np.float64)


@dataclass(frozen=True)
class HsvDelta:
    """Signed difference between two pixels; dh is in [-pi, pi)."""

    dh: float
    ds: float
    dv: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dh, self.ds, self.dv], dtype=np.float64)

    def norm(self) -> float:
        return math.sqrt(self.dh * self.dh + self.ds * self.ds + self.dv * self.dv)


@dataclass(frozen=True)
class HsvMoments:
    """Circular mean and covariance of a pixel set."""

    mean: HsvPixel
    cov: np.ndarray = field(repr=False)


def rgb_to_hsv(r: int, g: int, b: int) -> HsvPixel:
    """Standard hexcone conversion, scaled to hue radians and percent s/v.

    Achromatic pixels get hue 0 by convention.
    """
    hh, ss, vv = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
    return HsvPixel(h=hh * TWO_PI, s=ss * 100.0, v=vv * 100.0)


def hue_delta(h: np.ndarray | float, ref: np.ndarray | float):
    """Shortest signed angular difference h - ref, wrapped into [-pi, pi)."""
    return np.mod(np.asarray(h, dtype=np.float64) - ref + math.pi, TWO_PI) - math.pi


def hsv_distance(p: HsvPixel, q: HsvPixel) -> HsvDelta:
    """Component-wise HSV difference p - q with circular hue handling."""
    dh = math.fmod(p.h - q.h + math.pi, TWO_PI)
    if dh < 0.0:
        dh += TWO_PI
    return HsvDelta(dh=dh - math.pi, ds=p.s - q.s, dv=p.v - q.v)


def pixels_to_array(pixels) -> np.ndarray:
    """Accept a list of HsvPixel or an (n, 3) array; return a float array."""
    if isinstance(pixels, np.ndarray):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"expected (n, 3) array, got shape {arr.shape}")
        return arr
    return np.array([[p.h, p.s, p.v] for p in pixels], dtype=np.float64)


def delta_matrix(arr: np.ndarray, center: np.ndarray) -> np.ndarray:
    """(n, 3) matrix of hsv_distance(p_i, center) rows."""
    out = arr - center
    out[:, 0] = hue_delta(arr[:, 0], center[0])
    return out


def circular_moments(pixels) -> HsvMoments:
    """Mean (circular in hue) and covariance of a non-empty pixel set.

    The covariance is the mean outer product of the wrapped deltas
    against the mean, so its hue entries are in squared radians.
    """
    arr = pixels_to_array(pixels)
    n = arr.shape[0]
    if n == 0:
        raise DegenerateInputError("circular_moments of an empty pixel set")
    mean_h = math.atan2(np.mean(np.sin(arr[:, 0])), np.mean(np.cos(arr[:, 0])))
    mean = HsvPixel(h=mean_h, s=float(np.mean(arr[:, 1])), v=float(np.mean(arr[:, 2])))
    d = delta_matrix(arr, mean.as_array())
    cov = d.T @ d / n
    cov = 0.5 * (cov + cov.T)
    return HsvMoments(mean=mean, cov=cov)


def weighted_circular_moments(arr: np.ndarray, w: np.ndarray) -> HsvMoments:
    """Moments with non-negative weights (responsibilities); w need not sum to 1."""
    wsum = float(np.sum(w))
    if wsum <= 0.0:
        raise DegenerateInputError("weighted_circular_moments with zero total weight")
    wn = w / wsum
    mean_h = math.atan2(float(wn @ np.sin(arr[:, 0])), float(wn @ np.cos(arr[:, 0])))
    mean = HsvPixel(
        h=mean_h, s=float(wn @ arr[:, 1]), v=float(wn @ arr[:, 2])
    )
    d = delta_matrix(arr, mean.as_array())
    cov = (d * wn[:, None]).T @ d
    cov = 0.5 * (cov + cov.T)
    return HsvMoments(mean=mean, cov=cov)


def regularize(cov: np.ndarray, eps: float = COV_EPS) -> np.ndarray:
    return cov + eps * np.eye(3)


def mahalanobis(p: HsvPixel, q: HsvPixel, cov: np.ndarray, eps: float = COV_EPS) -> float:
    """sqrt(D^T cov^-1 D) with D = hsv_distance(p, q).

    cov gets eps*I added before inversion; a covariance still singular
    after that raises numpy's LinAlgError.
    """
    d = hsv_distance(p, q).as_array()
    sol = np.linalg.solve(regularize(cov, eps), d)
    return float(math.sqrt(max(0.0, float(d @ sol))))


def mahalanobis_many(
    arr: np.ndarray, center: np.ndarray, cov: np.ndarray, eps: float = COV_EPS
) -> np.ndarray:
    """Vector of Mahalanobis distances from each row of arr to center."""
    d = delta_matrix(arr, center)
    inv = np.linalg.inv(regularize(cov, eps))
    sq = np.einsum("ij,jk,ik->i", d, inv, d)
    return np.sqrt(np.maximum(sq, 0.0))
