"""Foreground segmentation and coarse garment localization.

Pipeline for a pedestrian crop: seed pixels from the dominant color of
predefined torso/legs rectangles (K-means, circular-aware), grow the
seeds with a GrowCuts cellular automaton against border background
seeds, then split the foreground into upper/lower garments at the row
of maximal color dissimilarity.  Precomputed masks can be ingested
instead of running the automaton.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from . import colorstats as cs
from .colorstats import DegenerateInputError

BACKGROUND, UPPER, LOWER, FOREGROUND = 0, 1, 2, 3

# norm of the maximal HSV delta (pi, 100, 100); normalizes GrowCuts forces
MAX_DELTA = math.sqrt(math.pi**2 + 100.0**2 + 100.0**2)


@dataclass(frozen=True)
class SegConfig:
    upper_rect: tuple = (0.20, 0.45, 0.25, 0.75)  # (row0, row1, col0, col1) fractions
    lower_rect: tuple = (0.55, 0.85, 0.25, 0.75)
    kmeans_k: int = 3
    kmeans_restarts: int = 10
    kmeans_iters: int = 50
    growcut_max_iters: int = 500
    split_band: tuple = (0.3, 0.7)
    head_fraction: float = 0.15
    area_balance_weight: float = 0.2  # lambda in the split objective
    seed: int = 0


@dataclass
class PedestrianImage:
    """A crop in HSV; ``hsv`` has shape (height, width, 3)."""

    id: str
    hsv: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.hsv.ndim != 3 or self.hsv.shape[2] != 3:
            raise ValueError(f"hsv raster must be (h, w, 3), got {self.hsv.shape}")
        if self.hsv.shape[0] < 1 or self.hsv.shape[1] < 1:
            raise ValueError("empty raster")

    @property
    def height(self) -> int:
        return self.hsv.shape[0]

    @property
    def width(self) -> int:
        return self.hsv.shape[1]


@dataclass
class ForegroundMask:
    """Per-pixel labels (BACKGROUND/UPPER/LOWER) plus a convergence flag."""

    labels: np.ndarray = field(repr=False)
    converged: bool = True


@dataclass
class SampleRegion:
    image_id: str
    garment: str  # "upper" | "lower"
    pixels: np.ndarray = field(repr=False)  # (n, 3) hsv rows

    @property
    def n(self) -> int:
        return self.pixels.shape[0]


def image_from_rgb(image_id: str, rgb: np.ndarray) -> PedestrianImage:
    """Convert an (h, w, 3) uint8 RGB raster to the HSV representation."""
    arr = rgb.astype(np.float64) / 255.0
    mx = arr.max(axis=2)
    mn = arr.min(axis=2)
    c = mx - mn
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    h = np.zeros_like(mx)
    nz = c > 0
    rmax = nz & (mx == r)
    gmax = nz & ~rmax & (mx == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = np.mod((g - b)[rmax] / c[rmax], 6.0)
    h[gmax] = (b - r)[gmax] / c[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / c[bmax] + 4.0
    h *= math.pi / 3.0
    s = np.where(mx > 0, np.divide(c, mx, out=np.zeros_like(c), where=mx > 0), 0.0)
    return PedestrianImage(id=image_id, hsv=np.dstack([h, s * 100.0, mx * 100.0]))


def load_image(image_id: str, path, size: tuple[int, int] | None = (128, 48)) -> PedestrianImage:
    """Load an image file, optionally resizing to (height, width)."""
    img = Image.open(path).convert("RGB")
    if size is not None:
        img = img.resize((size[1], size[0]), Image.BILINEAR)
    return image_from_rgb(image_id, np.asarray(img))


def _rect_indices(image: PedestrianImage, rect) -> tuple[np.ndarray, np.ndarray]:
    r0 = int(round(rect[0] * image.height))
    r1 = int(round(rect[1] * image.height))
    c0 = int(round(rect[2] * image.width))
    c1 = int(round(rect[3] * image.width))
    r1 = max(r1, r0 + 1)
    c1 = max(c1, c0 + 1)
    if r0 < 0 or c0 < 0 or r1 > image.height or c1 > image.width:
        raise DegenerateInputError(f"rect {rect} outside image bounds")
    rows, cols = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    return rows.ravel(), cols.ravel()


def _kmeans(emb: np.ndarray, k: int, restarts: int, iters: int, rng) -> np.ndarray:
    """Plain Lloyd k-means with k-means++ seeding; returns assignments."""
    n = emb.shape[0]
    k = min(k, n)
    best_assign = None
    best_inertia = np.inf
    for _ in range(restarts):
        centers = emb[_kmeanspp(emb, k, rng)]
        for _ in range(iters):
            d2 = ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            assign = np.argmin(d2, axis=1)
            new_centers = centers.copy()
            for c in range(k):
                sel = assign == c
                if sel.any():
                    new_centers[c] = emb[sel].mean(axis=0)
            if np.allclose(new_centers, centers):
                centers = new_centers
                break
            centers = new_centers
        d2 = ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), assign].sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_assign = assign
    return best_assign


def _kmeanspp(emb: np.ndarray, k: int, rng) -> np.ndarray:
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


def dominant_color_seeds(image: PedestrianImage, rect, cfg: SegConfig | None = None):
    """Coordinates of the largest K-means color cluster inside ``rect``.

    ``rect`` is (row0, row1, col0, col1) as fractions of the image.
    Returns (rows, cols) integer arrays.
    """
    cfg = cfg or SegConfig()
    rows, cols = _rect_indices(image, rect)
    px = image.hsv[rows, cols]
    emb = np.column_stack(
        [np.cos(px[:, 0]), np.sin(px[:, 0]), px[:, 1] / 100.0, px[:, 2] / 100.0]
    )
    rng = np.random.default_rng(cfg.seed)
    assign = _kmeans(emb, cfg.kmeans_k, cfg.kmeans_restarts, cfg.kmeans_iters, rng)
    counts = np.bincount(assign)
    winner = int(np.argmax(counts))
    sel = assign == winner
    return rows[sel], cols[sel]


_NEIGHBOR_OFFSETS = [
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
]


def grow_cuts(
    image: PedestrianImage,
    upper_seeds,
    lower_seeds,
    background_seeds,
    cfg: SegConfig | None = None,
) -> ForegroundMask:
    """Cellular-automaton region growing from labeled seeds.

    Each cell carries (label, strength in [0, 1]).  A neighbor q attacks
    p with force g * strength(q) where g = 1 - |color(p) - color(q)| /
    MAX_DELTA; p adopts q's label when attacked harder than its own
    strength.  Updates are synchronous with a fixed neighbor order, so
    the result is deterministic.
    """
    cfg = cfg or SegConfig()
    h, w = image.height, image.width
    labels = np.zeros((h, w), dtype=np.int8)
    strength = np.zeros((h, w))
    for (rows, cols), lab in (
        (upper_seeds, UPPER),
        (lower_seeds, LOWER),
        (background_seeds, BACKGROUND),
    ):
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if rows.size == 0:
            raise DegenerateInputError("empty seed set")
        if np.any(strength[rows, cols] > 0):
            raise DegenerateInputError("seed sets overlap")
        labels[rows, cols] = lab
        strength[rows, cols] = 1.0

    hsv = image.hsv
    converged = False
    for _ in range(cfg.growcut_max_iters):
        best_attack = strength.copy()
        best_label = labels.copy()
        changed = False
        for dr, dc in _NEIGHBOR_OFFSETS:
            att = np.zeros((h, w))
            lab = np.zeros((h, w), dtype=np.int8)
            src_r = slice(max(0, -dr), h - max(0, dr))
            src_c = slice(max(0, -dc), w - max(0, dc))
            dst_r = slice(max(0, dr), h - max(0, -dr))
            dst_c = slice(max(0, dc), w - max(0, -dc))
            diff = hsv[dst_r, dst_c] - hsv[src_r, src_c]
            diff[..., 0] = cs.hue_delta(hsv[dst_r, dst_c, 0], hsv[src_r, src_c, 0])
            g = 1.0 - np.sqrt((diff**2).sum(axis=2)) / MAX_DELTA
            att[dst_r, dst_c] = g * strength[src_r, src_c]
            lab[dst_r, dst_c] = labels[src_r, src_c]
            win = att > best_attack
            if win.any():
                best_attack[win] = att[win]
                best_label[win] = lab[win]
                changed = True
        if not changed:
            converged = True
            break
        labels = best_label
        strength = best_attack
    return ForegroundMask(labels=labels, converged=converged)


def default_seeds(image: PedestrianImage, cfg: SegConfig | None = None):
    """Seed triple from the default rectangles plus the 1-pixel border."""
    cfg = cfg or SegConfig()
    upper = dominant_color_seeds(image, cfg.upper_rect, cfg)
    lower = dominant_color_seeds(image, cfg.lower_rect, cfg)
    h, w = image.height, image.width
    border = np.zeros((h, w), dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    taken = np.zeros((h, w), dtype=bool)
    taken[upper] = True
    taken[lower] = True
    border &= ~taken
    rows, cols = np.nonzero(border)
    return upper, lower, (rows, cols)


def split_objective(image: PedestrianImage, fg: np.ndarray, y: int, lam: float) -> float:
    """Color dissimilarity above/below row y minus the area imbalance term."""
    above = image.hsv[:y][fg[:y]]
    below = image.hsv[y:][fg[y:]]
    if above.shape[0] == 0 or below.shape[0] == 0:
        return -np.inf
    ma = cs.circular_moments(above.reshape(-1, 3)).mean
    mb = cs.circular_moments(below.reshape(-1, 3)).mean
    dissim = cs.hsv_distance(ma, mb).norm()
    total = above.shape[0] + below.shape[0]
    return dissim - lam * abs(above.shape[0] - below.shape[0]) / total


def split_parts(
    image: PedestrianImage, fg: np.ndarray, cfg: SegConfig | None = None
) -> tuple[SampleRegion, SampleRegion]:
    """Split a boolean foreground mask into upper/lower garment regions.

    The split row maximizes the color-dissimilarity objective over the
    configured band; the top head_fraction of foreground rows is
    excluded from the upper garment.
    """
    cfg = cfg or SegConfig()
    fg = np.asarray(fg, dtype=bool)
    fg_rows = np.flatnonzero(fg.any(axis=1))
    if fg_rows.size < 2:
        raise DegenerateInputError("mask needs at least 2 foreground rows")
    h = image.height
    band = [y for y in range(int(cfg.split_band[0] * h), int(cfg.split_band[1] * h) + 1)
            if 0 < y < h]
    if not band:
        raise DegenerateInputError("empty split band")
    scores = [split_objective(image, fg, y, cfg.area_balance_weight) for y in band]
    y_star = band[int(np.argmax(scores))]

    head_rows = fg_rows[: max(0, int(round(cfg.head_fraction * fg_rows.size)))]
    upper_mask = fg.copy()
    upper_mask[y_star:] = False
    upper_mask[head_rows] = False
    lower_mask = fg.copy()
    lower_mask[:y_star] = False
    upper = SampleRegion(image.id, "upper", image.hsv[upper_mask])
    lower = SampleRegion(image.id, "lower", image.hsv[lower_mask])
    return upper, lower


def segment(image: PedestrianImage, cfg: SegConfig | None = None):
    """Full automatic pipeline: seeds, GrowCuts, part split."""
    cfg = cfg or SegConfig()
    upper_seeds, lower_seeds, bg_seeds = default_seeds(image, cfg)
    mask = grow_cuts(image, upper_seeds, lower_seeds, bg_seeds, cfg)
    fg = mask.labels != BACKGROUND
    return split_parts(image, fg, cfg)


def load_external_mask(image: PedestrianImage, mask_path, cfg: SegConfig | None = None):
    """Ingest a single-channel mask file (nonzero = foreground) and split."""
    mask = np.asarray(Image.open(mask_path).convert("L"))
    if mask.shape != (image.height, image.width):
        raise ValueError(
            f"mask shape {mask.shape} does not match image {(image.height, image.width)}"
        )
    return split_parts(image, mask > 0, cfg)
