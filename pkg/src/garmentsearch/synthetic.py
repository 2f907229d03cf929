"""Synthetic pedestrian-like corpus generation.

Builds two-tone 128x48 crops (head band, upper garment, lower garment,
cluttered background) with known garment colors, per-identity hue jitter,
pixel noise and a configurable fraction of outlier pixels.  Writes a
dataset directory (images/, masks/, annotations.tsv) that `corpus.ingest`
consumes like any real dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import corpus

# label -> (hue degrees, saturation %, value %)
DEFAULT_PALETTE = {
    "red": (0.0, 85.0, 85.0),
    "green": (120.0, 70.0, 70.0),
    "blue": (240.0, 80.0, 75.0),
    "yellow": (60.0, 85.0, 90.0),
    "white": (0.0, 4.0, 95.0),
    "black": (0.0, 0.0, 8.0),
}

LIGHT_LABELS = ("white", "yellow")
DARK_LABELS = ("black", "blue")


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 400
    height: int = 128
    width: int = 48
    upper_labels: tuple = ("red", "green", "blue", "yellow")
    lower_labels: tuple = ("black", "blue", "white", "green")
    identity_hue_jitter_deg: float = 12.0
    pixel_hue_noise_deg: float = 6.0
    sv_noise: float = 6.0
    outlier_fraction: float = 0.10
    annotate_light_dark: bool = True
    seed: int = 0
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))


def _fill_noisy(rng, shape, base, cfg: SynthConfig, jitter_deg: float):
    """HSV block around `base` with hue jitter + per-pixel noise."""
    h_deg, s, v = base
    h = np.full(shape, h_deg + jitter_deg)
    h += rng.normal(0.0, cfg.pixel_hue_noise_deg, size=shape)
    s_arr = np.clip(rng.normal(s, cfg.sv_noise, size=shape), 0.0, 100.0)
    v_arr = np.clip(rng.normal(v, cfg.sv_noise, size=shape), 0.0, 100.0)
    return np.mod(h, 360.0), s_arr, v_arr


def _inject_outliers(rng, h, s, v, fraction):
    n = h.size
    m = int(round(fraction * n))
    if m == 0:
        return
    idx = rng.choice(n, size=m, replace=False)
    h.ravel()[idx] = rng.uniform(0.0, 360.0, size=m)
    s.ravel()[idx] = rng.uniform(30.0, 100.0, size=m)
    v.ravel()[idx] = rng.uniform(20.0, 100.0, size=m)


def make_crop(rng, upper_base, lower_base, cfg: SynthConfig):
    """Return (rgb uint8 (H, W, 3), mask uint8 (H, W)) for one identity."""
    H, W = cfg.height, cfg.width
    h = rng.uniform(0.0, 360.0, size=(H, W))
    s = rng.uniform(0.0, 25.0, size=(H, W))
    v = rng.uniform(20.0, 80.0, size=(H, W))

    c0, c1 = int(0.25 * W), int(0.75 * W)
    head_r0, head_r1 = int(0.03 * H), int(0.14 * H)
    up_r0, up_r1 = head_r1, int(0.55 * H)
    lo_r0, lo_r1 = up_r1, int(0.92 * H)

    jitter_u = rng.normal(0.0, cfg.identity_hue_jitter_deg)
    jitter_l = rng.normal(0.0, cfg.identity_hue_jitter_deg)
    skin = (25.0, 35.0, 80.0)
    for (r0, r1), base, jit in (
        ((head_r0, head_r1), skin, 0.0),
        ((up_r0, up_r1), upper_base, jitter_u),
        ((lo_r0, lo_r1), lower_base, jitter_l),
    ):
        hh, ss, vv = _fill_noisy(rng, (r1 - r0, c1 - c0), base, cfg, jit)
        h[r0:r1, c0:c1] = hh
        s[r0:r1, c0:c1] = ss
        v[r0:r1, c0:c1] = vv
    for (r0, r1) in ((up_r0, up_r1), (lo_r0, lo_r1)):
        _inject_outliers(
            rng, h[r0:r1, c0:c1], s[r0:r1, c0:c1], v[r0:r1, c0:c1],
            cfg.outlier_fraction,
        )

    mask = np.zeros((H, W), dtype=np.uint8)
    mask[head_r0:lo_r1, c0:c1] = 255

    hsv8 = np.dstack([
        np.round(h / 360.0 * 255.0),
        np.round(s / 100.0 * 255.0),
        np.round(v / 100.0 * 255.0),
    ]).astype(np.uint8)
    rgb = np.asarray(Image.fromarray(hsv8, mode="HSV").convert("RGB"))
    return rgb, mask


def generate_corpus(root, cfg: SynthConfig | None = None) -> list[dict]:
    """Write a synthetic dataset directory; returns per-sample metadata."""
    cfg = cfg or SynthConfig()
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    records = []
    ann_lines = []
    for i in range(cfg.n_samples):
        upper_label = cfg.upper_labels[int(rng.integers(len(cfg.upper_labels)))]
        lower_label = cfg.lower_labels[int(rng.integers(len(cfg.lower_labels)))]
        image_id = f"synth{i:04d}"
        rgb, mask = make_crop(
            rng, cfg.palette[upper_label], cfg.palette[lower_label], cfg
        )
        Image.fromarray(rgb).save(root / "images" / f"{image_id}.png")
        Image.fromarray(mask).save(root / "masks" / f"{image_id}.mask.png")
        labels = [("upper", upper_label), ("lower", lower_label)]
        if cfg.annotate_light_dark:
            if upper_label in LIGHT_LABELS:
                labels.append(("upper", "light"))
            if upper_label in DARK_LABELS:
                labels.append(("upper", "dark"))
        for garment, label in labels:
            ann_lines.append(f"{image_id}\t{garment}\t{label}\tsynth\t")
        records.append(
            {"image_id": image_id, "upper": upper_label, "lower": lower_label}
        )
    (root / "annotations.tsv").write_text("\n".join(ann_lines) + "\n", encoding="utf-8")
    return records


def generate_and_ingest(root, cfg: SynthConfig | None = None) -> corpus.Dataset:
    generate_corpus(root, cfg)
    return corpus.ingest(root, name=Path(root).name)
