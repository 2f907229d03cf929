"""Dataset ingestion, annotation storage and train/test split plans.

Directory layout of a dataset:

    <root>/images/           pedestrian crops (png/jpg)
    <root>/masks/            optional `<image-id>.mask.png` foreground masks
    <root>/annotations.tsv   image_id<TAB>garment<TAB>color_label per line
    <root>/cache/            cached segmented regions (binary + sidecar)

Ingestion resizes crops to 128x48, converts to HSV, segments (external
mask when present, automatic pipeline otherwise) and caches the garment
regions so experiments never re-segment.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import segmentation as seg

log = logging.getLogger(__name__)

CANONICAL_SIZE = (128, 48)  # (height, width)
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class AnnotationError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class Annotation:
    image_id: str
    garment: str  # "upper" | "lower"
    color_label: str
    author: str = ""
    timestamp: str = ""

    def __post_init__(self):
        if self.garment not in ("upper", "lower"):
            raise AnnotationError(f"bad garment {self.garment!r}")
        if not self.color_label:
            raise AnnotationError("empty color label")
        object.__setattr__(self, "color_label", self.color_label.strip().lower())

    def key(self):
        return (self.image_id, self.garment, self.color_label)


@dataclass
class Dataset:
    name: str
    root: Path
    regions: dict = field(default_factory=dict)  # (image_id, garment) -> SampleRegion
    annotations: list = field(default_factory=list)
    image_paths: dict = field(default_factory=dict)  # image_id -> Path

    @property
    def sample_ids(self) -> list[str]:
        return sorted({img_id for (img_id, _g) in self.regions})

    def region(self, image_id: str, garment: str):
        return self.regions.get((image_id, garment))

    def positives(self, garment: str, color_label: str) -> list[str]:
        """Image ids annotated with (garment, color_label), sorted."""
        label = color_label.strip().lower()
        return sorted(
            {a.image_id for a in self.annotations
             if a.garment == garment and a.color_label == label}
        )

    def label_histogram(self) -> dict:
        hist: dict[tuple, int] = {}
        for a in self.annotations:
            k = (a.garment, a.color_label)
            hist[k] = hist.get(k, 0) + 1
        return {f"{g}/{c}": n for (g, c), n in sorted(hist.items())}


@dataclass(frozen=True)
class Trial:
    seed: int
    train_pos: tuple[str, ...]
    train_neg: tuple[str, ...]  # discriminative only
    test_ids: tuple[str, ...]
    relevant: frozenset


@dataclass(frozen=True)
class SplitPlan:
    garment: str
    color_label: str
    k: int
    trials: tuple[Trial, ...]


def parse_annotations(path) -> list[Annotation]:
    anns: list[Annotation] = []
    seen = set()
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise AnnotationError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            ann = Annotation(parts[0], parts[1], parts[2],
                             author=parts[3] if len(parts) > 3 else "",
                             timestamp=parts[4] if len(parts) > 4 else "")
        except AnnotationError as exc:
            raise AnnotationError(f"{path}:{lineno}: {exc}") from exc
        if ann.key() in seen:
            continue
        seen.add(ann.key())
        anns.append(ann)
    return anns


def append_annotation(root, ann: Annotation) -> None:
    path = Path(root) / "annotations.tsv"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"{ann.image_id}\t{ann.garment}\t{ann.color_label}"
                 f"\t{ann.author}\t{ann.timestamp}\n")


def _cache_paths(cache_dir: Path, image_id: str, garment: str):
    stem = f"{image_id}.{garment}"
    return cache_dir / f"{stem}.pixels.npy", cache_dir / f"{stem}.json"


def _write_cache(cache_dir: Path, region: seg.SampleRegion, provenance: str) -> None:
    npy, sidecar = _cache_paths(cache_dir, region.image_id, region.garment)
    np.save(npy, region.pixels.astype(np.float64))
    sidecar.write_text(
        json.dumps(
            {"image_id": region.image_id, "garment": region.garment,
             "n": int(region.n), "mask": provenance},
            sort_keys=True,
        ),
        encoding="utf-8",
    )


def _read_cache(cache_dir: Path, image_id: str, garment: str):
    npy, sidecar = _cache_paths(cache_dir, image_id, garment)
    if not npy.exists() or not sidecar.exists():
        return None
    pixels = np.load(npy)
    return seg.SampleRegion(image_id, garment, pixels)


def ingest(
    root,
    name: str | None = None,
    seg_cfg: seg.SegConfig | None = None,
    use_cache: bool = True,
) -> Dataset:
    """Load, segment and cache a dataset directory."""
    root = Path(root)
    ds = Dataset(name=name or root.name, root=root)
    images_dir = root / "images"
    masks_dir = root / "masks"
    cache_dir = root / "cache"
    cache_dir.mkdir(exist_ok=True)
    ann_path = root / "annotations.tsv"
    if ann_path.exists():
        ds.annotations = parse_annotations(ann_path)
    for path in sorted(images_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        image_id = path.stem
        ds.image_paths[image_id] = path
        if use_cache:
            upper = _read_cache(cache_dir, image_id, "upper")
            lower = _read_cache(cache_dir, image_id, "lower")
            if upper is not None and lower is not None:
                ds.regions[(image_id, "upper")] = upper
                ds.regions[(image_id, "lower")] = lower
                continue
        try:
            image = seg.load_image(image_id, path, CANONICAL_SIZE)
        except OSError as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            continue
        mask_path = masks_dir / f"{image_id}.mask.png"
        if mask_path.exists():
            upper, lower = seg.load_external_mask(image, mask_path, seg_cfg)
            provenance = "external"
        else:
            upper, lower = seg.segment(image, seg_cfg)
            provenance = "growcuts"
        ds.regions[(image_id, "upper")] = upper
        ds.regions[(image_id, "lower")] = lower
        _write_cache(cache_dir, upper, provenance)
        _write_cache(cache_dir, lower, provenance)
    missing = [a for a in ds.annotations if a.image_id not in ds.image_paths]
    for a in missing:
        log.warning("annotation for unknown image %s dropped", a.image_id)
    ds.annotations = [a for a in ds.annotations if a.image_id in ds.image_paths]
    return ds


def annotate(ds: Dataset, ann: Annotation, persist: bool = True) -> bool:
    """Add an annotation; returns False if it already exists (idempotent)."""
    if any(a.key() == ann.key() for a in ds.annotations):
        return False
    if ann.image_id not in ds.image_paths:
        raise AnnotationError(f"unknown image id {ann.image_id!r}")
    ds.annotations.append(ann)
    if persist:
        append_annotation(ds.root, ann)
    return True


def list_labels(ds: Dataset) -> dict:
    return ds.label_histogram()


def make_splits(
    ds: Dataset,
    garment: str,
    color_label: str,
    k: int,
    trials: int = 10,
    seed: int = 0,
) -> SplitPlan:
    """Repeated-trial split plan for one (garment, color) query.

    Positives are halved into a train pool and test positives, so k
    training positives require at least 2k annotated positives.  The
    discriminative negatives (k ids not annotated with the query color
    for that garment) are reserved out of the test set, which is shared
    by both engines.
    """
    positives = ds.positives(garment, color_label)
    all_ids = ds.sample_ids
    if len(positives) < 2 * k or k < 1:
        raise SplitError(
            f"not enough positive training examples: need {2 * k}, "
            f"have {len(positives)} for {garment}/{color_label}"
        )
    non_pos = [i for i in all_ids if i not in set(positives)]
    if len(non_pos) <= k:
        raise SplitError("not enough non-positive samples for negatives and testing")
    out = []
    for t in range(trials):
        trial_seed = seed * 10_000 + t
        rng = random.Random(trial_seed)
        pos = positives[:]
        rng.shuffle(pos)
        half = len(pos) // 2
        train_pool, test_pos = pos[:half], pos[half:]
        train_pos = tuple(train_pool[:k])
        neg = non_pos[:]
        rng.shuffle(neg)
        train_neg = tuple(neg[:k])
        test_ids = tuple(sorted(set(test_pos) | set(neg[k:])))
        out.append(
            Trial(
                seed=trial_seed,
                train_pos=train_pos,
                train_neg=train_neg,
                test_ids=test_ids,
                relevant=frozenset(test_pos),
            )
        )
    return SplitPlan(garment=garment, color_label=color_label.strip().lower(),
                     k=k, trials=tuple(out))
