"""Retrieval metrics and experiment protocols.

Metrics: precision-recall curves over ranked lists, the break-even point
(precision at prefix R, where R is the number of relevant items, which
is exactly where precision crosses recall) and P@N.  Protocols: the
repeated-split robustness table, cross-database transfer, and the
train/score timing comparison between the generative and discriminative
engines.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import corpus, gmm, svm

GENERATIVE = "generative"
DISCRIMINATIVE = "discriminative"


@dataclass(frozen=True)
class RankedList:
    """(sample id, score) pairs in descending score, ties by ascending id."""

    items: tuple  # of (id, score)
    relevant: frozenset

    @staticmethod
    def from_scores(scores: dict, relevant) -> "RankedList":
        items = tuple(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])))
        return RankedList(items=items, relevant=frozenset(relevant))

    @property
    def flags(self) -> list[bool]:
        return [sid in self.relevant for sid, _s in self.items]


def pr_curve(ranked: RankedList) -> list[tuple[float, float]]:
    """(precision, recall) at every prefix length 1..n."""
    flags = ranked.flags
    total_rel = sum(flags)
    if total_rel == 0:
        raise ValueError("ranked list has no relevant items")
    out = []
    tp = 0
    for i, rel in enumerate(flags, start=1):
        tp += rel
        out.append((tp / i, tp / total_rel))
    return out


def bep(ranked: RankedList) -> float:
    """Break-even point in percent: precision at prefix R (R = #relevant)."""
    flags = ranked.flags
    total_rel = sum(flags)
    if total_rel == 0:
        raise ValueError("ranked list has no relevant items")
    r = min(total_rel, len(flags))
    return 100.0 * sum(flags[:r]) / r


def p_at_n(ranked: RankedList, n: int) -> tuple[float, bool]:
    """Precision in the top n, in percent.

    When n exceeds the list length the precision is computed over the
    available prefix and the second return value flags the truncation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    flags = ranked.flags
    truncated = n > len(flags)
    m = min(n, len(flags))
    if m == 0:
        raise ValueError("empty ranked list")
    return 100.0 * sum(flags[:m]) / m, truncated


@dataclass
class QueryResult:
    garment: str
    color_label: str
    k: int
    engine: str
    bep_trials: list = field(default_factory=list)
    p5_trials: list = field(default_factory=list)
    p10_trials: list = field(default_factory=list)
    p20_trials: list = field(default_factory=list)
    train_ms: list = field(default_factory=list)
    score_ms: list = field(default_factory=list)

    def summary(self) -> dict:
        def stats(vals):
            if not vals:
                return {"mean": None, "std": None}
            return {
                "mean": statistics.fmean(vals),
                "std": statistics.pstdev(vals) if len(vals) > 1 else 0.0,
            }

        return {
            "query": f"{self.color_label} {self.garment}",
            "k": self.k,
            "engine": self.engine,
            "trials": len(self.bep_trials),
            "bep": stats(self.bep_trials),
            "p@5": stats(self.p5_trials),
            "p@10": stats(self.p10_trials),
            "p@20": stats(self.p20_trials),
            "train_ms": stats(self.train_ms),
            "score_ms": stats(self.score_ms),
        }


@dataclass(frozen=True)
class EngineConfig:
    filter_cfg: gmm.FilterConfig = field(default_factory=gmm.FilterConfig)
    em_cfg: gmm.EmConfig = field(default_factory=gmm.EmConfig)
    svm_cfg: svm.SvmConfig = field(default_factory=svm.SvmConfig)


def train_for_trial(ds: corpus.Dataset, plan: corpus.SplitPlan,
                    trial: corpus.Trial, engine: str, cfg: EngineConfig):
    """Train one model for one trial of a split plan."""
    garment = plan.garment
    pos_regions = [ds.region(i, garment).pixels for i in trial.train_pos]
    if engine == GENERATIVE:
        em = gmm.EmConfig(**{**asdict(cfg.em_cfg), "seed": trial.seed})
        return gmm.train(pos_regions, cfg.filter_cfg, em,
                         label=plan.color_label, garment=garment)
    neg_regions = [ds.region(i, garment).pixels for i in trial.train_neg]
    svm_cfg = svm.SvmConfig(**{
        "gamma": cfg.svm_cfg.gamma, "cost": cfg.svm_cfg.cost,
        "kkt_tol": cfg.svm_cfg.kkt_tol, "max_passes": cfg.svm_cfg.max_passes,
        "pixel_cap": cfg.svm_cfg.pixel_cap, "seed": trial.seed,
    })
    return svm.train_svm(pos_regions, neg_regions, svm_cfg)


def score_ids(ds: corpus.Dataset, garment: str, ids, model) -> dict:
    out = {}
    for sid in ids:
        region = ds.region(sid, garment)
        if region is None or region.n == 0:
            continue
        if isinstance(model, gmm.ColorModel):
            out[sid] = gmm.region_score(region.pixels, model)
        else:
            out[sid] = svm.svm_region_score(region.pixels, model)
    return out


def run_robustness(
    ds: corpus.Dataset,
    queries,
    k_list,
    trials: int = 10,
    engines=(GENERATIVE, DISCRIMINATIVE),
    cfg: EngineConfig | None = None,
    seed: int = 0,
) -> list[QueryResult]:
    """Repeated-split evaluation: one QueryResult per (query, k, engine)."""
    cfg = cfg or EngineConfig()
    results = []
    for garment, color_label in queries:
        for k in k_list:
            try:
                plan = corpus.make_splits(ds, garment, color_label, k,
                                          trials=trials, seed=seed)
            except corpus.SplitError:
                continue  # not enough positives for this k: leave the cell empty
            for engine in engines:
                res = QueryResult(garment, color_label, k, engine)
                for trial in plan.trials:
                    t0 = time.perf_counter()
                    model = train_for_trial(ds, plan, trial, engine, cfg)
                    t1 = time.perf_counter()
                    scores = score_ids(ds, garment, trial.test_ids, model)
                    t2 = time.perf_counter()
                    ranked = RankedList.from_scores(scores, trial.relevant)
                    res.bep_trials.append(bep(ranked))
                    res.p5_trials.append(p_at_n(ranked, 5)[0])
                    res.p10_trials.append(p_at_n(ranked, 10)[0])
                    res.p20_trials.append(p_at_n(ranked, 20)[0])
                    res.train_ms.append(1000.0 * (t1 - t0))
                    res.score_ms.append(1000.0 * (t2 - t1))
                results.append(res)
    return results


def run_cross_database(
    train_ds: corpus.Dataset,
    test_datasets,
    queries,
    k_list,
    trials: int = 10,
    engines=(GENERATIVE, DISCRIMINATIVE),
    cfg: EngineConfig | None = None,
    seed: int = 0,
) -> list[QueryResult]:
    """Train on one dataset, retrieve in others; test set = whole target."""
    cfg = cfg or EngineConfig()
    results = []
    for test_ds in test_datasets:
        for garment, color_label in queries:
            test_rel = frozenset(test_ds.positives(garment, color_label))
            if not test_rel:
                continue
            for k in k_list:
                try:
                    plan = corpus.make_splits(train_ds, garment, color_label, k,
                                              trials=trials, seed=seed)
                except corpus.SplitError:
                    continue
                for engine in engines:
                    res = QueryResult(garment, f"{color_label}@{test_ds.name}",
                                      k, engine)
                    for trial in plan.trials:
                        model = train_for_trial(train_ds, plan, trial, engine, cfg)
                        scores = score_ids(test_ds, garment,
                                           test_ds.sample_ids, model)
                        ranked = RankedList.from_scores(scores, test_rel)
                        res.bep_trials.append(bep(ranked))
                        res.p5_trials.append(p_at_n(ranked, 5)[0])
                        res.p10_trials.append(p_at_n(ranked, 10)[0])
                        res.p20_trials.append(p_at_n(ranked, 20)[0])
                    results.append(res)
    return results


def run_timing(
    ds: corpus.Dataset,
    query,
    k_list,
    engine: str,
    cfg: EngineConfig | None = None,
    n_score_samples: int = 100,
    repeats: int = 5,
    seed: int = 0,
) -> dict:
    """Train/score wall-clock per k: median of `repeats` after one warm-up."""
    cfg = cfg or EngineConfig()
    garment, color_label = query
    out = {}
    for k in k_list:
        plan = corpus.make_splits(ds, garment, color_label, k, trials=1, seed=seed)
        trial = plan.trials[0]
        ids = list(trial.test_ids)[:n_score_samples]
        model = train_for_trial(ds, plan, trial, engine, cfg)  # warm-up
        train_times, score_times = [], []
        for _ in range(repeats):
            t0 = time.perf_counter()
            model = train_for_trial(ds, plan, trial, engine, cfg)
            t1 = time.perf_counter()
            score_ids(ds, garment, ids, model)
            t2 = time.perf_counter()
            train_times.append(1000.0 * (t1 - t0))
            score_times.append(1000.0 * (t2 - t1))
        out[k] = {
            "train_ms": statistics.median(train_times),
            "score_ms_per_100": statistics.median(score_times) * 100.0 / max(1, len(ids)),
        }
    return out


# --- report emission ----------------------------------------------------


def report_emit(results: list[QueryResult], out_dir, pr_data: dict | None = None) -> None:
    """Write report.json, a query-by-k summary table (report.txt) and PR-curve CSVs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = [r.summary() for r in results]
    (out_dir / "report.json").write_text(
        json.dumps(summaries, indent=1, sort_keys=True), encoding="utf-8"
    )
    lines = [f"{'query':<24}{'engine':<16}{'k':>4}{'BEP':>10}{'P@5':>8}"
             f"{'P@10':>8}{'P@20':>8}"]
    for s in summaries:
        def fmt(block):
            return "-" if block["mean"] is None else f"{block['mean']:.1f}"
        lines.append(
            f"{s['query']:<24}{s['engine']:<16}{s['k']:>4}"
            f"{fmt(s['bep']):>10}{fmt(s['p@5']):>8}{fmt(s['p@10']):>8}{fmt(s['p@20']):>8}"
        )
    (out_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if pr_data:
        pr_dir = out_dir / "pr_curves"
        pr_dir.mkdir(exist_ok=True)
        for name, points in pr_data.items():
            with open(pr_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["precision", "recall"])
                writer.writerows(points)
