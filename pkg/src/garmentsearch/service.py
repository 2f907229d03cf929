"""Operational engine and HTTP service.

The Engine owns a data directory:

    <data_dir>/datasets/<name>/   dataset directories (see corpus module)
    <data_dir>/models/            append-only JSON model store
    <data_dir>/reports/           evaluation reports

Model files are published atomically (write temp, rename) and never
mutated afterwards, so adding a new color label cannot disturb existing
models.  The FastAPI app exposes the workflow under /v1 for the analyst
UI and scripts.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus, evaluation, gmm, query as querymod, svm

GENERATIVE = evaluation.GENERATIVE
DISCRIMINATIVE = evaluation.DISCRIMINATIVE


class EngineError(RuntimeError):
    def __init__(self, message, status=400, details=None):
        super().__init__(message)
        self.status = status
        self.details = details or {}


@dataclass
class EngineSettings:
    data_dir: Path = Path("data")
    port: int = 8940
    default_tau: float = 2.0
    default_components: int = 2
    svm_gamma: float = 0.01
    svm_cost: float = 1.0
    pixel_cap: int = 300
    seed: int = 0

    @staticmethod
    def load(config_path=None) -> "EngineSettings":
        """TOML config file plus env overrides for port and data dir."""
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib

        values = {}
        if config_path and Path(config_path).exists():
            with open(config_path, "rb") as fh:
                values = tomllib.load(fh)
        settings = EngineSettings(
            data_dir=Path(values.get("data_dir", "data")),
            port=int(values.get("port", 8940)),
            default_tau=float(values.get("tau", 2.0)),
            default_components=int(values.get("components", 2)),
            svm_gamma=float(values.get("svm_gamma", 0.01)),
            svm_cost=float(values.get("svm_cost", 1.0)),
            pixel_cap=int(values.get("pixel_cap", 300)),
            seed=int(values.get("seed", 0)),
        )
        if os.environ.get("GARMENTSEARCH_DATA_DIR"):
            settings.data_dir = Path(os.environ["GARMENTSEARCH_DATA_DIR"])
        if os.environ.get("GARMENTSEARCH_PORT"):
            settings.port = int(os.environ["GARMENTSEARCH_PORT"])
        return settings


class Engine:
    def __init__(self, settings: EngineSettings | None = None):
        self.settings = settings or EngineSettings()
        self.data_dir = Path(self.settings.data_dir)
        self.models_dir = self.data_dir / "models"
        self.reports_dir = self.data_dir / "reports"
        self.models_dir.mkdir(parents=True, exist_ok=True)
        self.reports_dir.mkdir(parents=True, exist_ok=True)
        self._datasets: dict[str, corpus.Dataset] = {}
        self._annotation_lock = threading.Lock()
        self._jobs: dict[str, dict] = {}
        self.parser = querymod.QueryParser()

    # --- datasets -------------------------------------------------------

    def dataset_names(self) -> list[str]:
        ds_dir = self.data_dir / "datasets"
        if not ds_dir.exists():
            return []
        return sorted(p.name for p in ds_dir.iterdir() if (p / "images").is_dir())

    def dataset(self, name: str) -> corpus.Dataset:
        if name not in self._datasets:
            root = self.data_dir / "datasets" / name
            if not (root / "images").is_dir():
                raise EngineError(f"unknown dataset {name!r}", status=404)
            self._datasets[name] = corpus.ingest(root, name=name)
        return self._datasets[name]

    def ingest(self, name: str) -> corpus.Dataset:
        self._datasets.pop(name, None)
        return self.dataset(name)

    def annotate(self, name: str, ann: corpus.Annotation) -> bool:
        ds = self.dataset(name)
        with self._annotation_lock:
            return corpus.annotate(ds, ann)

    def unlabeled_samples(self, name: str, garment: str, label: str) -> list[str]:
        ds = self.dataset(name)
        labeled = set(ds.positives(garment, label))
        return [i for i in ds.sample_ids if i not in labeled]

    # --- model store ----------------------------------------------------

    def model_ids(self) -> list[str]:
        return sorted(p.stem for p in self.models_dir.glob("*.json"))

    def model_doc(self, model_id: str) -> dict:
        path = self.models_dir / f"{model_id}.json"
        if not path.exists():
            raise EngineError(f"unknown model {model_id!r}", status=404)
        return json.loads(path.read_text(encoding="utf-8"))

    def _publish(self, model_id: str, doc: dict) -> None:
        path = self.models_dir / f"{model_id}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")
        tmp.rename(path)

    def find_model(self, label: str, garment: str, engine: str):
        matches = [
            mid for mid in self.model_ids()
            if mid.startswith(f"{engine}--{label.replace(' ', '_')}--{garment}--")
        ]
        return matches[-1] if matches else None

    def trained_labels(self) -> list[str]:
        out = set()
        for mid in self.model_ids():
            engine, label, garment, _rest = mid.split("--", 3)
            out.add(f"{label.replace('_', ' ')} ({garment}, {engine})")
        return sorted(out)

    def train(
        self,
        dataset_name: str,
        label: str,
        garment: str,
        engine: str = GENERATIVE,
        sample_ids=None,
        k: int | None = None,
        seed: int | None = None,
    ) -> str:
        """Train and publish a model; returns the model id.

        The generative engine accepts only positive samples; the
        discriminative engine auto-draws one negative per positive from
        samples not annotated with the label for that garment.
        """
        ds = self.dataset(dataset_name)
        label = label.strip().lower()
        if garment not in ("upper", "lower"):
            raise EngineError(f"bad garment {garment!r}", status=422)
        if engine not in (GENERATIVE, DISCRIMINATIVE):
            raise EngineError(f"bad engine {engine!r}", status=422)
        seed = self.settings.seed if seed is None else seed
        positives = ds.positives(garment, label)
        if sample_ids:
            unknown = [s for s in sample_ids if s not in set(positives)]
            if unknown:
                raise EngineError(
                    f"samples not annotated {label}/{garment}: {unknown}", status=422
                )
            pos_ids = list(sample_ids)
        else:
            pos_ids = positives[:k] if k else positives
        if not pos_ids:
            raise EngineError(
                f"no positive samples for {label}/{garment}", status=422
            )
        pos_regions = [ds.region(i, garment).pixels for i in pos_ids]
        provenance = {
            "dataset": dataset_name, "samples": pos_ids, "seed": seed,
        }
        if engine == GENERATIVE:
            model = gmm.train(
                pos_regions,
                gmm.FilterConfig(tau=self.settings.default_tau),
                gmm.EmConfig(n_components=self.settings.default_components, seed=seed),
                label=label, garment=garment, provenance=provenance,
            )
            doc = gmm.to_json_dict(model)
        else:
            import random

            rng = random.Random(seed)
            non_pos = [i for i in ds.sample_ids if i not in set(positives)]
            if len(non_pos) < len(pos_ids):
                raise EngineError("not enough negative candidates", status=422)
            neg_ids = rng.sample(non_pos, len(pos_ids))
            neg_regions = [ds.region(i, garment).pixels for i in neg_ids]
            provenance["negatives"] = neg_ids
            cfg = svm.SvmConfig(
                gamma=self.settings.svm_gamma, cost=self.settings.svm_cost,
                pixel_cap=self.settings.pixel_cap, seed=seed,
            )
            model = svm.train_svm(pos_regions, neg_regions, cfg, provenance=provenance)
            doc = svm.to_json_dict(model)
            doc["label"] = label
            doc["garment"] = garment
        model_id = (
            f"{engine}--{label.replace(' ', '_')}--{garment}--{doc['config_hash']}"
            f"-{uuid.uuid4().hex[:8]}"
        )
        self._publish(model_id, doc)
        return model_id

    def submit_training(self, **kwargs) -> dict:
        """Run training in a background thread; poll via job id."""
        job_id = uuid.uuid4().hex[:12]
        job = {"job_id": job_id, "status": "running", "model_id": None, "error": None}
        self._jobs[job_id] = job

        def _run():
            try:
                job["model_id"] = self.train(**kwargs)
                job["status"] = "done"
            except Exception as exc:  # surfaced verbatim to the client
                job["status"] = "failed"
                job["error"] = str(exc)

        thread = threading.Thread(target=_run, daemon=True)
        thread.start()
        thread.join()  # desk-scale: complete before responding, keep job record
        return job

    def job(self, job_id: str) -> dict:
        if job_id not in self._jobs:
            raise EngineError(f"unknown job {job_id!r}", status=404)
        return self._jobs[job_id]

    # --- retrieval ------------------------------------------------------

    def _load_model(self, doc: dict):
        if doc.get("kind") == "svm_rbf":
            return svm.from_json_dict(doc)
        return gmm.from_json_dict(doc)

    def retrieve(
        self,
        dataset_name: str,
        text: str | None = None,
        ast: querymod.QueryAst | None = None,
        engine: str = GENERATIVE,
        top_n: int = 10,
    ) -> dict:
        if top_n < 1:
            raise EngineError("top_n must be >= 1", status=422)
        ds = self.dataset(dataset_name)
        if ast is None:
            if not text:
                raise EngineError("query text or ast required", status=422)
            try:
                ast = self.parser.parse(text)
            except querymod.ParseError as exc:
                raise EngineError(str(exc), status=422)
        t0 = time.perf_counter()
        leaf_models = {}
        for leaf in querymod.leaves(ast):
            model_id = self.find_model(leaf.color_label, leaf.garment, engine)
            if model_id is None:
                raise EngineError(
                    f"no trained {engine} model for "
                    f"{leaf.color_label!r}/{leaf.garment}",
                    status=409,
                    details={"trained": self.trained_labels()},
                )
            leaf_models[leaf] = (model_id, self._load_model(self.model_doc(model_id)))
        ranking = {}
        for sid in ds.sample_ids:
            leaf_scores = {}
            usable = True
            for leaf, (_mid, model) in leaf_models.items():
                region = ds.region(sid, leaf.garment)
                if region is None or region.n == 0:
                    usable = False
                    break
                if isinstance(model, gmm.ColorModel):
                    leaf_scores[leaf] = max(gmm.region_score(region.pixels, model), 1e-300)
                else:
                    leaf_scores[leaf] = max(
                        svm.svm_region_score(region.pixels, model), 1e-300
                    )
            if usable:
                ranking[sid] = gmm.combine(ast, leaf_scores)
        ordered = sorted(ranking.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
        elapsed_ms = 1000.0 * (time.perf_counter() - t0)
        return {
            "query": ast.pretty(),
            "engine": engine,
            "models": [mid for mid, _m in leaf_models.values()],
            "ranked": [
                {
                    "sample_id": sid,
                    "score": score,
                    "thumbnail": f"/v1/samples/{sid}/image?dataset={dataset_name}",
                }
                for sid, score in ordered
            ],
            "timing_ms": elapsed_ms,
        }

    def report(self, report_id: str) -> dict:
        path = self.reports_dir / report_id / "report.json"
        if not path.exists():
            raise EngineError(f"unknown report {report_id!r}", status=404)
        return json.loads(path.read_text(encoding="utf-8"))


# --- HTTP layer ---------------------------------------------------------


def create_app(engine: Engine):
    from fastapi import FastAPI, Request
    from fastapi.responses import FileResponse, JSONResponse

    app = FastAPI(title="garmentsearch", version="1")

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        body = {"code": exc.status, "message": str(exc)}
        body.update(exc.details)
        return JSONResponse(status_code=exc.status, content=body)

    @app.get("/v1/datasets")
    def list_datasets():
        return {"datasets": engine.dataset_names()}

    @app.post("/v1/datasets/{name}/annotations")
    def post_annotation(name: str, payload: dict):
        try:
            ann = corpus.Annotation(
                image_id=payload.get("image_id", ""),
                garment=payload.get("garment", ""),
                color_label=payload.get("color_label", ""),
                author=payload.get("author", ""),
                timestamp=payload.get("timestamp", ""),
            )
        except corpus.AnnotationError as exc:
            raise EngineError(str(exc), status=422)
        try:
            created = engine.annotate(name, ann)
        except corpus.AnnotationError as exc:
            raise EngineError(str(exc), status=422)
        ds = engine.dataset(name)
        return {"created": created, "labels": corpus.list_labels(ds)}

    @app.get("/v1/datasets/{name}/samples")
    def list_samples(name: str, unlabeled_for: str | None = None, garment: str = "upper"):
        ds = engine.dataset(name)
        if unlabeled_for:
            ids = engine.unlabeled_samples(name, garment, unlabeled_for)
        else:
            ids = ds.sample_ids
        return {"samples": ids, "labels": corpus.list_labels(ds)}

    @app.post("/v1/models/train")
    def train_model(payload: dict):
        job = engine.submit_training(
            dataset_name=payload.get("dataset", ""),
            label=payload.get("label", ""),
            garment=payload.get("garment", "upper"),
            engine=payload.get("engine", GENERATIVE),
            sample_ids=payload.get("sample_ids"),
            k=payload.get("k"),
            seed=payload.get("seed"),
        )
        return job

    @app.get("/v1/models/jobs/{job_id}")
    def get_job(job_id: str):
        return engine.job(job_id)

    @app.get("/v1/models")
    def list_models():
        return {"models": engine.model_ids()}

    @app.post("/v1/query")
    def run_query(payload: dict):
        return engine.retrieve(
            dataset_name=payload.get("dataset", ""),
            text=payload.get("text"),
            engine=payload.get("engine", GENERATIVE),
            top_n=int(payload.get("top_n", 10)),
        )

    @app.get("/v1/samples/{sample_id}/image")
    def sample_image(sample_id: str, dataset: str):
        ds = engine.dataset(dataset)
        path = ds.image_paths.get(sample_id)
        if path is None:
            raise EngineError(f"unknown sample {sample_id!r}", status=404)
        return FileResponse(path)

    @app.get("/v1/eval/reports/{report_id}")
    def get_report(report_id: str):
        return engine.report(report_id)

    return app
