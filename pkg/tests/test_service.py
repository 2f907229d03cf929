import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from garmentsearch import cli, corpus, evaluation, service, synthetic


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("engine_data")
    synthetic.generate_corpus(
        root / "datasets" / "main",
        synthetic.SynthConfig(n_samples=60, seed=21),
    )
    return root


@pytest.fixture(scope="module")
def engine(data_dir):
    return service.Engine(service.EngineSettings(data_dir=data_dir))


@pytest.fixture(scope="module")
def client(engine):
    return TestClient(service.create_app(engine))


def most_common_label(engine, garment="upper"):
    hist = engine.dataset("main").label_histogram()
    best = max((n, key) for key, n in hist.items()
               if key.startswith(f"{garment}/"))
    return best[1].split("/", 1)[1]


class TestSettings:
    def test_toml_and_env_overrides(self, tmp_path, monkeypatch):
        cfg = tmp_path / "engine.toml"
        cfg.write_text('data_dir = "/srv/x"\nport = 9000\ntau = 3.5\n')
        s = service.EngineSettings.load(cfg)
        assert str(s.data_dir) == "/srv/x"
        assert s.port == 9000
        assert s.default_tau == 3.5
        monkeypatch.setenv("GARMENTSEARCH_DATA_DIR", str(tmp_path))
        monkeypatch.setenv("GARMENTSEARCH_PORT", "9001")
        s2 = service.EngineSettings.load(cfg)
        assert s2.data_dir == tmp_path
        assert s2.port == 9001

    def test_defaults_without_config(self):
        s = service.EngineSettings.load(None)
        assert s.port == 8940
        assert s.default_components == 2


class TestDatasets:
    def test_list(self, client):
        r = client.get("/v1/datasets")
        assert r.status_code == 200
        assert r.json() == {"datasets": ["main"]}

    def test_unknown_dataset_404(self, client):
        r = client.post("/v1/query", json={"dataset": "nope", "text": "red shirt"})
        assert r.status_code == 404
        assert "unknown dataset" in r.json()["message"]

    def test_samples_and_unlabeled_filter(self, client, engine):
        label = most_common_label(engine)
        r = client.get("/v1/datasets/main/samples")
        all_ids = r.json()["samples"]
        assert len(all_ids) == 60
        r2 = client.get("/v1/datasets/main/samples",
                        params={"unlabeled_for": label, "garment": "upper"})
        unlabeled = r2.json()["samples"]
        positives = engine.dataset("main").positives("upper", label)
        assert set(unlabeled) == set(all_ids) - set(positives)

    def test_annotation_roundtrip(self, client, engine):
        sid = engine.dataset("main").sample_ids[0]
        payload = {"image_id": sid, "garment": "lower", "color_label": "Mauve",
                   "author": "tester"}
        r = client.post("/v1/datasets/main/annotations", json=payload)
        assert r.status_code == 200
        assert r.json()["created"] is True
        assert r.json()["labels"].get("lower/mauve") == 1
        r2 = client.post("/v1/datasets/main/annotations", json=payload)
        assert r2.json()["created"] is False

    def test_bad_annotation_422(self, client):
        r = client.post("/v1/datasets/main/annotations",
                        json={"image_id": "x", "garment": "hat", "color_label": "red"})
        assert r.status_code == 422


class TestTraining:
    def test_train_job_and_model_store(self, client, engine):
        label = most_common_label(engine)
        r = client.post("/v1/models/train",
                        json={"dataset": "main", "label": label,
                              "garment": "upper", "k": 5, "seed": 1})
        assert r.status_code == 200
        job = r.json()
        assert job["status"] == "done"
        assert job["model_id"]
        poll = client.get(f"/v1/models/jobs/{job['job_id']}")
        assert poll.json() == job
        assert job["model_id"] in client.get("/v1/models").json()["models"]

    def test_discriminative_train(self, client, engine):
        label = most_common_label(engine)
        r = client.post("/v1/models/train",
                        json={"dataset": "main", "label": label, "garment": "upper",
                              "engine": "discriminative", "k": 5, "seed": 1})
        job = r.json()
        assert job["status"] == "done"
        assert job["model_id"].startswith("discriminative--")

    def test_unknown_label_fails_job(self, client):
        r = client.post("/v1/models/train",
                        json={"dataset": "main", "label": "vantablack",
                              "garment": "upper"})
        job = r.json()
        assert job["status"] == "failed"
        assert "no positive samples" in job["error"]

    def test_unknown_job_404(self, client):
        assert client.get("/v1/models/jobs/deadbeef").status_code == 404

    def test_new_label_leaves_existing_models_untouched(self, client, engine):
        before = {
            p.name: p.read_bytes() for p in engine.models_dir.glob("*.json")
        }
        assert before  # trained above
        sids = engine.dataset("main").sample_ids[:4]
        for sid in sids:
            client.post("/v1/datasets/main/annotations",
                        json={"image_id": sid, "garment": "upper",
                              "color_label": "teal"})
        r = client.post("/v1/models/train",
                        json={"dataset": "main", "label": "teal",
                              "garment": "upper", "seed": 2})
        assert r.json()["status"] == "done"
        after = {p.name: p.read_bytes() for p in engine.models_dir.glob("*.json")}
        for name, blob in before.items():
            assert after[name] == blob
        assert len(after) == len(before) + 1


@pytest.fixture(scope="module")
def trained_models(client, engine):
    for garment in ("upper", "lower"):
        label = most_common_label(engine, garment)
        r = client.post("/v1/models/train",
                        json={"dataset": "main", "label": label,
                              "garment": garment, "k": 6, "seed": 4})
        assert r.json()["status"] == "done"


@pytest.mark.usefixtures("trained_models")
class TestQuery:
    def test_ranked_results(self, client, engine):
        label = most_common_label(engine)
        r = client.post("/v1/query",
                        json={"dataset": "main", "text": f"{label} shirt",
                              "top_n": 8})
        assert r.status_code == 200
        body = r.json()
        assert body["query"] == f"{label} jacket"
        assert len(body["ranked"]) == 8
        scores = [item["score"] for item in body["ranked"]]
        assert scores == sorted(scores, reverse=True)
        for item in body["ranked"]:
            assert item["thumbnail"].endswith("?dataset=main")
        assert body["timing_ms"] > 0
        # ranking actually retrieves: majority of the top hits are positives
        positives = set(engine.dataset("main").positives("upper", label))
        hits = sum(item["sample_id"] in positives for item in body["ranked"])
        assert hits >= 5

    def test_conjunction_query(self, client, engine):
        up = most_common_label(engine, "upper")
        lo = most_common_label(engine, "lower")
        r = client.post("/v1/query",
                        json={"dataset": "main",
                              "text": f"{up} shirt and {lo} trousers"})
        assert r.status_code == 200
        assert r.json()["query"] == f"{up} jacket and {lo} trousers"
        assert len(r.json()["models"]) == 2

    def test_untrained_label_409_lists_trained(self, client):
        r = client.post("/v1/query",
                        json={"dataset": "main", "text": "chartreuse shirt"})
        assert r.status_code == 409
        body = r.json()
        assert "chartreuse" in body["message"]
        assert isinstance(body["trained"], list) and body["trained"]

    def test_parse_error_422(self, client):
        r = client.post("/v1/query", json={"dataset": "main", "text": "and and"})
        assert r.status_code == 422

    def test_sample_image_served(self, client, engine):
        sid = engine.dataset("main").sample_ids[0]
        r = client.get(f"/v1/samples/{sid}/image", params={"dataset": "main"})
        assert r.status_code == 200
        assert r.content[:4] == b"\x89PNG"

    def test_unknown_sample_404(self, client):
        r = client.get("/v1/samples/nope/image", params={"dataset": "main"})
        assert r.status_code == 404


class TestReports:
    def test_report_roundtrip(self, client, engine):
        res = evaluation.QueryResult("upper", "red", 5, "generative",
                                     bep_trials=[75.0])
        evaluation.report_emit([res], engine.reports_dir / "r1")
        body = client.get("/v1/eval/reports/r1").json()
        assert body[0]["bep"]["mean"] == 75.0

    def test_unknown_report_404(self, client):
        assert client.get("/v1/eval/reports/none").status_code == 404


@pytest.fixture(scope="module")
def cli_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    synthetic.generate_corpus(
        root / "datasets" / "main",
        synthetic.SynthConfig(n_samples=30, seed=33),
    )
    return root


class TestCli:
    def test_ingest_train_query(self, cli_data):
        runner = CliRunner()
        base = ["--data-dir", str(cli_data)]
        r = runner.invoke(cli.main, base + ["ingest", "main"])
        assert r.exit_code == 0, r.output
        assert "30 samples" in r.output

        eng = service.Engine(service.EngineSettings(data_dir=cli_data))
        label = most_common_label(eng)
        r = runner.invoke(cli.main, base + ["train", "main", "--label", label,
                                            "--garment", "upper", "--k", "4"])
        assert r.exit_code == 0, r.output
        model_id = r.output.strip()
        assert model_id.startswith("generative--")

        r = runner.invoke(cli.main, base + ["query", "main", f"{label} shirt",
                                            "--top", "5"])
        assert r.exit_code == 0, r.output
        body = json.loads(r.output)
        assert len(body["ranked"]) == 5

    def test_annotate_idempotent(self, cli_data):
        runner = CliRunner()
        base = ["--data-dir", str(cli_data)]
        ds = corpus.ingest(cli_data / "datasets" / "main")
        sid = ds.sample_ids[0]
        r1 = runner.invoke(cli.main, base + ["annotate", "main", sid,
                                             "upper", "crimson"])
        r2 = runner.invoke(cli.main, base + ["annotate", "main", sid,
                                             "upper", "crimson"])
        assert "created" in r1.output
        assert "already present" in r2.output

    def test_eval_robustness_writes_report(self, cli_data):
        runner = CliRunner()
        eng = service.Engine(service.EngineSettings(data_dir=cli_data))
        label = most_common_label(eng)
        r = runner.invoke(cli.main, ["--data-dir", str(cli_data),
                                     "eval", "robustness", "main",
                                     "--query", f"{label} shirt",
                                     "--k", "2", "--trials", "2"])
        assert r.exit_code == 0, r.output
        report_path = r.output.strip()
        assert report_path.endswith("report.txt")
        assert "BEP" in open(report_path).read()

    def test_usage_error_exit_code(self):
        runner = CliRunner()
        r = runner.invoke(cli.main, ["train"])
        assert r.exit_code == 2
