import numpy as np
import pytest

from garmentsearch import corpus, synthetic


class TestAnnotationParsing:
    def test_round_trip(self, tmp_path):
        ann = corpus.Annotation("img1", "upper", "Dark Red", author="me")
        corpus.append_annotation(tmp_path, ann)
        parsed = corpus.parse_annotations(tmp_path / "annotations.tsv")
        assert parsed == [corpus.Annotation("img1", "upper", "dark red", author="me")]

    def test_label_lowercased(self):
        ann = corpus.Annotation("x", "lower", "  BLUE ")
        assert ann.color_label == "blue"

    def test_bad_garment(self):
        with pytest.raises(corpus.AnnotationError):
            corpus.Annotation("x", "torso", "blue")

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "annotations.tsv"
        path.write_text("a\tupper\tred\nbroken line\n", encoding="utf-8")
        with pytest.raises(corpus.AnnotationError, match=":2:"):
            corpus.parse_annotations(path)

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "annotations.tsv"
        path.write_text("# header\n\na\tupper\tred\n", encoding="utf-8")
        assert len(corpus.parse_annotations(path)) == 1

    def test_duplicates_collapsed(self, tmp_path):
        path = tmp_path / "annotations.tsv"
        path.write_text("a\tupper\tred\na\tupper\tred\n", encoding="utf-8")
        assert len(corpus.parse_annotations(path)) == 1


class TestIngest(object):
    def test_small_corpus_regions(self, small_corpus):
        ds = small_corpus
        assert len(ds.sample_ids) == 120
        for sid in ds.sample_ids:
            for garment in ("upper", "lower"):
                region = ds.region(sid, garment)
                assert region is not None
                assert region.n > 0
                assert region.pixels.shape[1] == 3

    def test_cache_reused(self, small_corpus):
        cache = small_corpus.root / "cache"
        npys = list(cache.glob("*.pixels.npy"))
        assert len(npys) == 2 * 120
        before = {p: p.stat().st_mtime_ns for p in npys}
        ds2 = corpus.ingest(small_corpus.root)
        after = {p: p.stat().st_mtime_ns for p in npys}
        assert before == after
        sid = ds2.sample_ids[0]
        assert np.array_equal(
            ds2.region(sid, "upper").pixels,
            small_corpus.region(sid, "upper").pixels,
        )

    def test_unreadable_image_skipped(self, tmp_path, caplog):
        cfg = synthetic.SynthConfig(n_samples=4, seed=0)
        synthetic.generate_corpus(tmp_path, cfg)
        bad = tmp_path / "images" / "zz_truncated.png"
        bad.write_bytes(b"\x89PNG\r\n\x1a\nnot really a png")
        ds = corpus.ingest(tmp_path)
        assert "zz_truncated" not in ds.sample_ids
        assert len(ds.sample_ids) == 4

    def test_annotation_for_unknown_image_dropped(self, tmp_path):
        cfg = synthetic.SynthConfig(n_samples=3, seed=1)
        synthetic.generate_corpus(tmp_path, cfg)
        with open(tmp_path / "annotations.tsv", "a", encoding="utf-8") as fh:
            fh.write("ghost\tupper\tred\n")
        ds = corpus.ingest(tmp_path)
        assert all(a.image_id != "ghost" for a in ds.annotations)


class TestAnnotate:
    def test_idempotent_and_persisted(self, tmp_path):
        cfg = synthetic.SynthConfig(n_samples=3, seed=2)
        ds = synthetic.generate_and_ingest(tmp_path, cfg)
        sid = ds.sample_ids[0]
        ann = corpus.Annotation(sid, "upper", "magenta")
        assert corpus.annotate(ds, ann) is True
        assert corpus.annotate(ds, ann) is False
        reloaded = corpus.ingest(tmp_path)
        assert ann.key() in {a.key() for a in reloaded.annotations}

    def test_unknown_image_rejected(self, small_corpus):
        with pytest.raises(corpus.AnnotationError):
            corpus.annotate(small_corpus, corpus.Annotation("nope", "upper", "red"),
                            persist=False)

    def test_label_histogram(self, small_corpus):
        hist = small_corpus.label_histogram()
        assert sum(hist.values()) == len(small_corpus.annotations)
        assert all("/" in key for key in hist)


class TestMakeSplits:
    def _label(self, ds):
        # most common upper label in the synthetic corpus
        hist = ds.label_histogram()
        best = max((n, key) for key, n in hist.items() if key.startswith("upper/"))
        return best[1].split("/", 1)[1]

    def test_plan_shape(self, small_corpus):
        label = self._label(small_corpus)
        plan = corpus.make_splits(small_corpus, "upper", label, k=5, trials=10, seed=3)
        assert len(plan.trials) == 10
        positives = set(small_corpus.positives("upper", label))
        for t in plan.trials:
            assert len(t.train_pos) == 5
            assert len(t.train_neg) == 5
            assert set(t.train_pos) <= positives
            assert not set(t.train_neg) & positives
            # training ids never leak into the test set
            assert not set(t.train_pos) & set(t.test_ids)
            assert not set(t.train_neg) & set(t.test_ids)
            assert t.relevant <= set(t.test_ids)
            # halving: test positives get the larger half
            assert len(t.relevant) == len(positives) - len(positives) // 2

    def test_trials_differ_but_are_reproducible(self, small_corpus):
        label = self._label(small_corpus)
        p1 = corpus.make_splits(small_corpus, "upper", label, k=4, seed=9)
        p2 = corpus.make_splits(small_corpus, "upper", label, k=4, seed=9)
        assert p1 == p2
        assert len({t.train_pos for t in p1.trials}) > 1

    def test_trial_seeds_derived_from_run_seed(self, small_corpus):
        label = self._label(small_corpus)
        plan = corpus.make_splits(small_corpus, "upper", label, k=2, seed=7)
        assert [t.seed for t in plan.trials] == [70_000 + t for t in range(10)]

    def test_insufficient_positives(self, small_corpus):
        label = self._label(small_corpus)
        n_pos = len(small_corpus.positives("upper", label))
        with pytest.raises(corpus.SplitError, match="not enough positive"):
            corpus.make_splits(small_corpus, "upper", label, k=n_pos // 2 + 1)

    def test_unknown_label(self, small_corpus):
        with pytest.raises(corpus.SplitError):
            corpus.make_splits(small_corpus, "upper", "no-such-color", k=1)
