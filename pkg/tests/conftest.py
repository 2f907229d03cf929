import numpy as np
import pytest

from garmentsearch import synthetic


def hsv_cluster(rng, hue_deg, n, hue_sigma_deg=3.0, s=60.0, v=70.0, sv_sigma=4.0):
    """Sample a tight HSV pixel cluster around one hue; (n, 3) array."""
    h = np.radians(rng.normal(hue_deg, hue_sigma_deg, n))
    s_arr = np.clip(rng.normal(s, sv_sigma, n), 0.0, 100.0)
    v_arr = np.clip(rng.normal(v, sv_sigma, n), 0.0, 100.0)
    return np.column_stack([np.mod(h, 2 * np.pi), s_arr, v_arr])


def uniform_outliers(rng, n):
    return np.column_stack([
        rng.uniform(0.0, 2 * np.pi, n),
        rng.uniform(30.0, 100.0, n),
        rng.uniform(20.0, 100.0, n),
    ])


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """120-sample synthetic dataset, ingested once per session."""
    root = tmp_path_factory.mktemp("smallcorpus") / "synth"
    cfg = synthetic.SynthConfig(n_samples=120, seed=11)
    return synthetic.generate_and_ingest(root, cfg)


@pytest.fixture(scope="session")
def acceptance_corpus(tmp_path_factory):
    """The 400-crop corpus the acceptance criteria run against.

    Noisier than the defaults (wider per-identity hue spread, more
    contaminated pixels) so retrieval quality has headroom to improve
    with more training positives instead of saturating at 100.
    """
    root = tmp_path_factory.mktemp("acceptcorpus") / "synth"
    cfg = synthetic.SynthConfig(
        n_samples=400, seed=7,
        identity_hue_jitter_deg=25.0,
        pixel_hue_noise_deg=9.0,
        outlier_fraction=0.22,
    )
    return synthetic.generate_and_ingest(root, cfg)
