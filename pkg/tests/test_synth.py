import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from src.errors import PanelValidationError
from src.synth.generators import (
    DgpConfig, dump_csvs, entity_ids, gen_blobs, gen_factor, gen_spatial, gen_twfe, smooth_factors, torus_weights,
)
from src.synth.rng import substreams


def test_same_seed_same_panel():
    cfg = DgpConfig(n=10, t=5, seed=3)
    a, _ = gen_twfe(cfg)
    b, _ = gen_twfe(cfg)
    assert_allclose(a.columns["y"], b.columns["y"])
    c, _ = gen_twfe(cfg.model_copy(update={"seed": 4}))
    assert not np.allclose(a.columns["y"], c.columns["y"])


def test_substreams_are_independent_and_stable():
    first = [rng.standard_normal() for rng in substreams(5, 3)]
    again = [rng.standard_normal() for rng in substreams(5, 3)]
    assert first == again
    assert len(set(first)) == 3


def test_twfe_identity():
    cfg = DgpConfig(n=12, t=6, beta=[2.0, -1.0], seed=1)
    panel, truth = gen_twfe(cfg)
    x = np.stack([panel.columns["x1"], panel.columns["x2"]], axis=-1)
    rebuilt = x @ truth.beta + truth.alpha[:, None] + truth.gamma[None, :] + truth.u
    assert_allclose(panel.columns["y"], rebuilt)


def test_regressors_correlate_with_entity_effects():
    cfg = DgpConfig(n=4000, t=3, x_alpha_corr=0.6, fe_scale=2.0, seed=2)
    panel, truth = gen_twfe(cfg)
    corr = np.corrcoef(panel.columns["x1"][:, 0], truth.alpha)[0, 1]
    assert corr == pytest.approx(0.6, abs=0.05)


def test_spatial_identity():
    w = torus_weights(4, 5)
    cfg = DgpConfig(n=20, t=4, beta=[1.5], rho=0.5, delta=0.3, seed=6)
    panel, truth, w_out = gen_spatial(cfg, w)
    assert w_out is w
    y = panel.columns["y"]
    lhs = y - truth.rho * (w.dense() @ y)
    rhs = panel.columns["x1"] * 1.5 + truth.alpha[:, None] + truth.gamma[None, :] + truth.u
    assert_allclose(lhs, rhs, atol=1e-10)


def test_spatial_rejects_infeasible_rho():
    with pytest.raises(PanelValidationError, match="rho"):
        gen_spatial(DgpConfig(n=9, t=4, rho=1.2), torus_weights(3, 3))
    with pytest.raises(PanelValidationError):
        gen_spatial(DgpConfig(n=10, t=4), torus_weights(3, 3))


def test_default_lattice():
    _, _, w = gen_spatial(DgpConfig(n=49, t=3))
    assert w.n == 49
    assert_allclose(w.row_sums, 1.0)


def test_smooth_factors_orthonormal():
    f = smooth_factors(40, 2)
    assert_allclose(f.T @ f / 40, np.eye(2), atol=1e-10)


def test_factor_panel_shapes():
    panel, truth = gen_factor(DgpConfig(n=8, t=6, n_factors=2, seed=1))
    assert truth.factors.shape == (6, 2)
    assert truth.loadings.shape == (8, 2)
    assert panel.entities == entity_ids(8)


def test_blobs_centers_are_equidistant():
    f = gen_blobs(k=3, n=30, sigma=0.0, sep=10.0, seed=0)
    raw = f.raw.to_numpy()
    centers = np.array([raw[f.passive["planted"].to_numpy() == j].mean(axis=0) for j in (1, 2, 3)])
    dists = [np.linalg.norm(centers[i] - centers[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    assert_allclose(dists, 10.0)


def test_dump_csvs(tmp_path):
    panel, _, w = gen_spatial(DgpConfig(n=9, t=3), torus_weights(3, 3))
    written = dump_csvs(tmp_path, panel=panel, w=w, features=gen_blobs(k=2, n=10))
    assert set(written) == {"panel", "adjacency", "features"}
    frame = pd.read_csv(written["panel"], dtype={"fips": str})
    assert list(frame.columns[:2]) == ["fips", "year"]
    assert len(frame) == 27
    edges = pd.read_csv(written["adjacency"], dtype=str)
    assert len(edges) == 18
    assert (edges["fips_a"] < edges["fips_b"]).all()
