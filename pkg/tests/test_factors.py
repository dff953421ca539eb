import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import PanelValidationError
from src.estimation.factors import (
    fit_htt, principal_factors, roughness, second_difference, select_factors, smoother,
)
from src.estimation.spec import ModelSpec
from src.estimation.twfe import fit_twfe
from src.estimation import factors
from src.synth.generators import DgpConfig, gen_factor, gen_twfe

SPEC = ModelSpec(dependent="y", regressors=("x1",), name="htt")


def test_zero_factors_is_twfe(twfe_data, twfe_spec):
    panel, _ = twfe_data
    htt = fit_htt(twfe_spec, panel, d=0)
    twfe = fit_twfe(twfe_spec, panel)
    assert_allclose(htt.params, twfe.params, rtol=1e-8)
    assert htt.converged


def test_factor_count_bounds(twfe_data, twfe_spec):
    panel, _ = twfe_data
    with pytest.raises(PanelValidationError):
        fit_htt(twfe_spec, panel, d=panel.n_years)


def test_second_difference_annihilates_lines():
    d = second_difference(6)
    assert d.shape == (4, 6)
    assert_allclose(d @ (2.0 + 3.0 * np.arange(6)), 0.0)


def test_smoother_preserves_lines():
    h = smoother(8, 50.0)
    line = 1.0 - 0.5 * np.arange(8)
    assert_allclose(h @ line, line, atol=1e-10)
    assert_allclose(h, h.T)


def test_principal_factors_normalization():
    rng = np.random.default_rng(0)
    e = rng.standard_normal((20, 9))
    f, lam = principal_factors(e, 2)
    assert_allclose(f.T @ f, 9.0 * np.eye(2), atol=1e-9)
    gram = lam.T @ lam
    assert abs(gram[0, 1]) < 1e-9


def test_roughness_of_zigzag():
    assert roughness(np.arange(5.0)[:, None]) == pytest.approx(0.0)
    zigzag = np.array([[1.0], [-1.0], [1.0], [-1.0], [1.0]])
    assert roughness(zigzag) == pytest.approx(48.0)


def test_factor_selection_scree():
    cfg = DgpConfig(n=20, t=10, beta=[1.0], n_factors=1, factor_scale=2.0, sigma=0.3, seed=4)
    panel, _ = gen_factor(cfg)
    selection = select_factors(SPEC, panel, d_max=1)
    assert list(selection.criteria["d"]) == [0, 1]
    assert np.all(np.diff(selection.eigenvalues) <= 1e-12)
    assert np.all((selection.shares >= 0) & (selection.shares <= 1))
    assert selection.cumulative[-1] == pytest.approx(1.0)
    assert selection.fits[0].d == 0
    with pytest.raises(PanelValidationError):
        select_factors(SPEC, panel, d_max=9)


@pytest.mark.slow
def test_one_factor_removes_confounding():
    cfg = DgpConfig(n=40, t=15, beta=[1.0], n_factors=1, factor_scale=2.0, sigma=0.3, seed=8)
    panel, truth = gen_factor(cfg)
    htt = fit_htt(SPEC, panel, d=1)
    twfe = fit_twfe(SPEC, panel)
    assert htt.converged
    assert abs(htt.params[0] - truth.beta[0]) < abs(twfe.params[0] - truth.beta[0])
    assert htt.params[0] == pytest.approx(1.0, abs=0.1)
    assert htt.factors.shape == (15, 1)


def test_max_iter_must_be_positive(twfe_data, twfe_spec):
    panel, _ = twfe_data
    with pytest.raises(PanelValidationError, match="max_iter"):
        fit_htt(twfe_spec, panel, d=1, max_iter=0)


def test_unsmoothed_ssr_history_never_increases():
    cfg = DgpConfig(n=25, t=10, beta=[1.0], n_factors=1, factor_scale=1.0, sigma=0.5, seed=5)
    panel, _ = gen_factor(cfg)
    htt = fit_htt(SPEC, panel, d=1, smoothing=0.0)
    history = np.asarray(htt.history)
    assert history.size >= 1
    assert np.all(np.diff(history) <= 1e-9 * history[0])


@pytest.mark.parametrize("flip", [False, True])
def test_beta_ignores_factor_sign_and_rotation(monkeypatch, flip):
    cfg = DgpConfig(n=25, t=10, beta=[1.0], n_factors=2, factor_scale=1.5, sigma=0.3, seed=6)
    panel, _ = gen_factor(cfg)
    base = fit_htt(SPEC, panel, d=2, smoothing=1.0)

    angle = 0.7
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    if flip:
        rotation = rotation @ np.diag([-1.0, 1.0])
    original = factors.principal_factors

    def rotated(e_smooth, d):
        f, lam = original(e_smooth, d)
        return f @ rotation, lam @ rotation

    monkeypatch.setattr(factors, "principal_factors", rotated)
    turned = fit_htt(SPEC, panel, d=2, smoothing=1.0)
    assert_allclose(turned.params, base.params, rtol=1e-8)
    assert_allclose(turned.loadings @ turned.factors.T, base.loadings @ base.factors.T, atol=1e-8)
    assert turned.history == pytest.approx(base.history, rel=1e-8)


@pytest.mark.slow
def test_selection_finds_no_factors_in_white_noise():
    cfg = DgpConfig(n=30, t=12, beta=[1.0], seed=11)
    panel, _ = gen_twfe(cfg)
    selection = select_factors(SPEC, panel, d_max=2)
    assert selection.best_bic == 0


@pytest.mark.slow
def test_selection_finds_two_factors():
    cfg = DgpConfig(n=40, t=15, beta=[1.0], n_factors=2, factor_scale=2.0, sigma=0.3, seed=12)
    panel, _ = gen_factor(cfg)
    selection = select_factors(SPEC, panel, d_max=3)
    assert selection.best_bic == 2


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_estimated_factor_tracks_truth(seed):
    cfg = DgpConfig(n=40, t=15, beta=[1.0], n_factors=1, factor_scale=2.0, sigma=0.3, seed=seed)
    panel, truth = gen_factor(cfg)
    htt = fit_htt(SPEC, panel, d=1)
    corr = np.corrcoef(htt.factors[:, 0], truth.factors[:, 0])[0, 1]
    assert abs(corr) > 0.95
