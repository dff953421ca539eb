import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import EstimationError
from src.estimation.impacts import impact_multipliers, impacts
from src.estimation.spatial import audit_likelihood, fit_sarar, fit_sem, fit_slm
from src.estimation.spec import ModelSpec
from src.estimation.twfe import fit_twfe
from src.synth.generators import DgpConfig, gen_spatial, torus_weights

SPEC = ModelSpec(dependent="y", regressors=("x1",), name="spatial")


@pytest.fixture(scope="module")
def slm_fit(spatial_data):
    panel, _, w = spatial_data
    return fit_slm(SPEC, panel, w)


@pytest.fixture(scope="module")
def error_data():
    cfg = DgpConfig(n=49, t=10, beta=[1.0], delta=0.4, sigma=0.5, seed=9)
    return gen_spatial(cfg, torus_weights(7, 7))


def test_slm_at_zero_rho_is_twfe(spatial_data):
    panel, _, w = spatial_data
    slm = fit_slm(SPEC, panel, w, fix_rho=0.0)
    twfe = fit_twfe(SPEC, panel)
    assert_allclose(slm.params, twfe.params, rtol=1e-6)
    assert slm.param_names == ("x1", "sigma2")


def test_sem_at_zero_delta_is_twfe(error_data):
    panel, _, w = error_data
    sem = fit_sem(SPEC, panel, w, fix_delta=0.0)
    twfe = fit_twfe(SPEC, panel)
    assert_allclose(sem.params, twfe.params, rtol=1e-6)


def test_slm_recovers_rho(spatial_data, slm_fit):
    _, truth, _ = spatial_data
    assert slm_fit.rho == pytest.approx(truth.rho, abs=0.1)
    assert slm_fit.params[0] == pytest.approx(1.0, abs=0.1)
    assert slm_fit.rho_se > 0
    assert slm_fit.param_names == ("x1", "rho", "sigma2")


def test_slm_optimum_passes_grid_audit(slm_fit):
    audit = audit_likelihood(slm_fit, n_points=200)
    assert audit.passed


def test_sem_recovers_delta(error_data):
    panel, truth, w = error_data
    sem = fit_sem(SPEC, panel, w)
    assert sem.delta == pytest.approx(truth.delta, abs=0.12)
    assert sem.rho is None
    assert audit_likelihood(sem, n_points=200).passed


def test_sarar_with_zero_delta_is_slm(spatial_data, slm_fit):
    panel, _, w = spatial_data
    sarar = fit_sarar(SPEC, panel, w, fix_delta=0.0)
    assert sarar.rho == pytest.approx(slm_fit.rho, abs=1e-4)
    assert sarar.loglik == pytest.approx(slm_fit.loglik, rel=1e-8)
    assert_allclose(sarar.params, slm_fit.params, rtol=1e-3)


def test_sarar_with_zero_rho_is_sem(error_data):
    panel, _, w = error_data
    sem = fit_sem(SPEC, panel, w)
    sarar = fit_sarar(SPEC, panel, w, fix_rho=0.0)
    assert sarar.delta == pytest.approx(sem.delta, abs=1e-4)
    assert sarar.loglik == pytest.approx(sem.loglik, rel=1e-8)


def test_information_criteria_count_spatial_parameter(slm_fit):
    n_params = slm_fit.k + slm_fit.n_fe + 2
    assert slm_fit.aic == pytest.approx(-2 * slm_fit.loglik + 2 * n_params)


@pytest.mark.slow
def test_sarar_joint_search():
    cfg = DgpConfig(n=49, t=10, beta=[1.0], rho=0.3, delta=0.3, sigma=0.5, seed=4)
    panel, _, w = gen_spatial(cfg, torus_weights(7, 7))
    fit = fit_sarar(SPEC, panel, w)
    lo, hi = w.feasible_interval()
    assert lo < fit.rho < hi and lo < fit.delta < hi
    assert fit.params[0] == pytest.approx(1.0, abs=0.15)
    assert np.all(np.isfinite(np.diag(fit.vcov)))
    assert audit_likelihood(fit, n_points=100).passed


def test_regular_graph_total_multiplier():
    w = torus_weights(5, 5)
    direct, total = impact_multipliers(w, 0.5)
    assert total == pytest.approx(2.0)
    assert direct == pytest.approx(np.mean(1.0 / (1.0 - 0.5 * w.eigenvalues)))
    assert 1.0 < direct < total


def test_impacts_decompose_total(slm_fit):
    result = impacts(slm_fit, n_sim=200, seed=3)
    assert_allclose(result.direct + result.indirect, result.total)
    assert_allclose(result.total, slm_fit.params / (1.0 - slm_fit.rho))
    assert np.all(result.se_total > 0)
    again = impacts(slm_fit, n_sim=200, seed=3)
    assert_allclose(again.se_direct, result.se_direct)
    frame = result.to_frame()
    assert set(frame['effect']) == {'direct', 'indirect', 'total'}


def test_sem_impacts_have_no_spillover(error_data):
    panel, _, w = error_data
    sem = fit_sem(SPEC, panel, w)
    result = impacts(sem, n_sim=100, seed=0)
    assert_allclose(result.direct, sem.params)
    assert_allclose(result.indirect, 0.0)


def test_impacts_need_enough_draws(slm_fit):
    with pytest.raises(EstimationError):
        impacts(slm_fit, n_sim=10)
