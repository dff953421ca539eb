from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.errors import PanelValidationError
from src.estimation.design import ModelSpecConfig, build_design, load_spec_file
from src.estimation.twfe import fit_twfe
from src.panel.dataset import PanelDataset

PRESETS = Path(__file__).resolve().parents[1] / "config" / "presets"


@pytest.fixture(scope="module")
def county_panel():
    rng = np.random.default_rng(21)
    n, t = 40, 10
    entities = tuple(str(1001 + 2 * i).zfill(5) for i in range(n))
    mines = rng.integers(0, 6, size=(n, t)).astype(float)
    mines[:8] = 0.0
    gdp = np.exp(rng.normal(10.0, 0.5, size=(n, t)))
    pop = np.exp(rng.normal(9.0, 0.3, size=(n, t)))
    columns = {
        "active_mines": mines,
        "unemployment_rate": 5.0 + 0.3 * mines + rng.normal(0.0, 0.5, size=(n, t)),
        "real_gdp": gdp,
        "real_gdp_pc": gdp / pop,
        "population": pop,
        "re_investment": gdp * rng.uniform(0.0, 0.002, size=(n, t)),
    }
    return PanelDataset(entities, tuple(range(2001, 2001 + t)), columns, {})


def _config(**overrides):
    base = {
        "name": "m",
        "dependent": {"var": "unemployment_rate"},
        "treatment": {"var": "active_mines", "label": "Active Mines", "lags": [0, 1, 2]},
        "controls": [{"var": "real_gdp_pc", "log": True}],
    }
    base.update(overrides)
    return ModelSpecConfig(**base)


def test_presets_parse():
    files = sorted(PRESETS.glob("*.yaml"))
    assert files
    for path in files:
        configs = load_spec_file(path)
        assert configs, path.name
        assert len({c.name for c in configs}) == len(configs)


def test_baseline_terms_and_labels(county_panel):
    design = build_design(_config(), county_panel)
    spec = design.spec
    assert spec.dependent == "d_unemployment_rate"
    assert spec.regressors == (
        "d_active_mines", "L1_d_active_mines", "L2_d_active_mines", "d_log_real_gdp_pc",
    )
    assert spec.labels["L1_d_active_mines"] == "Δ Active Mines_t-1"
    assert spec.horizons["L2_d_active_mines"] == 2
    assert "Sum of lagged effects" in design.combinations


def test_lead_terms(county_panel):
    cfg = _config(treatment={"var": "active_mines", "lags": [0, 1, 2], "leads": [1]})
    design = build_design(cfg, county_panel)
    assert "F1_d_active_mines" in design.spec.regressors
    assert design.spec.horizons["F1_d_active_mines"] == -1
    # leads stay out of the cumulative effect
    assert "F1_d_active_mines" not in design.combinations["Sum of lagged effects"]


def test_asymmetric_parameterizations_share_fit(county_panel):
    a = _config(name="a", interactions=[{"kind": "sign_negative"}])
    b = _config(name="b", interactions=[{"kind": "sign_positive"}])
    c = _config(
        name="c", include_treatment=False,
        interactions=[{"kind": "sign_negative"}, {"kind": "sign_positive"}],
    )
    designs = [build_design(cfg, county_panel) for cfg in (a, b, c)]
    fits = [fit_twfe(d.spec, d.panel) for d in designs]
    assert fits[0].nobs == fits[1].nobs == fits[2].nobs
    assert fits[1].within_r2 == pytest.approx(fits[0].within_r2, rel=1e-8)
    assert fits[2].within_r2 == pytest.approx(fits[0].within_r2, rel=1e-8)
    # the negative-change slope of (c) equals main effect plus interaction in (a)
    fa, fc = fits[0], fits[2]
    neg_a = fa.coef("d_active_mines") + fa.coef("d_active_mines_x_d_active_mines_neg")
    assert fc.coef("d_active_mines_x_d_active_mines_neg") == pytest.approx(neg_a, rel=1e-6)


def test_threshold_interaction_with_levels(county_panel):
    cfg = _config(interactions=[{
        "kind": "threshold", "name": "ree", "numerator": "re_investment",
        "denominator": "real_gdp", "threshold": 0.001, "include_level": True,
    }])
    design = build_design(cfg, county_panel)
    assert len(design.spec.regressors) == 10
    fit = fit_twfe(design.spec, design.panel)
    assert fit.k == 10
    assert len(design.combinations) == 4


def test_threshold_interaction_at_selected_horizons(county_panel):
    cfg = _config(interactions=[{
        "kind": "threshold", "name": "ree", "numerator": "re_investment",
        "denominator": "real_gdp", "threshold": 0.001, "include_level": True, "horizons": [1, 2],
    }])
    design = build_design(cfg, county_panel)
    assert len(design.spec.regressors) == 8
    assert not any(r.startswith("d_active_mines_x") for r in design.spec.regressors)


def test_entity_interaction_needs_features(county_panel):
    cfg = _config(interactions=[{"kind": "entity", "name": "rural", "attribute": "rural_urban", "cutoff": 4}])
    with pytest.raises(PanelValidationError, match="rural_urban"):
        build_design(cfg, county_panel)
    features = pd.DataFrame({
        "fips": list(county_panel.entities),
        "rural_urban": [(i % 9) + 1 for i in range(county_panel.n_entities)],
    })
    design = build_design(cfg, county_panel, features=features)
    assert "d_active_mines_x_rural" in design.spec.regressors
    assert design.spec.labels["d_active_mines_x_rural"] == "Δ Active Mines_t × rural"


def test_coal_sample(county_panel):
    design = build_design(_config(sample="coal"), county_panel)
    fit = fit_twfe(design.spec, design.panel)
    assert fit.n_entities == county_panel.n_entities - 8


def test_groups_required(county_panel):
    cfg = _config(groups={"path": "labels.csv"})
    with pytest.raises(PanelValidationError, match="group labels"):
        build_design(cfg, county_panel)


def test_config_rejects_bad_horizons():
    with pytest.raises(ValueError):
        _config(treatment={"var": "active_mines", "lags": [0, 0]})
    with pytest.raises(ValueError):
        _config(include_treatment=False)


def test_bad_spec_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("name: m\nestimator: ols\n")
    with pytest.raises(PanelValidationError, match="Invalid spec file"):
        load_spec_file(path)
