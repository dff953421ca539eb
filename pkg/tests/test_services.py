import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.database.database import session_scope
from src.database.models import InputFile, Run
from src.errors import EstimationError, PanelValidationError
from src.estimation.design import ModelSpecConfig
from src.report.manifest import RunManifest
from src.services.estimation_service import EstimationService, load_fits
from src.services.workspace_service import WorkspaceService, load_panel, missingness_report, save_panel
from src.settings import ToolkitSettings
from src.synth.generators import DgpConfig, dump_csvs, gen_blobs, gen_spatial, torus_weights


@pytest.fixture
def csv_inputs(tmp_path):
    panel, _, w = gen_spatial(DgpConfig(n=16, t=6, rho=0.3, seed=8), torus_weights(4, 4))
    return dump_csvs(tmp_path / "inputs", panel=panel, w=w, features=gen_blobs(k=2, n=16, seed=1))


@pytest.fixture
def store(tmp_path, csv_inputs):
    store = WorkspaceService(tmp_path / "ws")
    store.ingest(csv_inputs["panel"], csv_inputs["adjacency"], csv_inputs["features"])
    return store


def test_panel_npz_roundtrip(tmp_path, unbalanced_panel):
    save_panel(unbalanced_panel, tmp_path / "p.npz")
    back = load_panel(tmp_path / "p.npz")
    assert back.entities == unbalanced_panel.entities
    assert back.years == unbalanced_panel.years
    assert_allclose(back.columns["x1"], unbalanced_panel.columns["x1"])
    assert (back.masks["x1"] == unbalanced_panel.masks["x1"]).all()


def test_missingness(unbalanced_panel):
    report = missingness_report(unbalanced_panel).set_index("variable")
    assert report.loc["x1", "missing"] == unbalanced_panel.masks["x1"].sum()
    assert report.loc["y", "missing"] == 0


def test_ingest_and_load(store):
    ws = store.load()
    assert ws.panel.n_entities == 16
    assert ws.panel.n_years == 6
    assert ws.require_weights().n == 16
    assert list(ws.features["fips"]) == list(ws.panel.entities)
    with session_scope(store.session_factory) as db:
        run = db.query(Run).one()
        assert run.command == "ingest"
        kinds = sorted(i.kind for i in db.query(InputFile).all())
    assert kinds == ["adjacency", "features", "panel"]


def test_workspace_without_weights(tmp_path, csv_inputs):
    store = WorkspaceService(tmp_path / "bare")
    store.ingest(csv_inputs["panel"])
    ws = store.load()
    with pytest.raises(PanelValidationError, match="no spatial weights"):
        ws.require_weights()
    with pytest.raises(PanelValidationError, match="no features"):
        ws.require_features()


def test_load_requires_ingest(tmp_path):
    with pytest.raises(PanelValidationError, match="run ingest first"):
        WorkspaceService(tmp_path / "missing").load()


def test_fips_remap(tmp_path, csv_inputs):
    remap = tmp_path / "remap.csv"
    remap.write_text("old,new\n1,99001\n")
    store = WorkspaceService(tmp_path / "remapped")
    store.ingest(csv_inputs["panel"], fips_remap_csv=remap)
    entities = store.load().panel.entities
    assert "99001" in entities
    assert "00001" not in entities


def test_run_persist_and_reload(store):
    ws = store.load()
    service = EstimationService(ws, ToolkitSettings(), store)
    configs = [
        ModelSpecConfig(name="twfe", dependent={"var": "y", "difference": False},
                        treatment={"var": "x1", "difference": False}),
        ModelSpecConfig(name="slm", estimator="slm", dependent={"var": "y", "difference": False},
                        treatment={"var": "x1", "difference": False}),
    ]
    outcomes, failures = service.run_all(configs, seed=1, n_sim=100)
    assert not failures
    assert outcomes[0].impacts is None
    assert outcomes[1].impacts is not None
    run_id = store.record_run(RunManifest(command="estimate", seeds={"seed": 1}))
    ids = [service.persist(run_id, o) for o in outcomes]
    stored = load_fits(store, ids)
    assert [s.model_name for s in stored] == ["twfe", "slm"]
    assert stored[0].residuals.shape == (16, 6)
    assert_allclose(stored[0].residuals, outcomes[0].fit.residual_matrix())
    assert stored[1].payload["coefficients"][0]["term"] == "x1"
    with pytest.raises(PanelValidationError, match="Unknown fit"):
        load_fits(store, [999])


def test_estimation_failures_are_collected(store, monkeypatch):
    service = EstimationService(store.load(), ToolkitSettings(), store)
    real_fit = service.fit

    def failing_fit(design):
        if design.config.name == "bad":
            raise EstimationError("singular design")
        return real_fit(design)

    monkeypatch.setattr(service, "fit", failing_fit)
    configs = [
        ModelSpecConfig(name=name, dependent={"var": "y", "difference": False},
                        treatment={"var": "x1", "difference": False})
        for name in ("bad", "good")
    ]
    outcomes, failures = service.run_all(configs, seed=0)
    assert [o.config.name for o in outcomes] == ["good"]
    assert failures[0][0] == "bad"
    assert np.isfinite(outcomes[0].fit.loglik)
