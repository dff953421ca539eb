import json

import pytest

from src.cli.main import EXIT_DIAGNOSTICS, EXIT_OK, EXIT_VALIDATION, main
from src.report.tables import read_table

SPEC = """\
models:
  - name: within
    dependent: {var: y, difference: false}
    treatment: {var: x1, difference: false}
  - name: lag
    estimator: slm
    dependent: {var: y, difference: false}
    treatment: {var: x1, difference: false}
"""


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    data = tmp_path / "data"
    assert main(["synth", "--kind", "spatial", "--out", str(data), "--n", "25", "--rows", "5",
                 "--t", "6", "--rho", "0.3", "--seed", "2"]) == EXIT_OK
    ws = tmp_path / "ws"
    code = main(["ingest", "--workspace", str(ws), "--panel", str(data / "panel.csv"),
                 "--adjacency", str(data / "adjacency.csv")])
    assert code == EXIT_OK
    return ws


def test_ingest_outputs(workspace):
    summary = read_table(workspace / "outputs" / "ingest" / "summary_statistics.csv")
    assert set(summary["variable"]) == {"y", "x1"}
    first = (workspace / "outputs" / "ingest" / "missingness.csv").read_text().splitlines()[0]
    assert first.startswith("# manifest: ")


def test_estimate_then_diagnose(workspace, tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC)
    out = tmp_path / "est"
    code = main(["estimate", "--workspace", str(workspace), "--spec", str(spec), "--sims", "100",
                 "--out", str(out), "--seed", "1"])
    assert code == EXIT_OK
    coefs = read_table(out / "within_coefficients.csv")
    assert coefs.loc[0, "term"] == "x1"
    assert (out / "lag_impacts.csv").exists()
    assert not (out / "within_impacts.csv").exists()
    assert "within" in (out / "regression.txt").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {"seed": 1}

    code = main(["diagnose", "--workspace", str(workspace), "--out", str(tmp_path / "diag")])
    assert code in (EXIT_OK, EXIT_DIAGNOSTICS)
    table = read_table(tmp_path / "diag" / "csd.csv")
    assert len(table) == 2 * 3


def test_diagnose_variables_json(workspace, tmp_path):
    code = main(["diagnose", "--workspace", str(workspace), "--variables", "y", "--format", "json",
                 "--out", str(tmp_path / "diag")])
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "diag" / "csd.json").read_text())
    assert {row["series"] for row in payload["rows"]} == {"y (raw)", "y (pooled OLS residuals)"}


def test_cluster_features_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["synth", "--kind", "blobs", "--out", str(tmp_path), "--n", "30", "--sigma", "0.1", "--seed", "3"]) == EXIT_OK
    out = tmp_path / "clusters"
    code = main(["cluster", "--features", str(tmp_path / "features.csv"), "--passive", "planted",
                 "--k-max", "5", "--refs", "50", "--out", str(out)])
    assert code == EXIT_OK
    labels = read_table(out / "labels.csv")
    assert sorted(labels["type"].value_counts()) == [10, 10, 10]
    choice = read_table(out / "k_choice.csv").set_index("criterion")
    assert choice.loc["gap", "k"] == 3


def test_missing_workspace_is_validation_error(tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC)
    code = main(["estimate", "--workspace", str(tmp_path / "nowhere"), "--spec", str(spec)])
    assert code == EXIT_VALIDATION


def test_unknown_model_name(workspace, tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC)
    code = main(["estimate", "--workspace", str(workspace), "--spec", str(spec), "--model", "absent"])
    assert code == EXIT_VALIDATION


def test_manifests_hash_workspace_inputs(workspace, tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC)
    assert main(["estimate", "--workspace", str(workspace), "--spec", str(spec), "--sims", "50",
                 "--out", str(tmp_path / "est"), "--seed", "1"]) == EXIT_OK
    manifest = json.loads((tmp_path / "est" / "manifest.json").read_text())
    assert {entry["kind"] for entry in manifest["inputs"]} == {"spec", "panel", "weights"}

    code = main(["diagnose", "--workspace", str(workspace), "--fits", "1", "--out", str(tmp_path / "diag")])
    assert code in (EXIT_OK, EXIT_DIAGNOSTICS)
    diag = json.loads((tmp_path / "diag" / "manifest.json").read_text())
    assert diag["options"]["fit_ids"] == [1]
    assert {entry["kind"] for entry in diag["inputs"]} == {"panel", "weights"}

    other = tmp_path / "other"
    assert main(["synth", "--kind", "spatial", "--out", str(other / "data"), "--n", "25", "--rows", "5",
                 "--t", "6", "--rho", "0.3", "--seed", "3"]) == EXIT_OK
    assert main(["ingest", "--workspace", str(other / "ws"), "--panel", str(other / "data" / "panel.csv"),
                 "--adjacency", str(other / "data" / "adjacency.csv")]) == EXIT_OK
    assert main(["estimate", "--workspace", str(other / "ws"), "--spec", str(spec), "--sims", "50",
                 "--out", str(other / "est"), "--seed", "1"]) == EXIT_OK
    first = (tmp_path / "est" / "within_coefficients.csv").read_text().splitlines()[0]
    second = (other / "est" / "within_coefficients.csv").read_text().splitlines()[0]
    assert first.startswith("# manifest: ")
    assert first != second


def _full_run(root, monkeypatch):
    root.mkdir()
    monkeypatch.chdir(root)
    assert main(["synth", "--kind", "spatial", "--out", "data", "--n", "24", "--rows", "4",
                 "--t", "6", "--rho", "0.4", "--seed", "5"]) == EXIT_OK
    assert main(["synth", "--kind", "blobs", "--out", "data", "--n", "24", "--sigma", "0.2", "--seed", "5"]) == EXIT_OK
    assert main(["ingest", "--workspace", "ws", "--panel", "data/panel.csv",
                 "--adjacency", "data/adjacency.csv", "--features", "data/features.csv"]) == EXIT_OK
    (root / "spec.yaml").write_text(SPEC)
    assert main(["estimate", "--workspace", "ws", "--spec", "spec.yaml", "--sims", "200",
                 "--seed", "7", "--out", "est"]) == EXIT_OK
    assert main(["cluster", "--workspace", "ws", "--passive", "planted", "--k-max", "5", "--refs", "50",
                 "--seed", "7", "--out", "clusters"]) == EXIT_OK
    tables = ["est/within_coefficients.csv", "est/lag_coefficients.csv", "est/lag_impacts.csv",
              "est/regression.txt", "clusters/k_curves.csv", "clusters/type_profile.csv", "clusters/labels.csv"]
    hashes = [json.loads((root / d / "manifest.json").read_text())["hash"] for d in ("est", "clusters")]
    return {name: (root / name).read_bytes() for name in tables}, hashes


def test_identical_seeds_give_identical_outputs(tmp_path, monkeypatch):
    first, first_hashes = _full_run(tmp_path / "one", monkeypatch)
    second, second_hashes = _full_run(tmp_path / "two", monkeypatch)
    assert first_hashes == second_hashes
    for name, content in first.items():
        assert content == second[name], name


def test_cluster_features_file_rejects_coal_subset(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["synth", "--kind", "blobs", "--out", str(tmp_path), "--n", "30", "--seed", "3"]) == EXIT_OK
    code = main(["cluster", "--features", str(tmp_path / "features.csv"), "--subset", "coal",
                 "--out", str(tmp_path / "clusters")])
    assert code == EXIT_VALIDATION
    assert not (tmp_path / "clusters").exists()
