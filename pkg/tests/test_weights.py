import numpy as np
import pytest
import scipy.sparse as sp

from src.errors import EstimationError, PanelValidationError
from src.synth.generators import random_graph_weights, torus_weights
from src.weights.adjacency import parse_adjacency, read_adjacency
from src.weights.spatial_weights import align_weights, from_adjacency_matrix, row_normalize, spectrum, spmv


def test_parse_collapses_duplicates_and_self_pairs():
    lines = ["fips_a,fips_b", "1001,1003", "01003,01001", "1005,1005", "01001,01007", ""]
    g = parse_adjacency(lines)
    assert g.nodes == ("01001", "01003", "01005", "01007")
    assert len(g.edges) == 2
    assert g.degree("01001") == 2
    assert g.degree("01005") == 0


def test_parse_restricts_to_universe():
    g = parse_adjacency(["01001,01003", "01005,01007"], universe=["01001", "01003", "01009"])
    assert g.nodes == ("01001", "01003", "01009")
    assert g.dropped_nodes == 2
    assert g.degree("01009") == 0


def test_parse_rejects_malformed_fips():
    with pytest.raises(PanelValidationError, match="line 2"):
        parse_adjacency(["01001,01003", "1x,01001"])


def test_components_largest_first():
    g = parse_adjacency(["01001,01003", "01003,01005", "01007,01009"])
    assert g.components() == [["01001", "01003", "01005"], ["01007", "01009"]]


def test_row_normalize_path_with_isolate():
    g = parse_adjacency(["01001,01003", "01003,01005"], universe=["01001", "01003", "01005", "01007"])
    w = row_normalize(g, g.nodes)
    dense = w.dense()
    np.testing.assert_allclose(dense[1], [0.5, 0.0, 0.5, 0.0])
    np.testing.assert_allclose(w.row_sums, [1.0, 1.0, 1.0, 0.0])
    assert list(w.isolated) == [False, False, False, True]


@pytest.mark.parametrize("rho", [-0.6, 0.0, 0.3, 0.85])
def test_logdet_matches_dense_determinant(rho):
    w = random_graph_weights(40, mean_degree=5.0, seed=2)
    sign, expected = np.linalg.slogdet(np.eye(w.n) - rho * w.dense())
    assert sign > 0
    assert w.logdet(rho) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_trace_inverse_spectrum_matches_solve():
    w = random_graph_weights(30, mean_degree=4.0, seed=7)
    assert w.trace_inverse(0.5) == pytest.approx(w.trace_inverse_solve(0.5), rel=1e-9)


def test_torus_feasible_interval():
    w = torus_weights(4, 4)
    lo, hi = w.feasible_interval()
    assert lo == pytest.approx(-1.0)
    assert hi == pytest.approx(1.0)
    np.testing.assert_allclose(w.row_sums, 1.0)


def test_solve_outside_interval_raises():
    w = torus_weights(3, 3)
    with pytest.raises(EstimationError):
        w.solve(1.0, np.ones(w.n))


def test_spmv_matches_dense_product():
    w = torus_weights(3, 4)
    y = np.arange(24.0).reshape(12, 2)
    np.testing.assert_allclose(spmv(w, y), w.dense() @ y)
    with pytest.raises(PanelValidationError, match="Dimension mismatch"):
        spmv(w, np.ones(5))
    eig = spectrum(w)
    assert eig[-1] == pytest.approx(1.0)
    assert np.all(np.diff(eig) >= -1e-12)


def test_save_load(tmp_path):
    w = torus_weights(3, 4)
    w.save(tmp_path / "w.npz")
    loaded = type(w).load(tmp_path / "w.npz")
    assert loaded.ids == w.ids
    np.testing.assert_allclose(loaded.dense(), w.dense())
    np.testing.assert_allclose(loaded.eigenvalues, w.eigenvalues)


def test_align_weights_renormalizes_subset():
    adj = sp.csr_matrix(np.array([
        [0, 1, 1],
        [1, 0, 1],
        [1, 1, 0],
    ], dtype=float))
    w = from_adjacency_matrix(("a", "b", "c"), adj)
    sub = align_weights(w, ("a", "b"))
    np.testing.assert_allclose(sub.dense(), [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(PanelValidationError):
        align_weights(w, ("a", "z"))


def test_triangle_spectrum():
    adj = sp.csr_matrix(np.ones((3, 3)) - np.eye(3))
    w = from_adjacency_matrix(("00001", "00002", "00003"), adj)
    np.testing.assert_allclose(spectrum(w), [-0.5, -0.5, 1.0], atol=1e-12)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(w.dense()).real), [-0.5, -0.5, 1.0], atol=1e-12)


def test_read_adjacency_matches_line_parser(tmp_path):
    lines = ["fips_a,fips_b", "1001,1003", "01003,01001", "1005,1005", "01001,01007"]
    path = tmp_path / "adjacency.csv"
    path.write_text("\n".join(lines) + "\n")
    g = read_adjacency(path)
    assert g == parse_adjacency(lines)
    assert g.degree("01001") == 2


def test_read_adjacency_without_header_and_tabs(tmp_path):
    path = tmp_path / "adjacency.tsv"
    path.write_text("01001\t01003\n01003\t01005\n")
    g = read_adjacency(path, universe=["01001", "01003", "01005", "01009"])
    assert g.nodes == ("01001", "01003", "01005", "01009")
    assert len(g.edges) == 2


def test_read_adjacency_rejects_bad_rows(tmp_path):
    path = tmp_path / "adjacency.csv"
    path.write_text("fips_a,fips_b\n01001,01003\n1x,01001\n")
    with pytest.raises(PanelValidationError, match="line 3"):
        read_adjacency(path)
    path.write_text("01001\n01003\n")
    with pytest.raises(PanelValidationError, match="two FIPS columns"):
        read_adjacency(path)
