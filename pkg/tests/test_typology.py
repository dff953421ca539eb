import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from src.errors import PanelValidationError
from src.estimation.design import read_group_labels
from src.synth.generators import gen_blobs
from src.typology.clustering import (
    COUNT_ROW, REFERENCE_COLUMN, choose_k, cluster_features, cut_and_label, elbow_choice, gap_choice,
    hclust_ward, wss, write_labels,
)
from src.typology.features import split_columns, standardize


@pytest.fixture(scope="module")
def blobs():
    return gen_blobs(k=3, n=60, sigma=0.1, sep=10.0, seed=4)


@pytest.fixture
def county_features():
    rng = np.random.default_rng(6)
    n = 24
    strong = np.arange(n) < 12
    return pd.DataFrame({
        "fips": [str(1001 + 2 * i).zfill(5) for i in range(n)],
        "rural_urban": np.where(strong, 2, 8) + rng.integers(0, 2, n),
        "population": np.where(strong, 200_000.0, 8_000.0) * rng.uniform(0.8, 1.2, n),
        "edu_attain": np.where(strong, 35.0, 12.0) + rng.normal(0, 1, n),
        "median_earnings": np.where(strong, 52_000.0, 31_000.0) + rng.normal(0, 500, n),
        "female_lfp": np.where(strong, 60.0, 48.0) + rng.normal(0, 1, n),
        "diversity_index": np.where(strong, 0.5, 0.2) + rng.normal(0, 0.02, n),
        "coal": (~strong).astype(int),
    })


def test_standardize_two_values():
    f = standardize(pd.DataFrame({"fips": ["01001", "01003"], "a": [1.0, 3.0]}))
    assert_allclose(f.z.ravel(), [-np.sqrt(0.5), np.sqrt(0.5)])
    assert_allclose(f.inverse().ravel(), [1.0, 3.0])


def test_standardize_is_idempotent(county_features):
    columns, passive = split_columns(county_features)
    f = standardize(county_features, columns, passive)
    again = pd.DataFrame(f.z, columns=f.names)
    again.insert(0, "fips", list(f.ids))
    assert_allclose(standardize(again).z, f.z, atol=1e-12)


def test_standardize_rejects_flat_column():
    frame = pd.DataFrame({"fips": ["1", "2", "3"], "a": [1.0, 2.0, 3.0], "b": [4.0, 4.0, 4.0]})
    with pytest.raises(PanelValidationError, match="'b'"):
        standardize(frame)


def test_standardize_excludes_incomplete_rows():
    frame = pd.DataFrame({"fips": ["1", "2", "3"], "a": [1.0, np.nan, 3.0], "b": [4.0, 5.0, 7.0]})
    f = standardize(frame)
    assert f.ids == ("1", "3")
    assert f.excluded == ("2",)


def test_split_columns_known_features(county_features):
    columns, passive = split_columns(county_features)
    assert "edu_attain" in columns and "coal" not in columns
    assert passive == ("coal",)


def test_two_points_merge_at_their_distance():
    f = standardize(pd.DataFrame({"fips": ["1", "2"], "a": [1.0, 3.0]}))
    dendro = hclust_ward(f)
    assert dendro.heights[0] == pytest.approx(np.sqrt(2.0))


def test_collinear_points_merge_nearest_first():
    f = standardize(pd.DataFrame({"fips": ["1", "2", "3"], "a": [0.0, 1.0, 3.0]}))
    codes = hclust_ward(f).cut(2)
    assert codes[0] == codes[1] != codes[2]


def test_wss_matches_merge_heights(blobs):
    dendro = hclust_ward(blobs)
    heights = dendro.heights
    n = blobs.n_rows
    for k in range(1, 7):
        expected = float(np.sum(heights[: n - k] ** 2) / 2.0)
        assert wss(blobs.z, dendro.cut(k)) == pytest.approx(expected, rel=1e-9)


def test_elbow_picks_chord_distance_maximum():
    ks = np.arange(1, 6)
    assert elbow_choice(ks, np.array([100.0, 20.0, 15.0, 12.0, 10.0])) == 2


def test_gap_rule_smallest_qualifying_k():
    ks = np.arange(1, 5)
    gap = np.array([0.1, 0.5, 0.55, 0.4])
    assert gap_choice(ks, gap, np.full(4, 0.1)) == 2
    assert gap_choice(ks, np.array([0.1, 0.2, 0.3, 0.4]), np.zeros(4)) == 4


def test_choose_k_validates_arguments(blobs):
    dendro = hclust_ward(blobs)
    with pytest.raises(PanelValidationError):
        choose_k(blobs, dendro, k_max=1)
    with pytest.raises(PanelValidationError):
        choose_k(blobs, dendro, k_max=4, n_refs=10)


def test_planted_blobs_recovered(blobs):
    result = cluster_features(blobs, k_max=6, n_refs=50, seed=0)
    assert result.selection.choice == {"elbow": 3, "silhouette": 3, "gap": 3}
    assert result.selection.unanimous
    assert result.selection.note == "All criteria choose k = 3"
    planted = blobs.passive["planted"].to_numpy()
    labels = result.typology.labels
    for blob in (1, 2, 3):
        assert len(set(labels[planted == blob])) == 1
    assert sorted(result.typology.sizes.values()) == [20, 20, 20]


def test_gap_curve_is_reproducible(blobs):
    dendro = hclust_ward(blobs)
    a = choose_k(blobs, dendro, k_max=5, n_refs=50, seed=7)
    b = choose_k(blobs, dendro, k_max=5, n_refs=50, seed=7)
    assert_allclose(a.gap, b.gap)
    assert np.isnan(a.silhouette[0])


def test_types_ordered_least_vulnerable_first(county_features):
    columns, passive = split_columns(county_features)
    f = standardize(county_features, columns, passive)
    typology = cut_and_label(hclust_ward(f), 2, f)
    strong = np.arange(24) < 12
    assert set(typology.labels[strong]) == {1}
    assert set(typology.labels[~strong]) == {2}
    profile = typology.profile
    assert profile.loc[COUNT_ROW, "Type 1"] == 12
    assert profile.loc[COUNT_ROW, REFERENCE_COLUMN] == 24
    # binary descriptors are counted per type
    assert profile.loc["coal", "Type 2"] == 12
    assert profile.loc["edu_attain", "Type 1"] > profile.loc["edu_attain", "Type 2"]


def test_labels_file_feeds_grouped_slopes(tmp_path, county_features):
    columns, passive = split_columns(county_features)
    f = standardize(county_features, columns, passive)
    typology = cut_and_label(hclust_ward(f), 2, f)
    path = write_labels(typology, tmp_path / "cluster" / "labels.csv")
    groups = read_group_labels(path)
    assert groups["01001"] == 1
    assert len(groups) == 24


@pytest.fixture
def diffuse_features():
    rng = np.random.default_rng(13)
    n = 30
    frame = pd.DataFrame(rng.standard_normal((n, 4)), columns=["a", "b", "c", "d"])
    frame.insert(0, "fips", [str(2001 + i).zfill(5) for i in range(n)])
    return frame


def _partition(ids, codes):
    groups = {}
    for fips, code in zip(ids, codes):
        groups.setdefault(code, set()).add(fips)
    return sorted(sorted(g) for g in groups.values())


def test_ward_partition_ignores_row_order(diffuse_features):
    f = standardize(diffuse_features)
    shuffled = diffuse_features.sample(frac=1.0, random_state=3).reset_index(drop=True)
    g = standardize(shuffled)
    assert list(g.ids) != list(f.ids)
    dendro_f, dendro_g = hclust_ward(f), hclust_ward(g)
    for k in range(2, 7):
        assert _partition(f.ids, dendro_f.cut(k)) == _partition(g.ids, dendro_g.cut(k))
    labels_f = cut_and_label(dendro_f, 3, f).to_frame().set_index("fips")["type"]
    labels_g = cut_and_label(dendro_g, 3, g).to_frame().set_index("fips")["type"]
    pd.testing.assert_series_equal(labels_f.sort_index(), labels_g.sort_index())


def test_silhouette_values_are_bounded(diffuse_features):
    f = standardize(diffuse_features)
    selection = choose_k(f, hclust_ward(f), k_max=8, n_refs=50, seed=1)
    sil = np.asarray(selection.silhouette[1:])
    assert np.all(np.isfinite(sil))
    assert np.all((sil >= -1.0) & (sil <= 1.0))
