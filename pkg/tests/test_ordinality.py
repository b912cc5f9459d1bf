import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import true_pair_label
from thermiid.errors import InvalidInputError
from thermiid.imagecore import normalize01, to_grayscale
from thermiid.ordinality import (
    SWAPPED,
    EdgeClassifierConfig,
    EdgeLabel,
    PairClassifierConfig,
    PairLabel,
    PointPair,
    PointPairSet,
    classify_edges,
    classify_pair,
    classify_pairs,
    default_pair_radius,
    export_labels,
    load_labels,
    sample_point_pairs,
)
from thermiid.simulate import SceneTruth, SpectralConfig, make_scene, render_absorbed, render_absorbed_broadband, render_visible

EXACT = EdgeClassifierConfig(thermal_blur_sigma=0.0)


def gray_pair(scene):
    vis = render_visible(scene)
    return to_grayscale(vis) / vis.max(), normalize01(render_absorbed(scene))[0]


# -- configs -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(InvalidInputError):
        EdgeClassifierConfig(mag_threshold=0)
    with pytest.raises(InvalidInputError):
        EdgeClassifierConfig(cos_threshold=1.0)
    with pytest.raises(InvalidInputError):
        EdgeClassifierConfig(thermal_blur_sigma=-1)
    with pytest.raises(InvalidInputError):
        PairClassifierConfig(diff_threshold=0)
    with pytest.raises(InvalidInputError):
        PairClassifierConfig(z_visible=-1.0)


def test_label_symbols_roundtrip():
    for lab in PairLabel:
        assert PairLabel.from_symbol(lab.symbol) is lab
        assert SWAPPED[SWAPPED[lab]] is lab
    with pytest.raises(InvalidInputError):
        PairLabel.from_symbol("B+")


# -- classify_edges ------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_mondrian_edges_all_albedo(seed):
    v, t = gray_pair(make_scene("mondrian", 64, 64, seed))
    labels = classify_edges(v, t, EXACT)
    strong = EdgeClassifierConfig().mag_threshold < np.hypot(*np.gradient(v))
    assert np.all(labels[strong] == EdgeLabel.ALBEDO)
    assert not np.any(labels == EdgeLabel.SHADING)


@pytest.mark.parametrize("seed", range(4))
def test_uniform_albedo_shadow_edges_shading(seed):
    base = make_scene("checker_shadow", 64, 64, seed)
    scene = SceneTruth(np.full_like(base.albedo, 0.4), base.shading)
    labels = classify_edges(*gray_pair(scene), EXACT)
    assert np.any(labels == EdgeLabel.SHADING)
    assert not np.any(labels == EdgeLabel.ALBEDO)


def test_albedo_step_example():
    rho = np.full((4, 6), 0.2)
    rho[:, 3:] = 0.8
    scene = SceneTruth(rho, np.ones((4, 6)))
    vis = to_grayscale(render_visible(scene))
    S = render_absorbed(scene)
    gv = np.gradient(vis, axis=1)
    gs = np.gradient(S, axis=1)
    assert np.all(gv[:, 2:4] > 0) and np.all(gs[:, 2:4] < 0)
    labels = classify_edges(vis, S, EXACT)
    assert np.all(labels[:, 2:4] == EdgeLabel.ALBEDO)
    assert np.all(labels[:, [0, 5]] == EdgeLabel.NONE)


def test_edges_size_mismatch():
    with pytest.raises(InvalidInputError):
        classify_edges(np.zeros((4, 4)), np.zeros((4, 5)))


@given(st.integers(0, 500), st.floats(0.1, 50.0), st.floats(-100.0, 100.0))
def test_edge_labels_affine_invariant(seed, a, b):
    scene = make_scene("checker_shadow", 32, 32, seed)
    v = to_grayscale(render_visible(scene))
    t = render_absorbed(scene)
    cfg = EdgeClassifierConfig()
    np.testing.assert_array_equal(classify_edges(v, t, cfg), classify_edges(v, a * t + b, cfg))


# -- sampling ------------------------------------------------------------------


@given(st.integers(16, 64), st.integers(16, 64), st.floats(2.0, 8.0), st.integers(0, 10_000))
def test_pairs_in_bounds_and_distinct(h, w, r, seed):
    pairs = sample_point_pairs(h, w, r, seed)
    assert len(pairs) > 0
    for coords in (pairs.i, pairs.j):
        assert coords.min() >= 0
        assert np.all(coords[:, 0] < h) and np.all(coords[:, 1] < w)
    assert np.all(np.any(pairs.i != pairs.j, axis=1))
    assert np.all(pairs.labels == PairLabel.UNSET)


@given(st.integers(16, 48), st.floats(2.0, 6.0), st.integers(0, 10_000))
def test_anchor_spacing(n, r, seed):
    a = sample_point_pairs(n, n + 5, r, seed).i.astype(float)
    d2 = ((a[:, None, :] - a[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    assert d2.min() >= r * r


def test_partner_distance_interior():
    # away from the border no reflection happens, so the annulus bound holds up to rounding
    pairs = sample_point_pairs(200, 200, 4.0, 3)
    inside = np.all((pairs.i >= 13) & (pairs.i < 187), axis=1)
    d = np.hypot(*(pairs.i[inside] - pairs.j[inside]).T)
    assert d.min() >= 4.0 - 1.0 and d.max() <= 12.0 + 1.0


def test_sampling_deterministic():
    a = sample_point_pairs(64, 64, 4, 99)
    b = sample_point_pairs(64, 64, 4, 99)
    np.testing.assert_array_equal(a.i, b.i)
    np.testing.assert_array_equal(a.j, b.j)
    c = sample_point_pairs(64, 64, 4, 100)
    assert len(a) != len(c) or not np.array_equal(a.i, c.i)


def test_sampling_coverage():
    # blue noise: roughly one anchor per radius^2 pixels
    pairs = sample_point_pairs(128, 128, 4, 0)
    assert 0.25 * 128 * 128 / 16 < len(pairs) < 128 * 128 / 16


def test_sampling_preconditions():
    with pytest.raises(InvalidInputError):
        sample_point_pairs(64, 64, 1.5, 0)
    with pytest.raises(InvalidInputError):
        sample_point_pairs(10, 64, 6, 0)
    assert len(sample_point_pairs(64, 64, 4, 0, max_pairs=7)) == 7


def test_default_radius():
    assert default_pair_radius(64, 64) == 4.0
    assert default_pair_radius(512, 256) == 8.0


# -- classify_pair -------------------------------------------------------------


def two_pixel(rho_i, eta_i, rho_j, eta_j):
    scene = SceneTruth(np.array([[rho_i, rho_j]]), np.array([[eta_i, eta_j]]))
    return to_grayscale(render_visible(scene)), render_absorbed(scene)


UNIT = PairClassifierConfig(diff_threshold=1e-6, z_visible=1.0, z_thermal=1.0)


def test_pair_albedo_example():
    v, t = two_pixel(0.2, 1.0, 0.8, 1.0)
    assert classify_pair(v, t, PointPair((0, 0), (0, 1)), UNIT).label is PairLabel.AMINUS


def test_pair_shading_example():
    v, t = two_pixel(0.5, 0.3, 0.5, 0.9)
    assert classify_pair(v, t, PointPair((0, 0), (0, 1)), UNIT).label is PairLabel.SMINUS


def test_pair_identical_none():
    v, t = two_pixel(0.5, 0.5, 0.5, 0.5)
    assert classify_pair(v, t, PointPair((0, 0), (0, 1)), UNIT).label is PairLabel.NONE


def test_pair_mixed_case_none():
    v = np.array([[0.6, 0.2]])
    t = np.array([[0.5, 0.5]])
    assert classify_pair(v, t, PointPair((0, 0), (0, 1)), UNIT).label is PairLabel.NONE


def test_pair_out_of_bounds():
    with pytest.raises(InvalidInputError):
        classify_pair(np.zeros((2, 2)), np.zeros((2, 2)), PointPair((0, 0), (2, 0)), UNIT)


def test_pair_deltas_recorded():
    v, t = two_pixel(0.2, 1.0, 0.8, 1.0)
    p = classify_pair(v, t, PointPair((0, 0), (0, 1)), PairClassifierConfig(z_visible=0.5, z_thermal=2.0))
    assert p.delta_v == pytest.approx((0.2 - 0.8) / 0.5)
    assert p.delta_t == pytest.approx((0.8 - 0.2) / 2.0)


def test_default_normalizers_are_percentile_ranges(rng):
    v = rng.random((20, 20))
    t = rng.random((20, 20))
    cfg = PairClassifierConfig().resolved(v, t)
    assert cfg.z_visible == pytest.approx(np.percentile(v, 98) - np.percentile(v, 2))
    assert cfg.z_thermal == pytest.approx(np.percentile(t, 98) - np.percentile(t, 2))


ratios = st.floats(0.05, 0.95)
shades = st.floats(0.05, 1.0)


@given(ratios, shades, ratios, shades, st.floats(0.0, 1.0), st.floats(0.0, 2.0))
def test_soundness_broadband(ri, ei, rj, ej, rho_ir, ratio):
    scene = SceneTruth(np.array([[ri, rj]]), np.array([[ei, ej]]))
    v = to_grayscale(render_visible(scene))
    t = render_absorbed_broadband(scene, SpectralConfig(rho_ir, ratio))
    label = classify_pair(v, t, PointPair((0, 0), (0, 1)), UNIT).label
    assert label.symbol in true_pair_label(ri, rj, ei, ej)


@given(st.integers(0, 1000), st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
def test_pair_labels_affine_invariant(seed, a, b):
    scene = make_scene("voronoi_smooth", 32, 32, seed)
    v = to_grayscale(render_visible(scene))
    t = render_absorbed(scene)
    pairs = sample_point_pairs(32, 32, 3, seed)
    la = classify_pairs(v, t, pairs).labels
    lb = classify_pairs(v, a * t + b, pairs).labels
    np.testing.assert_array_equal(la, lb)


@given(st.integers(0, 1000))
def test_pair_antisymmetry(seed):
    scene = make_scene("checker_shadow", 32, 32, seed)
    v, t = gray_pair(scene)
    pairs = sample_point_pairs(32, 32, 3, seed)
    fwd = classify_pairs(v, t, pairs)
    back = classify_pairs(v, t, PointPairSet(pairs.j, pairs.i, pairs.labels, pairs.delta_v, pairs.delta_t))
    for a, b in zip(fwd.labels, back.labels):
        assert SWAPPED[PairLabel(int(a))] is PairLabel(int(b))
    np.testing.assert_array_equal(fwd.swapped().labels, back.labels)


# -- export --------------------------------------------------------------------


def test_export_empty(tmp_path):
    export_labels(PointPairSet.empty(), tmp_path / "l.json")
    assert (tmp_path / "l.json").read_text() == "[]"
    assert len(load_labels(tmp_path / "l.json")) == 0


def test_export_single_record(tmp_path):
    p = PointPair((1, 2), (3, 4), PairLabel.AMINUS, -0.5, 0.25)
    export_labels([p], tmp_path / "l.json")
    records = json.loads((tmp_path / "l.json").read_text())
    assert records == [{"i": [1, 2], "j": [3, 4], "label": "A-", "delta_v": -0.5, "delta_t": 0.25}]


def test_export_roundtrip(tmp_path):
    scene = make_scene("color_chart", 48, 48, 2)
    pairs = classify_pairs(*gray_pair(scene), sample_point_pairs(48, 48, 4, 2))
    export_labels(pairs, tmp_path / "l.json")
    back = load_labels(tmp_path / "l.json")
    assert list(back) == list(pairs)


def test_counts():
    ps = PointPairSet.from_pairs([PointPair((0, 0), (0, 1), PairLabel.SPLUS), PointPair((0, 0), (1, 1), PairLabel.SPLUS),
                                  PointPair((0, 1), (1, 1), PairLabel.NONE)])
    assert ps.counts() == {"None": 1, "S+": 2}
