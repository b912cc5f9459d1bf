import numpy as np

from thermiid import plotting
from thermiid.ordinality import classify_pairs, sample_point_pairs
from thermiid.imagecore import to_grayscale
from thermiid.simulate import make_scene, render_absorbed, render_visible


def inputs():
    scene = make_scene("checker_shadow", 32, 32, 0)
    return scene, render_visible(scene), render_absorbed(scene)


def is_png(path):
    return path.is_file() and path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_edge_overlay_rgb():
    rgb = plotting.edge_overlay(np.array([[0, 1], [2, 0]], dtype=np.int8))
    assert rgb.shape == (2, 2, 3)
    assert not np.array_equal(rgb[0, 1], rgb[1, 0])


def test_decomposition_figure(tmp_path):
    scene, vis, th = inputs()
    labels = np.zeros((32, 32), dtype=np.int8)
    plotting.decomposition_figure(tmp_path / "a.png", vis, th, scene.albedo, scene.shading, labels, scene)
    plotting.decomposition_figure(tmp_path / "b.png", vis, th, scene.albedo, scene.shading)
    assert is_png(tmp_path / "a.png") and is_png(tmp_path / "b.png")


def test_pairs_figure(tmp_path):
    scene, vis, th = inputs()
    pairs = classify_pairs(to_grayscale(vis), th, sample_point_pairs(32, 32, 3, 0))
    plotting.pairs_figure(tmp_path / "p.png", vis, pairs)
    assert is_png(tmp_path / "p.png")


def test_ablation_and_trace_figures(tmp_path):
    rows = [{"name": n, "si_mse_albedo": 0.01 * (k + 1), "si_mse_shading": 0.001 * (k + 1)}
            for k, n in enumerate(["full", "recon-only"])]
    plotting.ablation_chart(tmp_path / "a.png", rows)
    trace = [{"iteration": i, "total": 1.0 / (i + 1), "recon": 0.5, "edge": 0.1, "ordinal": 0.0, "nonneg": 0.0}
             for i in range(50)]
    plotting.loss_trace_figure(tmp_path / "t.png", trace)
    assert is_png(tmp_path / "a.png") and is_png(tmp_path / "t.png")
