"""Report figures written straight to files (Agg backend, no display needed)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fileio import encode_display  # noqa: E402
from .ordinality import PairLabel  # noqa: E402

GOLDEN = (math.sqrt(5) - 1.0) / 2.0

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "image.interpolation": "nearest",
}

PAIR_COLORS = {
    PairLabel.SPLUS: "#1b9e77",
    PairLabel.SMINUS: "#66c2a5",
    PairLabel.APLUS: "#d95f02",
    PairLabel.AMINUS: "#fc8d62",
    PairLabel.NONE: "#999999",
}
EDGE_COLORS = np.array([[0.0, 0.0, 0.0], [0.85, 0.37, 0.01], [0.11, 0.62, 0.47]])


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def _show(ax, image, title):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim == 2:
        ax.imshow(encode_display(img), cmap="gray", vmin=0, vmax=1)
    else:
        ax.imshow(encode_display(img))
    ax.set_title(title)
    ax.set_axis_off()


def edge_overlay(labels) -> np.ndarray:
    """RGB rendering of an edge label map: Albedo orange, Shading green."""
    return EDGE_COLORS[np.asarray(labels, dtype=np.intp)]


def decomposition_figure(path, visible, thermal, albedo, shading, edge_labels=None, truth=None) -> Path:
    """Inputs, edge labels and estimated layers on one sheet; truth row when available."""
    shade = shading / max(float(np.percentile(shading, 99)), 1e-6)
    top = [(visible, "visible"), (thermal, "thermal")]
    if edge_labels is not None:
        top.append((None, "edges"))
    top += [(albedo, "albedo"), (np.clip(shade, 0, 1), "shading")]
    rows = 2 if truth is not None else 1
    cols = len(top)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, cols, figsize=(1.6 * cols, 1.7 * rows), squeeze=False)
        for ax, (img, title) in zip(axes[0], top):
            if img is None:
                ax.imshow(edge_overlay(edge_labels))
                ax.set_title(title)
                ax.set_axis_off()
            else:
                _show(ax, img, title)
        if truth is not None:
            for ax in axes[1]:
                ax.set_axis_off()
            t_shade = truth.shading / max(float(truth.shading.max()), 1e-6)
            _show(axes[1][cols - 2], truth.albedo, "true albedo")
            _show(axes[1][cols - 1], t_shade, "true shading")
        return _save(fig, path)


def ablation_chart(path, rows) -> Path:
    """Grouped log-scale bars of albedo and shading si-MSE per loss combination.

    ``rows`` is a sequence of dicts with keys ``name``, ``si_mse_albedo`` and
    ``si_mse_shading``.
    """
    names = [r["name"] for r in rows]
    x = np.arange(len(rows))
    width = 0.38
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 5.0 * GOLDEN))
        ax.bar(x - width / 2, [r["si_mse_albedo"] for r in rows], width, label="albedo", color="#d95f02")
        ax.bar(x + width / 2, [r["si_mse_shading"] for r in rows], width, label="shading", color="#1b9e77")
        ax.set_yscale("log")
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=20, ha="right")
        ax.set_ylabel("si-MSE")
        ax.legend(frameon=False)
        return _save(fig, path)


def pairs_figure(path, visible, pairs, max_draw=400) -> Path:
    """Visible image with labeled point pairs drawn as colored segments."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        _show(ax, visible, f"{len(pairs)} pairs")
        seen = set()
        for n in range(min(len(pairs), max_draw)):
            lab = PairLabel(int(pairs.labels[n]))
            if lab == PairLabel.UNSET:
                continue
            (iy, ix), (jy, jx) = pairs.i[n], pairs.j[n]
            kw = {"label": lab.symbol} if lab not in seen else {}
            seen.add(lab)
            ax.plot([ix, jx], [iy, jy], "-", color=PAIR_COLORS[lab], lw=0.8, **kw)
            ax.plot([ix], [iy], "o", color=PAIR_COLORS[lab], ms=1.5)
        if seen:
            ax.legend(loc="upper center", bbox_to_anchor=(0.5, -0.02), ncol=5, frameon=False, handlelength=1.2)
        return _save(fig, path)


def loss_trace_figure(path, trace) -> Path:
    """Per-term loss curves from a solver trace (list of dicts)."""
    it = [t["iteration"] for t in trace]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 5.0 * GOLDEN))
        for key in ("total", "recon", "edge", "ordinal", "nonneg"):
            vals = np.array([t[key] for t in trace])
            if np.any(vals > 0):
                ax.plot(it, np.where(vals > 0, vals, np.nan), lw=1.0, label=key)
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.legend(frameon=False)
        return _save(fig, path)
