"""``thermiid`` command-line entry point.

Every subcommand resolves a RunConfig (defaults < ``--config`` file <
``--section.key=value`` overrides), writes it as ``config.toml`` into its
output directory and can be replayed from that snapshot.

Exit codes: 0 success, 1 usage error, 2 input error, 3 threshold violation,
4 solver failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .config import ConfigError, RunConfig, resolve
from .errors import InvalidInputError, SolverError
from .fileio import ensure_dir, read_label_png, read_pfm, write_label_png, write_pfm, write_png
from .imagecore import normalize01, to_grayscale
from .metrics import evaluate, ordinal_accuracy, reports_to_csv
from .ordinality import (
    PairClassifierConfig,
    classify_pairs,
    default_pair_radius,
    export_labels,
    load_labels,
    sample_point_pairs,
)
from .simulate import make_scene, read_truth, simulate_scene, write_bundle
from .solver import STREAM_PAIRS, check_gradients, decompose, random_check_problem, substream

log = logging.getLogger("thermiid")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_THRESHOLD, EXIT_SOLVER = 0, 1, 2, 3, 4
STREAM_NOISE = 4

# loss combinations of the ablation table, as weight overrides
ABLATION_ROWS = {
    "full": {},
    "recon+edge": {"lambda_ord": 0.0},
    "recon+ord": {"lambda_edge": 0.0},
    "edge+ord": {"lambda_recon": 0.0},
    "recon-only": {"lambda_edge": 0.0, "lambda_ord": 0.0},
}


class UsageError(Exception):
    pass


class ThresholdError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- helpers ------------------------------------------------------------------


def _snapshot(cfg: RunConfig, out: Path):
    path = out / "config.toml"
    path.write_text(cfg.to_toml())
    log.info("resolved config written to %s", path)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise InvalidInputError(f"missing input file: {path}")
    return path


def _input_dir(cfg: RunConfig) -> Path:
    if not cfg.io.input:
        raise InvalidInputError("no input bundle given (set io.input)")
    return Path(cfg.io.input)


def load_pair(cfg: RunConfig):
    """Read the visible/thermal pair of a bundle and bring both into [0, 1].

    Visible is divided by its maximum (scale only, so the product model
    holds); thermal is min-max normalized since the camera adds an offset.
    """
    d = _input_dir(cfg)
    visible = read_pfm(_require(d / "visible.pfm"))
    thermal = read_pfm(_require(d / cfg.io.thermal_file))
    if thermal.ndim == 3:
        thermal = to_grayscale(thermal)
    if visible.shape[:2] != thermal.shape:
        raise InvalidInputError(f"visible {visible.shape[:2]} and thermal {thermal.shape} differ in size")
    peak = float(visible.max())
    if not peak > 0:
        raise InvalidInputError("visible image is all zero")
    thermal, _, _ = normalize01(thermal)
    return visible / peak, thermal


def _truth_dir(cfg: RunConfig):
    d = Path(cfg.io.truth or cfg.io.input or ".")
    return d if (d / "truth_albedo.pfm").is_file() and (d / "truth_shading.pfm").is_file() else None


def _shading_preview(shading):
    z = float(np.percentile(shading, 99))
    return np.clip(shading / (z if z > 1e-6 else 1.0), 0.0, 1.0)


def _run_solver(cfg: RunConfig, visible, thermal, out: Path):
    albedo, shading, diag = decompose(visible, thermal, cfg.solver_config())
    write_pfm(out / "albedo.pfm", albedo)
    write_pfm(out / "shading.pfm", shading)
    write_png(out / "albedo.png", albedo)
    write_png(out / "shading.png", _shading_preview(shading))
    write_label_png(out / "edges.png", diag.edge_labels)
    with open(out / "diagnostics.jsonl", "w") as fh:
        for row in diag.trace:
            fh.write(json.dumps(row) + "\n")
        summary = {
            "final": diag.final,
            "initial_recon": diag.initial_recon,
            "edge_counts": diag.edge_counts,
            "pair_counts": diag.pair_counts,
            "wall_time": diag.wall_time,
        }
        fh.write(json.dumps({"summary": summary}) + "\n")
    return albedo, shading, diag


# -- subcommands --------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    sc = cfg.scene
    scene = make_scene(sc.kind, sc.height, sc.width, cfg.run.seed, sc.channels, sc.gain)
    sim = simulate_scene(
        scene,
        cfg.thermal_params(),
        cfg.spectral_config(),
        irradiance_scale=sc.irradiance_scale,
        noise_stddev=sc.noise_stddev,
        noise_seed=substream(cfg.run.seed, STREAM_NOISE),
    )
    out = ensure_dir(cfg.output_dir())
    write_bundle(out, sim, {"kind": sc.kind, "seed": cfg.run.seed})
    if cfg.run.figures:
        write_png(out / "visible.png", sim.visible / sim.visible.max())
        write_png(out / "thermal.png", normalize01(sim.thermal)[0])
    _snapshot(cfg, out)
    print(f"simulate: {sc.kind} {sc.height}x{sc.width} seed {cfg.run.seed} -> {out}")
    return EXIT_OK


def cmd_decompose(cfg: RunConfig) -> int:
    visible, thermal = load_pair(cfg)
    out = ensure_dir(cfg.output_dir())
    _snapshot(cfg, out)
    albedo, shading, diag = _run_solver(cfg, visible, thermal, out)
    tdir = _truth_dir(cfg)
    truth = read_truth(tdir) if tdir else None
    if cfg.run.figures:
        plotting.decomposition_figure(out / "summary.png", visible, thermal, albedo, shading, diag.edge_labels, truth)
        plotting.loss_trace_figure(out / "loss.png", diag.trace)
    print(f"decompose: {diag.final['total']:.6g} final objective in {diag.wall_time:.1f}s -> {out}")
    return EXIT_OK


def cmd_label_pairs(cfg: RunConfig) -> int:
    visible, thermal = load_pair(cfg)
    gray = to_grayscale(visible)
    h, w = thermal.shape
    out = ensure_dir(cfg.output_dir())
    _snapshot(cfg, out)
    radius = cfg.pairs.radius or default_pair_radius(h, w)
    pairs = sample_point_pairs(h, w, radius, substream(cfg.run.seed, STREAM_PAIRS))
    if cfg.pairs.count >= 0:
        pairs = pairs.subset(slice(0, cfg.pairs.count))
    pairs = classify_pairs(gray, thermal, pairs, PairClassifierConfig(cfg.pairs.diff_threshold))
    export_labels(pairs, out / "labels.json")
    summary = {"counts": pairs.counts(), "total": len(pairs)}
    tdir = _truth_dir(cfg)
    if tdir is not None:
        report = ordinal_accuracy(pairs, read_truth(tdir))
        summary["accuracy"] = report.to_dict()
        summary["mismatches"] = sum(report.total.values()) - sum(report.correct.values())
    (out / "labels_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if cfg.run.figures:
        plotting.pairs_figure(out / "pairs.png", visible, pairs)
    print("label-pairs: " + ", ".join(f"{k} {v}" for k, v in summary["counts"].items()))
    if "mismatches" in summary:
        print(f"label-pairs: {summary['mismatches']} mismatches against truth")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    if not cfg.io.estimate:
        raise InvalidInputError("no estimate directory given (set io.estimate)")
    est = Path(cfg.io.estimate)
    tdir = _truth_dir(cfg)
    if tdir is None:
        raise InvalidInputError("no truth bundle found (set io.truth)")
    truth = read_truth(tdir)
    albedo = read_pfm(_require(est / "albedo.pfm"))
    shading = read_pfm(_require(est / "shading.pfm"))
    if shading.ndim == 3:
        shading = shading[..., 0]
    if albedo.shape[:2] != truth.shape or shading.shape != truth.shape:
        raise InvalidInputError(f"estimate size {albedo.shape[:2]} does not match truth {truth.shape}")
    pairs = load_labels(est / "labels.json") if (est / "labels.json").is_file() else None
    edges = read_label_png(est / "edges.png") if (est / "edges.png").is_file() else None
    report = evaluate(albedo, shading, truth, pairs, edges, cfg.edges.mag_threshold, name=est.name)
    out = ensure_dir(cfg.output_dir())
    _snapshot(cfg, out)
    (out / "eval.json").write_text(report.to_json() + "\n")
    (out / "eval.csv").write_text(reports_to_csv([report]))
    print(f"evaluate: si-MSE albedo {report.si_mse_albedo:.3e}, shading {report.si_mse_shading:.3e}")

    ev = cfg.evaluate
    failures = []
    if report.si_mse_albedo > ev.max_si_mse_albedo:
        failures.append(f"albedo si-MSE {report.si_mse_albedo:.3e} > {ev.max_si_mse_albedo:.3e}")
    if report.si_mse_shading > ev.max_si_mse_shading:
        failures.append(f"shading si-MSE {report.si_mse_shading:.3e} > {ev.max_si_mse_shading:.3e}")
    if report.ordinal is not None and report.ordinal.overall is not None:
        if report.ordinal.overall < ev.min_ordinal_accuracy:
            failures.append(f"ordinal accuracy {report.ordinal.overall:.3f} < {ev.min_ordinal_accuracy:.3f}")
    if failures:
        raise ThresholdError("; ".join(failures))
    return EXIT_OK


def cmd_ablate(cfg: RunConfig) -> int:
    visible, thermal = load_pair(cfg)
    tdir = _truth_dir(cfg)
    if tdir is None:
        raise InvalidInputError("ablation needs a bundle with truth files")
    truth = read_truth(tdir)
    out = ensure_dir(cfg.output_dir())
    _snapshot(cfg, out)
    rows = []
    for name, overrides in ABLATION_ROWS.items():
        row_cfg = _with_weights(cfg, overrides)
        row_dir = ensure_dir(out / name)
        albedo, shading, _ = _run_solver(row_cfg, visible, thermal, row_dir)
        report = evaluate(albedo, shading, truth, name=name)
        rows.append(report)
        log.info("ablate %-10s albedo %.3e shading %.3e", name, report.si_mse_albedo, report.si_mse_shading)
    (out / "ablation.csv").write_text(reports_to_csv(rows))
    table = [{"name": r.name, "si_mse_albedo": r.si_mse_albedo, "si_mse_shading": r.si_mse_shading} for r in rows]
    (out / "ablation.json").write_text(json.dumps(table, indent=2) + "\n")
    if cfg.run.figures:
        plotting.ablation_chart(out / "ablation.png", table)
    for r in table:
        print(f"ablate: {r['name']:<10} albedo {r['si_mse_albedo']:.3e}  shading {r['si_mse_shading']:.3e}")
    return EXIT_OK


def _with_weights(cfg: RunConfig, overrides: dict) -> RunConfig:
    row = copy.deepcopy(cfg)
    for k, v in overrides.items():
        setattr(row.weights, k, v)
    return row


def cmd_gradcheck(cfg: RunConfig) -> int:
    g = cfg.gradcheck
    estimate, data, weights = random_check_problem(g.height, g.width, seed=cfg.run.seed, margin=cfg.weights.margin)
    report = check_gradients(estimate, data, weights, trials=g.trials, seed=cfg.run.seed)
    out = ensure_dir(cfg.output_dir())
    _snapshot(cfg, out)
    (out / "gradcheck.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"gradcheck: max relative error {report.max_rel_error:.3e} over {report.checked} parameters")
    if report.max_rel_error >= g.max_rel_error:
        raise ThresholdError(f"gradient error {report.max_rel_error:.3e} >= {g.max_rel_error:.3e}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "label-pairs": cmd_label_pairs,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "gradcheck": cmd_gradcheck,
}


# -- argument handling --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermiid", description="Intrinsic decomposition from visible/thermal image pairs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", help="TOML config file (e.g. a config.toml snapshot)")
        p.add_argument("-o", "--output", help="output directory (same as --run.output_dir)")
        p.add_argument("-i", "--input", help="input bundle directory (same as --io.input)")
        p.add_argument("--seed", type=int, help="root seed (same as --run.seed)")
        if name == "simulate":
            p.add_argument("--broadband", action="store_true", help="render absorbed light with an infrared share")
        if name == "decompose":
            p.add_argument("--ablate", choices=sorted(ABLATION_ROWS), help="drop loss terms as in one ablation row")
        if name == "label-pairs":
            p.add_argument("--count", type=int, help="number of pairs to keep (same as --pairs.count)")
        if name == "evaluate":
            p.add_argument("--estimate", help="directory holding albedo.pfm and shading.pfm")
    return parser


def parse(argv):
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    overrides = []
    for item in rest:
        if not (item.startswith("--") and "=" in item and "." in item.partition("=")[0]):
            raise UsageError(f"unrecognized argument {item!r}; overrides look like --section.key=value")
        overrides.append(item[2:])
    shortcuts = []
    if args.output:
        shortcuts.append(f"run.output_dir={args.output}")
    if args.input:
        shortcuts.append(f"io.input={args.input}")
    if args.seed is not None:
        shortcuts.append(f"run.seed={args.seed}")
    if getattr(args, "broadband", False):
        shortcuts.append("scene.broadband=true")
    if getattr(args, "count", None) is not None:
        shortcuts.append(f"pairs.count={args.count}")
    if getattr(args, "estimate", None):
        shortcuts.append(f"io.estimate={args.estimate}")
    for k, v in ABLATION_ROWS.get(getattr(args, "ablate", None) or "", {}).items():
        shortcuts.append(f"weights.{k}={v!r}")
    cfg = resolve(args.config, shortcuts + overrides)
    return args, cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, cfg = parse(argv)
    except (UsageError, ConfigError) as exc:
        print(f"thermiid: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInputError as exc:
        print(f"thermiid: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](cfg)
    except ThresholdError as exc:
        print(f"thermiid: threshold violated: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except SolverError as exc:
        print(f"thermiid: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidInputError, OSError) as exc:
        print(f"thermiid: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
