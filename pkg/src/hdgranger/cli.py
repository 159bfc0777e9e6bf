"""Command-line front end.

Subcommands:
  fit        select and fit a penalized ARX on a CSV panel
  test       bootstrap Granger causality tests, one per block
  simulate   Monte Carlo size tables and size-power curves
  forecast   rolling-window MAFE comparison over selection x estimation

Every run takes a master seed (defaulted, echoed in the manifest) and
writes a manifest.json next to its outputs recording the full configuration
and package versions, so any output file can be regenerated from the
manifest alone.  Reruns with the same configuration are byte-identical;
nothing time-dependent is written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .design import (OWN, BlockStructure, TimeSeriesPanel, build_design,
                     center, difference, read_block_map, read_panel_csv,
                     split_panel)
from .errors import HdGrangerError, NotComputableError
from .estimators import select_arx
from .forecast import ESTIMATORS, SELECTIONS, default_window, forecast_grid
from .inference import granger_lasso_test
from .seeding import child
from .simulation import (get_design, simulate, simulate_pvalues,
                         size_power_curve)

DEFAULT_SEED = 20250815


@dataclass
class RunConfig:
    """Everything a run depends on; echoed verbatim into the manifest."""

    command: str
    panel: str | None = None
    target: str | None = None
    blocks: str | None = None
    design: str | None = None
    hypothesis: str = "HA"
    block: tuple[str, ...] = ()
    test: str = "granger_lasso"
    p_max: int = 1
    B: int | None = None
    B_cov: int = 200
    N: int | None = None
    alpha: float = 0.05
    S: int | None = None
    m: int = 101
    curve: bool = False
    diff: int = 0
    seed: int = DEFAULT_SEED
    out: str = "."
    jobs: int = 1
    full: bool = False
    select_once: bool = False

    def resolved_n(self) -> int:
        return self.N if self.N is not None else (1000 if self.full else 500)

    def resolved_b(self, default: int = 200) -> int:
        return self.B if self.B is not None else (500 if self.full else default)


def _load_inputs(config: RunConfig):
    """Shared ingestion: CSV panel or built-in design, differenced and
    centered, split into response/predictors with a block structure."""
    if config.panel is not None:
        panel = read_panel_csv(config.panel)
        if config.diff > 0:
            panel = difference(panel, config.diff)
        panel, _ = center(panel)
        target = config.target if config.target is not None else panel.labels[0]
        y, x = split_panel(panel, target)
        if config.blocks is not None:
            blocks = read_block_map(config.blocks, x.labels)
        else:
            blocks = BlockStructure(tuple(
                (label, (i,)) for i, label in enumerate(x.labels)))
        return y, x, blocks
    if config.design is not None:
        design = get_design(config.design)
        y, x = simulate(design, config.hypothesis, child(config.seed, 0))
        return y, x, design.blocks()
    raise HdGrangerError("provide either --panel or --design")


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(config: RunConfig, outdir: Path, outputs: list[str]) -> None:
    import numba
    import scipy
    manifest = {
        "config": asdict(config),
        "seed": config.seed,
        "outputs": sorted(outputs),
        "versions": {
            "hdgranger": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    _write_json(outdir / "manifest.json", manifest)


def _cmd_fit(config: RunConfig, outdir: Path) -> list[str]:
    y, x, blocks = _load_inputs(config)
    p_star, fit = select_arx(y, x, blocks, config.p_max)
    off = config.p_max - p_star
    design = build_design(
        TimeSeriesPanel(y.values[off:], y.labels, y.frequency),
        TimeSeriesPanel(x.values[off:], x.labels, x.frequency),
        p_star, blocks)
    coeffs = []
    for col, value in zip(design.colmap, fit.beta):
        label = y.labels[0] if col.kind == OWN else x.labels[col.source]
        coeffs.append({"series": label, "lag": col.lag, "block": col.block,
                       "value": float(value)})
    _write_json(outdir / "fit.json", {
        "target": y.labels[0], "p": p_star, "lambda": fit.lam,
        "bic": fit.bic, "df": fit.df, "sigma2": fit.sigma2,
        "coefficients": coeffs,
    })
    return ["fit.json"]


def _cmd_test(config: RunConfig, outdir: Path) -> list[str]:
    y, x, blocks = _load_inputs(config)
    names = config.block if config.block else blocks.names
    B = config.B if config.B is not None else 500
    records = []
    for bi, name in enumerate(names):
        res = granger_lasso_test(y, x, blocks, name, B=B,
                                 seed=child(config.seed, 1, bi),
                                 p_max=config.p_max, B_cov=config.B_cov,
                                 jobs=config.jobs)
        records.append({"block": res.block, "Q": res.Q, "mid_p": res.mid_p,
                        "B": res.B, "p": res.p_used, "lambda": res.lambda_used})
    _write_json(outdir / "tests.json", records)
    with open(outdir / "tests.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "Q", "mid_p", "B", "p", "lambda"])
        for rec in records:
            writer.writerow([rec["block"], repr(rec["Q"]), repr(rec["mid_p"]),
                             rec["B"], rec["p"], repr(rec["lambda"])])
    return ["tests.json", "tests.csv"]


def _cmd_simulate(config: RunConfig, outdir: Path) -> list[str]:
    design = get_design(config.design if config.design is not None else 1)
    N = config.resolved_n()
    B = config.resolved_b()
    tests = ["granger_lasso", "wald"] if config.test == "both" else [config.test]
    outputs = []
    rows = []
    for ti, test in enumerate(tests):
        try:
            pvals = simulate_pvalues(design, "H0", test, N, B=B,
                                     seed=child(config.seed, 2, ti),
                                     jobs=config.jobs, p_max=config.p_max,
                                     B_cov=config.B_cov)
            size = repr(float(np.mean(pvals < config.alpha)))
        except NotComputableError:
            size = "NA"
        rows.append([design.name, test, repr(config.alpha), N, B, size])
    with open(outdir / "sizes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design", "test", "alpha", "n", "b", "size"])
        writer.writerows(rows)
    outputs.append("sizes.csv")
    if config.curve:
        for test in tests:
            try:
                curve = size_power_curve(design, test, N, B=B, m=config.m,
                                         seed=child(config.seed, 3),
                                         jobs=config.jobs, p_max=config.p_max,
                                         B_cov=config.B_cov)
            except NotComputableError:
                continue
            fname = f"curve_{test}.csv"
            with open(outdir / fname, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["x", "f_h0", "f_ha"])
                for xi, f0, f1 in zip(curve.x, curve.f_h0, curve.f_ha):
                    writer.writerow([repr(float(xi)), repr(float(f0)),
                                     repr(float(f1))])
            outputs.append(fname)
    return outputs


def _cmd_forecast(config: RunConfig, outdir: Path) -> list[str]:
    y, x, blocks = _load_inputs(config)
    S = config.S if config.S is not None else default_window(y.T)
    B = config.resolved_b()
    grid = forecast_grid(y, x, blocks, S=S, alpha=config.alpha, B=B,
                         B_cov=config.B_cov, p_max=config.p_max,
                         seed=child(config.seed, 4), jobs=config.jobs,
                         select_once=config.select_once)
    with open(outdir / "mafe.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["selection"] + list(ESTIMATORS))
        for sel in SELECTIONS:
            row = [sel]
            for est in ESTIMATORS:
                report = grid[(sel, est)]
                row.append("NA" if report.not_computable else repr(report.mafe))
            writer.writerow(row)
    with open(outdir / "paths.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["selection", "estimator", "t", "forecast", "actual"])
        for (sel, est), report in sorted(grid.items()):
            if report.not_computable:
                continue
            for w, value in enumerate(report.path):
                writer.writerow([sel, est, S + w, repr(float(value)),
                                 repr(float(y.values[S + w, 0]))])
    with open(outdir / "selected.jsonl", "w") as fh:
        for sel in SELECTIONS:
            report = next((grid[(sel, est)] for est in ESTIMATORS
                           if not grid[(sel, est)].not_computable), None)
            if report is None or report.selected_blocks is None:
                continue
            for w, kept in enumerate(report.selected_blocks):
                fh.write(json.dumps({"selection": sel, "window": w,
                                     "t": S + w, "blocks": list(kept)},
                                    sort_keys=True) + "\n")
    return ["mafe.csv", "paths.csv", "selected.jsonl"]


def run(config: RunConfig) -> int:
    """Execute one configured command; returns a process exit status."""
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    commands = {"fit": _cmd_fit, "test": _cmd_test,
                "simulate": _cmd_simulate, "forecast": _cmd_forecast}
    if config.command not in commands:
        raise HdGrangerError(f"unknown command {config.command!r}")
    outputs = commands[config.command](config, outdir)
    _write_manifest(config, outdir, outputs + ["manifest.json"])
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="master seed; all randomness derives from it")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes (results identical to serial)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--full", action="store_true",
                        help="full-scale study defaults (N=1000, B=500)")


def _add_panel_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--panel", help="CSV panel: label header row, one row "
                                        "per time point, oldest first")
    parser.add_argument("--target", help="response column (default: first)")
    parser.add_argument("--blocks", help="block map file, lines of "
                                         "'block_name: label1,label2,...'")
    parser.add_argument("--design", help="built-in simulation design (1-4) "
                                         "instead of a CSV panel")
    parser.add_argument("--hypothesis", choices=["H0", "HA"], default="HA",
                        help="coefficients used when simulating from --design")
    parser.add_argument("--difference", dest="diff", type=int, default=0,
                        metavar="ORDER", help="difference the panel first")
    parser.add_argument("--p-max", dest="p_max", type=int, default=1,
                        help="largest lag order considered")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdgranger",
        description="Block-wise Granger causality testing and forecasting "
                    "for high-dimensional ARX models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="penalized ARX fit with BIC-chosen "
                                       "lag order and penalty")
    _add_panel_inputs(p_fit)
    _add_common(p_fit)

    p_test = sub.add_parser("test", help="bootstrap Granger causality test "
                                         "per block")
    _add_panel_inputs(p_test)
    p_test.add_argument("--block", action="append", default=[],
                        help="test only this block (repeatable; default all)")
    p_test.add_argument("--b", dest="B", type=int, default=None,
                        help="bootstrap replicates (default 500)")
    p_test.add_argument("--b-cov", dest="B_cov", type=int, default=200,
                        help="replicates for the covariance estimate")
    _add_common(p_test)

    p_sim = sub.add_parser("simulate", help="Monte Carlo size table and "
                                            "optional size-power curve")
    p_sim.add_argument("--design", default="1", help="built-in design 1-4")
    p_sim.add_argument("--test", choices=["granger_lasso", "wald", "both"],
                       default="granger_lasso")
    p_sim.add_argument("--alpha", type=float, default=0.05)
    p_sim.add_argument("--n", dest="N", type=int, default=None,
                       help="Monte Carlo runs (default 500; 1000 with --full)")
    p_sim.add_argument("--b", dest="B", type=int, default=None,
                       help="bootstrap replicates (default 200; 500 with --full)")
    p_sim.add_argument("--b-cov", dest="B_cov", type=int, default=200)
    p_sim.add_argument("--p-max", dest="p_max", type=int, default=1)
    p_sim.add_argument("--curve", action="store_true",
                       help="also write the size-power curve CSV")
    p_sim.add_argument("--m", type=int, default=101,
                       help="curve grid points")
    _add_common(p_sim)

    p_fc = sub.add_parser("forecast", help="rolling-window MAFE grid over "
                                           "selection x estimation")
    _add_panel_inputs(p_fc)
    p_fc.add_argument("--s", dest="S", type=int, default=None,
                      help="window length (default: 90%% of the sample)")
    p_fc.add_argument("--alpha", type=float, default=0.01,
                      help="level of the per-window selection tests")
    p_fc.add_argument("--b", dest="B", type=int, default=None,
                      help="bootstrap replicates per window test (default 200)")
    p_fc.add_argument("--b-cov", dest="B_cov", type=int, default=50)
    p_fc.add_argument("--select-once", dest="select_once", action="store_true",
                      help="select blocks on the first window only and reuse "
                           "that choice for every window")
    _add_common(p_fc)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {f for f in RunConfig.__dataclass_fields__}
    kwargs = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    if "block" in kwargs:
        kwargs["block"] = tuple(kwargs["block"])
    if getattr(args, "design", None) is not None:
        kwargs["design"] = str(args.design)
    return RunConfig(**kwargs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    try:
        return run(config)
    except (HdGrangerError, ValueError, OSError) as exc:
        print(f"hdgranger: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
