"""Batch command-line interface.

Subcommands:
  simulate  one trial of a single-cell configuration; prints the iterate trace
  campaign  full Monte Carlo sweep; writes report.json / cells.csv / po_curve.csv
  crlb      CRLB diagonal for a single-cell configuration (both routes when quantized)
  compare   EM vs NR head-to-head on bit-identical trials; writes compare.json

Exit codes: 0 success, 2 configuration error, 3 a campaign cell had no
converged trial, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .channel import BitMapper, make_uniform_quantizer
from .crlb import (
    CompositionGuardError,
    SingularFisherError,
    crlb_from_fisher,
    fisher_analog,
    fisher_quantized_series,
    fisher_quantized_simpson,
)
from .experiments import (
    ConfigError,
    _cell_calibration,
    _stage_seed,
    compare_em_nr,
    export_po_csv,
    export_report,
    export_trace_csv,
    load_config,
    resolve_cells,
    run_campaign,
    run_trial,
)
from .field import GAUSSIAN_BELL, PARAM_NAMES
from .network import deploy_uniform


def _add_common(parser):
    parser.add_argument("--config", metavar="PATH", help="key = value configuration file")
    parser.add_argument("--seed", type=int, metavar="U64", help="override trials.base_seed")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument(
        "--format",
        choices=("json", "csv", "both"),
        default="both",
        help="which campaign artifacts to write (default: both)",
    )
    parser.add_argument("--workers", type=int, metavar="N", help="override run.workers")
    parser.add_argument("--trials", type=int, metavar="N", help="override trials.count")
    parser.add_argument("--zeta", type=int, metavar="N", help="override crlb.zeta")
    parser.add_argument("--nodes", type=int, metavar="N", help="override crlb.nodes (odd)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fieldest",
        description="Distributed field-parameter estimation over noisy channels",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_sim = sub.add_parser("simulate", help="run one trial and print the iterate trace")
    p_sim.add_argument("--trial", type=int, default=0, help="trial index (default 0)")
    _add_common(p_sim)
    _add_common(sub.add_parser("campaign", help="run the Monte Carlo sweep"))
    _add_common(sub.add_parser("crlb", help="compute the CRLB diagonal"))
    _add_common(sub.add_parser("compare", help="EM vs NR on matched trials"))
    return parser


def _overrides(args):
    out = {}
    if args.seed is not None:
        out["trials.base_seed"] = str(args.seed)
    if args.trials is not None:
        out["trials.count"] = str(args.trials)
    if args.workers is not None:
        out["run.workers"] = str(args.workers)
    if args.zeta is not None:
        out["crlb.zeta"] = str(args.zeta)
    if args.nodes is not None:
        out["crlb.nodes"] = str(args.nodes)
    return out


def _out_dir(args):
    if args.out is None:
        return None
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_simulate(cfg, args):
    record = run_trial(cfg, args.trial)
    print(f"trial {record.trial}  seed {record.seed}  network {record.network_digest}")
    init = record.init.as_array()
    print("init: " + "  ".join(f"{n}={v:.6g}" for n, v in zip(PARAM_NAMES, init)))
    if record.result is None:
        print(f"estimation failed: {record.error}")
    else:
        result = record.result
        header = f"{'iter':>4}  " + "".join(f"{n:>12}" for n in PARAM_NAMES) + f"{'loglik':>18}"
        print(header)
        for it in range(result.trace.shape[0]):
            row = "".join(f"{v:12.6f}" for v in result.trace[it])
            print(f"{it:>4}  {row}{result.loglik_trace[it]:>18.6f}")
        status = "converged" if result.converged else f"diverged ({result.divergence_reason})"
        print(f"{status} after {result.iterations} iterations, SE = {record.se:.6g}")
    out = _out_dir(args)
    if out is not None:
        path = export_trace_csv(record, out / "trace.csv")
        print(f"wrote {path}")
    return 0


def _cmd_campaign(cfg, args):
    report = run_campaign(cfg)
    out = _out_dir(args) or Path(".")
    written = []
    if args.format in ("json", "both"):
        written.append(export_report(report, out / "report.json", fmt="json"))
    if args.format in ("csv", "both"):
        written.append(export_report(report, out / "cells.csv", fmt="csv"))
        written.append(export_po_csv(report, out / "po_curve.csv"))
    for path in written:
        print(f"wrote {path}")
    dead = [row for row in report["cells"] if row["all_diverged"]]
    if dead:
        for row in dead:
            key = {c: row[c] for c in ("k", "m", "snr_o_db", "snr_c_db", "region")}
            print(f"cell {key} had no converged trial", file=sys.stderr)
        return 3
    return 0


def _cmd_crlb(cfg, args):
    cells, ids = resolve_cells(cfg)
    if len(cells) != 1:
        raise ConfigError("the crlb command needs a single-cell configuration")
    cell, data_id = cells[0], ids[0]
    sigma2, eta2 = _cell_calibration(cfg, cell)
    net = deploy_uniform(cell.k, cfg.area, _stage_seed(cfg, data_id, 0, 0))
    net = net.with_sigma2(np.full(cell.k, sigma2))
    bounds = {}
    if cfg.channel == "analog":
        fisher = fisher_analog(net, GAUSSIAN_BELL, cfg.truth, eta2)
        bounds[fisher.provenance] = [float(v) for v in crlb_from_fisher(fisher)]
    else:
        quantizer = make_uniform_quantizer(cell.m, cfg.quantizer_lo, cfg.quantizer_hi)
        bm = BitMapper(int(math.log2(cell.m)))
        for fisher in (
            fisher_quantized_series(
                net, GAUSSIAN_BELL, cfg.truth, quantizer, bm, eta2, zeta=cfg.crlb_zeta
            ),
            fisher_quantized_simpson(
                net, GAUSSIAN_BELL, cfg.truth, quantizer, bm, eta2, nodes=cfg.crlb_nodes
            ),
        ):
            bounds[fisher.provenance] = [float(v) for v in crlb_from_fisher(fisher)]
    payload = {
        "k": cell.k,
        "channel": cfg.channel,
        "m": cell.m,
        "snr_o_db": cell.snr_o_db,
        "snr_c_db": cell.snr_c_db,
        "sigma2": sigma2,
        "eta2": eta2,
        "param_names": list(PARAM_NAMES),
        "crlb": bounds,
    }
    text = json.dumps(payload, indent=2)
    print(text)
    out = _out_dir(args)
    if out is not None:
        (out / "crlb.json").write_text(text + "\n", encoding="utf-8")
        print(f"wrote {out / 'crlb.json'}")
    return 0


def _cmd_compare(cfg, args):
    report = compare_em_nr(cfg)
    for row in report["cells"]:
        print(
            f"cell {row['cell']}: jointly converged {row['n_jointly_converged']}/{row['n_trials']}"
        )
        print(
            f"  mean iterations (joint): em={row['em_mean_iterations_joint']}"
            f"  nr={row['nr_mean_iterations_joint']}"
        )
        print(f"  median SE: em={row['em_median_se']:.6g}  nr={row['nr_median_se']:.6g}")
    out = _out_dir(args) or Path(".")
    path = export_report(report, out / "compare.json", fmt="json")
    print(f"wrote {path}")
    dead = [row for row in report["cells"] if row["em"]["all_diverged"] or row["nr"]["all_diverged"]]
    return 3 if dead else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "simulate":
            return _cmd_simulate(cfg, args)
        if args.command == "campaign":
            return _cmd_campaign(cfg, args)
        if args.command == "crlb":
            return _cmd_crlb(cfg, args)
        return _cmd_compare(cfg, args)
    except (ConfigError, CompositionGuardError, SingularFisherError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
