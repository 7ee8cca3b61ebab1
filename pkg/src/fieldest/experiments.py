"""Monte Carlo campaigns over the estimation pipeline.

A campaign sweeps cells (sensor count, quantizer size, SNR pair, initial
region), runs independent trials per cell, and aggregates squared-error box
statistics, MSE, outlier-probability curves, per-parameter variances over the
converged trials, and the matching CRLB diagonal.

Seeding: every random stage of a trial draws from
``SeedSequence(entropy=base_seed, spawn_key=(data_cell_id, trial, stage))``
with stages 0=deployment, 1=observations, 2=channel noise, 3+region=init
draw.  ``data_cell_id`` indexes the distinct (channel, K, M, SNR) data
configurations, so cells that differ only in estimator or initialization see
bit-identical networks and noise — which makes estimator comparisons and
initial-region sweeps paired comparisons rather than independent ones.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .channel import BitMapper, amplify_forward, make_uniform_quantizer, quantize_forward
from .crlb import (
    CompositionGuardError,
    SingularFisherError,
    crlb_from_fisher,
    fisher_analog,
    fisher_quantized_series,
    fisher_quantized_simpson,
)
from .estimators import (
    EstimationError,
    SolverConfig,
    em_estimate,
    newton_ml_analog,
    nr_estimate_quantized,
)
from .field import GAUSSIAN_BELL, N_PARAMS, PARAM_NAMES, Area, FieldParams
from .network import (
    calibrate_eta_analog,
    calibrate_eta_quantized,
    calibrate_sigma,
    deploy_uniform,
    sample_observations,
)


class ConfigError(ValueError):
    """Invalid experiment configuration (bad key, value, or combination)."""


_CHANNELS = ("analog", "quantized")
_ESTIMATORS = ("newton", "em", "nr")
_INIT_POLICIES = ("fixed", "region")
_CRLB_METHODS = ("simpson", "series")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a campaign needs; sweep axes are tuples of values."""

    truth: FieldParams = FieldParams(8.0, 2.0, 2.0, 4.0, 4.0)
    area: Area = Area()
    k_values: tuple = (40,)
    channel: str = "analog"
    m_values: tuple = (8,)
    quantizer_lo: float = 0.0
    quantizer_hi: float = 12.0
    snr_o_db: tuple = (15.0,)
    snr_c_db: tuple = (15.0,)
    estimator: str = "auto"
    solver: SolverConfig = SolverConfig()
    trials: int = 1000
    base_seed: int = 20240901
    init_policy: str = "fixed"
    init_theta: FieldParams = FieldParams(9.0, 1.5, 1.5, 3.0, 3.0)
    init_regions: tuple = (1,)
    crlb_enabled: bool = True
    crlb_method: str = "simpson"
    crlb_zeta: int = 6
    crlb_nodes: int = 81
    tau_min: float = 1e-3
    tau_max: float = 1e2
    tau_count: int = 50
    grid: int = 201
    workers: int = 1

    def __post_init__(self):
        for name in ("truth", "init_theta"):
            value = getattr(self, name)
            if not isinstance(value, FieldParams):
                try:
                    value = FieldParams.from_array(np.asarray(value, dtype=float))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{name} must be five field parameters: {exc}") from exc
                object.__setattr__(self, name, value)
        if self.channel not in _CHANNELS:
            raise ConfigError(f"channel must be one of {_CHANNELS}, got {self.channel!r}")
        if self.estimator == "auto":
            object.__setattr__(
                self, "estimator", "newton" if self.channel == "analog" else "em"
            )
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(f"estimator must be one of {_ESTIMATORS}, got {self.estimator!r}")
        if self.channel == "analog" and self.estimator != "newton":
            raise ConfigError("the analog channel is estimated by 'newton'")
        if self.channel == "quantized" and self.estimator == "newton":
            raise ConfigError("the quantized channel is estimated by 'em' or 'nr'")
        for name in ("k_values", "m_values", "snr_o_db", "snr_c_db", "init_regions"):
            vals = getattr(self, name)
            object.__setattr__(self, name, tuple(vals))
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"sweep {name} must be non-empty")
        if any(int(k) < 1 for k in self.k_values):
            raise ConfigError("sensor counts must be >= 1")
        if (
            len(self.snr_o_db) > 1
            and len(self.snr_c_db) > 1
            and len(self.snr_o_db) != len(self.snr_c_db)
        ):
            raise ConfigError(
                "snr.observation_db and snr.channel_db sweep together; give them "
                f"equal lengths (or make one a single value), got "
                f"{len(self.snr_o_db)} and {len(self.snr_c_db)}"
            )
        if self.channel == "quantized":
            for m in self.m_values:
                m = int(m)
                if m < 2 or (m & (m - 1)) != 0:
                    raise ConfigError(f"quantizer sizes must be powers of two >= 2, got {m}")
            if not self.quantizer_hi > self.quantizer_lo:
                raise ConfigError("quantizer range must have quantizer_lo < quantizer_hi")
        if self.init_policy not in _INIT_POLICIES:
            raise ConfigError(f"init policy must be one of {_INIT_POLICIES}")
        if self.init_policy == "region" and any(
            not 1 <= int(i) <= 8 for i in self.init_regions
        ):
            raise ConfigError("initial regions must lie in 1..8")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.crlb_method not in _CRLB_METHODS:
            raise ConfigError(f"crlb method must be one of {_CRLB_METHODS}")
        if self.crlb_zeta < 0:
            raise ConfigError("crlb zeta must be >= 0")
        if self.crlb_nodes < 21 or self.crlb_nodes % 2 == 0:
            raise ConfigError("crlb nodes must be odd and >= 21")
        if not (0 < self.tau_min < self.tau_max) or self.tau_count < 2:
            raise ConfigError("need 0 < tau_min < tau_max and tau_count >= 2")
        if self.grid < 11 or self.grid % 2 == 0:
            raise ConfigError("quadrature grid must be odd and >= 11")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def tau_grid(self):
        return np.geomspace(self.tau_min, self.tau_max, self.tau_count)


@dataclass(frozen=True)
class Cell:
    """One resolved sweep point."""

    k: int
    m: int | None
    snr_o_db: float
    snr_c_db: float
    region: int | None

    def data_key(self, channel):
        return (channel, self.k, self.m, self.snr_o_db, self.snr_c_db)


@dataclass
class TrialRecord:
    """Outcome of one trial; result is None only when the estimator raised."""

    trial: int
    seed: int
    network_digest: str
    init: FieldParams
    result: object
    se: float | None
    converged: bool
    error: str | None = None


def paired_snrs(snr_o_db, snr_c_db):
    """Pair the two SNR sweeps, broadcasting a singleton over the other list."""
    so = [float(v) for v in snr_o_db]
    sc = [float(v) for v in snr_c_db]
    if len(so) == 1 and len(sc) > 1:
        so = so * len(sc)
    elif len(sc) == 1 and len(so) > 1:
        sc = sc * len(so)
    if len(so) != len(sc):
        raise ConfigError(
            f"cannot pair SNR sweeps of lengths {len(so)} and {len(sc)}"
        )
    return list(zip(so, sc))


def resolve_cells(cfg):
    """Sweep points in a fixed, documented order (regions innermost).

    The two SNR lists are paired, not crossed: a singleton broadcasts
    against the other list, otherwise they advance in lockstep.
    """
    m_axis = cfg.m_values if cfg.channel == "quantized" else (None,)
    region_axis = cfg.init_regions if cfg.init_policy == "region" else (None,)
    snr_pairs = paired_snrs(cfg.snr_o_db, cfg.snr_c_db)
    cells = []
    for k in cfg.k_values:
        for m in m_axis:
            for so, sc in snr_pairs:
                for region in region_axis:
                    cells.append(
                        Cell(
                            k=int(k),
                            m=None if m is None else int(m),
                            snr_o_db=float(so),
                            snr_c_db=float(sc),
                            region=None if region is None else int(region),
                        )
                    )
    keys = []
    ids = []
    for cell in cells:
        key = cell.data_key(cfg.channel)
        if key not in keys:
            keys.append(key)
        ids.append(keys.index(key))
    return cells, ids


# ------------------------------------------------------------------ metrics


def squared_error(theta_hat, theta_true):
    """SE = sum_i (theta_hat_i - theta_i)^2."""
    a = theta_hat.as_array() if hasattr(theta_hat, "as_array") else np.asarray(theta_hat, float)
    b = theta_true.as_array() if hasattr(theta_true, "as_array") else np.asarray(theta_true, float)
    if a.shape != b.shape:
        raise ValueError("parameter vectors must have matching shapes")
    return float(np.sum((a - b) ** 2))


def initial_region_sample(region, truth, seed):
    """Random initialization from band `region` (1..8): each parameter drawn
    uniformly from [t_j(1 - region/8), t_j(1 - (region-1)/8)], endpoints
    ordered; region 1 is nearest the truth.  Spreads are floored at 1e-3."""
    region = int(region)
    if not 1 <= region <= 8:
        raise ValueError(f"region must lie in 1..8, got {region}")
    t = truth.as_array()
    a = t * (1.0 - region / 8.0)
    b = t * (1.0 - (region - 1) / 8.0)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    rng = np.random.default_rng(seed)
    draw = lo + (hi - lo) * rng.random(t.size)
    draw[1] = max(draw[1], 1e-3)
    draw[2] = max(draw[2], 1e-3)
    return FieldParams.from_array(draw)


def box_stats(samples):
    """Box-plot summary: linear-interpolation quartiles, whiskers at the most
    extreme samples within 1.5 IQR of the box, outliers beyond (sorted)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("box_stats needs at least one sample")
    q1, med, q3 = (float(v) for v in np.percentile(arr, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    fence_lo = q1 - 1.5 * iqr
    fence_hi = q3 + 1.5 * iqr
    inside = arr[(arr >= fence_lo) & (arr <= fence_hi)]
    if inside.size:
        wlo, whi = float(inside.min()), float(inside.max())
    else:  # unreachable for interpolated quartiles, kept as a guard
        wlo, whi = q1, q3
    outliers = sorted(float(v) for v in arr[(arr < fence_lo) | (arr > fence_hi)])
    return {
        "median": med,
        "q1": q1,
        "q3": q3,
        "whisker_low": wlo,
        "whisker_high": whi,
        "outliers": outliers,
    }


def outlier_probability(se_samples, tau_grid):
    """Empirical exceedance curve P_O(tau) = fraction of SE samples > tau."""
    se = np.asarray(se_samples, dtype=float)
    tau = np.asarray(tau_grid, dtype=float)
    if se.size == 0:
        raise ValueError("need at least one SE sample")
    if tau.ndim != 1 or np.any(tau <= 0) or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be positive and strictly increasing")
    return (se[None, :] > tau[:, None]).mean(axis=1)


# ------------------------------------------------------------------- trials


def _stage_seed(cfg, data_cell_id, trial, stage):
    return np.random.SeedSequence(
        entropy=cfg.base_seed, spawn_key=(data_cell_id, trial, stage)
    )


def _trial_seed_value(cfg, data_cell_id, trial):
    ss = np.random.SeedSequence(entropy=cfg.base_seed, spawn_key=(data_cell_id, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def _cell_calibration(cfg, cell):
    """Noise variances (sigma2, eta2) for one cell; pure function of the cell."""
    sigma2 = calibrate_sigma(GAUSSIAN_BELL, cfg.truth, cfg.area, cell.snr_o_db, grid=cfg.grid)
    if cfg.channel == "analog":
        eta2 = calibrate_eta_analog(
            GAUSSIAN_BELL, cfg.truth, cfg.area, sigma2, cell.snr_c_db, grid=cfg.grid
        )
    else:
        quantizer = make_uniform_quantizer(cell.m, cfg.quantizer_lo, cfg.quantizer_hi)
        eta2 = calibrate_eta_quantized(
            GAUSSIAN_BELL,
            cfg.truth,
            cfg.area,
            quantizer,
            sigma2,
            cell.snr_c_db,
            grid=cfg.grid,
        )
    return float(sigma2), float(eta2)


def _run_cell_trial(cfg, cell, data_cell_id, trial, calib=None):
    model = GAUSSIAN_BELL
    if calib is None:
        calib = _cell_calibration(cfg, cell)
    sigma2, eta2 = calib
    net = deploy_uniform(cell.k, cfg.area, _stage_seed(cfg, data_cell_id, trial, 0))
    net = net.with_sigma2(np.full(cell.k, sigma2))
    digest = hashlib.sha256(net.positions.tobytes()).hexdigest()[:16]
    obs = sample_observations(net, model, cfg.truth, _stage_seed(cfg, data_cell_id, trial, 1))
    channel_seed = _stage_seed(cfg, data_cell_id, trial, 2)
    if cfg.channel == "analog":
        z = amplify_forward(obs, eta2, channel_seed)
        quantizer = bm = None
    else:
        quantizer = make_uniform_quantizer(cell.m, cfg.quantizer_lo, cfg.quantizer_hi)
        bm = BitMapper(int(math.log2(cell.m)))
        z = quantize_forward(obs, quantizer, bm, eta2, channel_seed)
    if cfg.init_policy == "fixed":
        init = cfg.init_theta
    else:
        init = initial_region_sample(
            cell.region, cfg.truth, _stage_seed(cfg, data_cell_id, trial, 3 + cell.region)
        )
    seed_value = _trial_seed_value(cfg, data_cell_id, trial)
    try:
        if cfg.channel == "analog":
            result = newton_ml_analog(z, net, model, eta2, init, cfg.solver)
        elif cfg.estimator == "em":
            result = em_estimate(z, net, quantizer, bm, model, eta2, init, cfg.solver)
        else:
            result = nr_estimate_quantized(z, net, quantizer, bm, model, eta2, init, cfg.solver)
    except (EstimationError, np.linalg.LinAlgError, OverflowError, FloatingPointError) as exc:
        return TrialRecord(
            trial=trial,
            seed=seed_value,
            network_digest=digest,
            init=init,
            result=None,
            se=None,
            converged=False,
            error=f"{type(exc).__name__}: {exc}",
        )
    return TrialRecord(
        trial=trial,
        seed=seed_value,
        network_digest=digest,
        init=init,
        result=result,
        se=squared_error(result.theta_hat, cfg.truth),
        converged=result.converged,
        error=result.divergence_reason,
    )


def run_trial(cfg, trial):
    """One full deterministic trial of a single-cell configuration:
    deploy -> calibrate -> observe -> channel -> estimate -> SE.

    Estimator divergence is recorded, never raised.
    """
    cells, ids = resolve_cells(cfg)
    if len(cells) != 1:
        raise ConfigError(
            f"run_trial needs a single-cell configuration, this one has {len(cells)} cells"
        )
    return _run_cell_trial(cfg, cells[0], ids[0], int(trial))


def _trial_star(args):
    return _run_cell_trial(*args)


def run_cell_trials(cfg, cell, data_cell_id, executor=None):
    """All trial records for one cell, in trial order."""
    calib = _cell_calibration(cfg, cell)
    args = [(cfg, cell, data_cell_id, t, calib) for t in range(cfg.trials)]
    if executor is None:
        return [_run_cell_trial(*a) for a in args]
    chunk = max(1, cfg.trials // (4 * cfg.workers))
    return list(executor.map(_trial_star, args, chunksize=chunk))


# ----------------------------------------------------------------- campaign


def _cell_crlb(cfg, cell, data_cell_id, calib):
    """CRLB diagonal for a cell, computed on the trial-0 network so the bound
    refers to the same geometry the first trial saw; returns (diag, error)."""
    if not cfg.crlb_enabled:
        return None, None
    sigma2, eta2 = calib
    net = deploy_uniform(cell.k, cfg.area, _stage_seed(cfg, data_cell_id, 0, 0))
    net = net.with_sigma2(np.full(cell.k, sigma2))
    try:
        if cfg.channel == "analog":
            fisher = fisher_analog(net, GAUSSIAN_BELL, cfg.truth, eta2)
        else:
            quantizer = make_uniform_quantizer(cell.m, cfg.quantizer_lo, cfg.quantizer_hi)
            bm = BitMapper(int(math.log2(cell.m)))
            if cfg.crlb_method == "simpson":
                fisher = fisher_quantized_simpson(
                    net, GAUSSIAN_BELL, cfg.truth, quantizer, bm, eta2, nodes=cfg.crlb_nodes
                )
            else:
                fisher = fisher_quantized_series(
                    net, GAUSSIAN_BELL, cfg.truth, quantizer, bm, eta2, zeta=cfg.crlb_zeta
                )
        diag = crlb_from_fisher(fisher)
    except (SingularFisherError, CompositionGuardError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return [float(v) for v in diag], None


def _cell_key_dict(cfg, cell):
    return {
        "k": cell.k,
        "channel": cfg.channel,
        "m": cell.m,
        "snr_o_db": cell.snr_o_db,
        "snr_c_db": cell.snr_c_db,
        "estimator": cfg.estimator,
        "region": cell.region,
    }


def aggregate_cell(cfg, cell, records, tau_grid, crlb_diag=None, crlb_error=None):
    """Aggregate one cell's trial records into the report row.

    Statistics over all trials and over the converged subset are reported
    side by side; hard estimator failures (no estimate at all) only count
    toward the trial totals.
    """
    records = sorted(records, key=lambda r: r.trial)
    se_all = [r.se for r in records if r.se is not None]
    converged = [r for r in records if r.converged]
    se_conv = [r.se for r in converged]
    out = _cell_key_dict(cfg, cell)
    out["n_trials"] = len(records)
    out["n_estimated"] = len(se_all)
    out["n_converged"] = len(converged)
    out["all_diverged"] = len(converged) == 0
    out["mse"] = float(np.mean(se_all)) if se_all else None
    out["mse_converged"] = float(np.mean(se_conv)) if se_conv else None
    out["box"] = box_stats(se_all) if se_all else None
    out["box_converged"] = box_stats(se_conv) if se_conv else None
    if len(converged) >= 2:
        thetas = np.array([r.result.theta_hat.as_array() for r in converged])
        out["variance_converged"] = [float(v) for v in thetas.var(axis=0, ddof=1)]
        out["mean_converged"] = [float(v) for v in thetas.mean(axis=0)]
    else:
        out["variance_converged"] = None
        out["mean_converged"] = None
    iters = [r.result.iterations for r in converged]
    out["mean_iterations_converged"] = float(np.mean(iters)) if iters else None
    out["crlb_diag"] = crlb_diag
    out["crlb_error"] = crlb_error
    out["po"] = [float(v) for v in outlier_probability(se_all, tau_grid)] if se_all else None
    return out


def _config_dict(cfg):
    """Flat dotted-key echo of the configuration (same schema as the file)."""
    return {
        "field.h": cfg.truth.h,
        "field.rho_x": cfg.truth.rho_x,
        "field.rho_y": cfg.truth.rho_y,
        "field.x_c": cfg.truth.x_c,
        "field.y_c": cfg.truth.y_c,
        "area.x_min": cfg.area.x_min,
        "area.x_max": cfg.area.x_max,
        "area.y_min": cfg.area.y_min,
        "area.y_max": cfg.area.y_max,
        "network.k": list(cfg.k_values),
        "channel.kind": cfg.channel,
        "channel.m": list(cfg.m_values),
        "channel.quantizer_lo": cfg.quantizer_lo,
        "channel.quantizer_hi": cfg.quantizer_hi,
        "snr.observation_db": list(cfg.snr_o_db),
        "snr.channel_db": list(cfg.snr_c_db),
        "estimator.kind": cfg.estimator,
        "solver.tol": cfg.solver.tol,
        "solver.max_outer": cfg.solver.max_outer,
        "solver.max_inner": cfg.solver.max_inner,
        "solver.damping": cfg.solver.damping,
        "solver.ridge": cfg.solver.ridge,
        "trials.count": cfg.trials,
        "trials.base_seed": cfg.base_seed,
        "init.policy": cfg.init_policy,
        "init.theta": [float(v) for v in cfg.init_theta.as_array()],
        "init.regions": list(cfg.init_regions),
        "crlb.enabled": cfg.crlb_enabled,
        "crlb.method": cfg.crlb_method,
        "crlb.zeta": cfg.crlb_zeta,
        "crlb.nodes": cfg.crlb_nodes,
        "report.tau_min": cfg.tau_min,
        "report.tau_max": cfg.tau_max,
        "report.tau_count": cfg.tau_count,
        "quadrature.grid": cfg.grid,
        "run.workers": cfg.workers,
    }


def run_campaign(cfg, workers=None):
    """Run every cell of the sweep and return the full report dictionary.

    Aggregation is a fixed-order reduction by trial index, so the report is
    bit-identical for a given (config, base seed, version) regardless of the
    worker count.
    """
    cells, ids = resolve_cells(cfg)
    tau = cfg.tau_grid
    n_workers = cfg.workers if workers is None else int(workers)
    executor = None
    cell_rows = []
    try:
        if n_workers > 1:
            executor = ProcessPoolExecutor(max_workers=n_workers)
        for cell, data_id in zip(cells, ids):
            records = run_cell_trials(cfg, cell, data_id, executor=executor)
            calib = _cell_calibration(cfg, cell)
            crlb_diag, crlb_error = _cell_crlb(cfg, cell, data_id, calib)
            cell_rows.append(aggregate_cell(cfg, cell, records, tau, crlb_diag, crlb_error))
    finally:
        if executor is not None:
            executor.shutdown()
    return {
        "version": __version__,
        "config": _config_dict(cfg),
        "param_names": list(PARAM_NAMES),
        "tau_grid": [float(v) for v in tau],
        "cells": cell_rows,
    }


def compare_em_nr(cfg):
    """Head-to-head EM vs NR on bit-identical data and initializations.

    Both estimators see the same networks, observations, channel noise, and
    initial points trial by trial; the summary reports mean iteration counts
    among jointly-converged trials and median SE over all trials (hard
    failures rank as +inf).
    """
    if cfg.channel != "quantized":
        raise ConfigError("the EM/NR comparison needs channel.kind = quantized")
    cfg_em = replace(cfg, estimator="em")
    cfg_nr = replace(cfg, estimator="nr")
    cells, ids = resolve_cells(cfg_em)
    tau = cfg_em.tau_grid
    rows = []
    for cell, data_id in zip(cells, ids):
        rec_em = run_cell_trials(cfg_em, cell, data_id)
        rec_nr = run_cell_trials(cfg_nr, cell, data_id)
        joint = [
            (e, n) for e, n in zip(rec_em, rec_nr) if e.converged and n.converged
        ]
        se_rank_em = [r.se if r.se is not None else np.inf for r in rec_em]
        se_rank_nr = [r.se if r.se is not None else np.inf for r in rec_nr]
        calib = _cell_calibration(cfg_em, cell)
        crlb_diag, crlb_error = _cell_crlb(cfg_em, cell, data_id, calib)
        rows.append(
            {
                "cell": {k: v for k, v in _cell_key_dict(cfg_em, cell).items() if k != "estimator"},
                "n_trials": len(rec_em),
                "n_jointly_converged": len(joint),
                "em": aggregate_cell(cfg_em, cell, rec_em, tau, crlb_diag, crlb_error),
                "nr": aggregate_cell(cfg_nr, cell, rec_nr, tau, crlb_diag, crlb_error),
                "em_mean_iterations_joint": (
                    float(np.mean([e.result.iterations for e, _ in joint])) if joint else None
                ),
                "nr_mean_iterations_joint": (
                    float(np.mean([n.result.iterations for _, n in joint])) if joint else None
                ),
                "em_median_se": float(np.median(se_rank_em)),
                "nr_median_se": float(np.median(se_rank_nr)),
            }
        )
    return {
        "version": __version__,
        "config": _config_dict(cfg),
        "param_names": list(PARAM_NAMES),
        "tau_grid": [float(v) for v in tau],
        "cells": rows,
    }


# ------------------------------------------------------------------- export


_CELL_KEY_COLUMNS = ("k", "channel", "m", "snr_o_db", "snr_c_db", "estimator", "region")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _cell_stat_rows(cell_row):
    """Fixed (statistic, value) enumeration for one cell's CSV rows."""
    stats = [
        ("n_trials", cell_row["n_trials"]),
        ("n_estimated", cell_row["n_estimated"]),
        ("n_converged", cell_row["n_converged"]),
        ("all_diverged", cell_row["all_diverged"]),
        ("mse", cell_row["mse"]),
        ("mse_converged", cell_row["mse_converged"]),
        ("mean_iterations_converged", cell_row["mean_iterations_converged"]),
    ]
    for prefix in ("box", "box_converged"):
        box = cell_row[prefix]
        for stat in ("median", "q1", "q3", "whisker_low", "whisker_high"):
            stats.append((f"{prefix}.{stat}", None if box is None else box[stat]))
        stats.append((f"{prefix}.n_outliers", None if box is None else len(box["outliers"])))
    for vec_name in ("variance_converged", "mean_converged", "crlb_diag"):
        vec = cell_row[vec_name]
        for idx, pname in enumerate(PARAM_NAMES):
            stats.append((f"{vec_name}.{pname}", None if vec is None else vec[idx]))
    return stats


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="")


def export_report(report, path, fmt="json"):
    """Write the report to one file: full nested JSON, or the per-cell
    statistics CSV (one row per cell and statistic)."""
    path = Path(path)
    try:
        if fmt == "json":
            path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        elif fmt == "csv":
            with _open_out(path) as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(list(_CELL_KEY_COLUMNS) + ["statistic", "value"])
                for cell_row in report["cells"]:
                    key = [_fmt_key(cell_row.get(c)) for c in _CELL_KEY_COLUMNS]
                    for stat, value in _cell_stat_rows(cell_row):
                        writer.writerow(key + [stat, _fmt(value)])
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def _fmt_key(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_po_csv(report, path):
    """Outlier-probability curves, one row per (cell, tau)."""
    path = Path(path)
    tau = report["tau_grid"]
    try:
        with _open_out(path) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(list(_CELL_KEY_COLUMNS) + ["tau", "po"])
            for cell_row in report["cells"]:
                key = [_fmt_key(cell_row.get(c)) for c in _CELL_KEY_COLUMNS]
                po = cell_row.get("po")
                if po is None:
                    continue
                for t, v in zip(tau, po):
                    writer.writerow(key + [repr(float(t)), repr(float(v))])
    except OSError as exc:
        raise OSError(f"cannot write outlier curves to {path}: {exc}") from exc
    return path


def export_trace_csv(record, path):
    """Iterate trace of a single trial: one row per iteration."""
    path = Path(path)
    try:
        with _open_out(path) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration"] + list(PARAM_NAMES) + ["loglik"])
            if record.result is not None:
                trace = record.result.trace
                logliks = record.result.loglik_trace
                for it in range(trace.shape[0]):
                    writer.writerow(
                        [str(it)]
                        + [repr(float(v)) for v in trace[it]]
                        + [repr(float(logliks[it]))]
                    )
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path


def load_report(path):
    """Parse a JSON report back into a dictionary."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -------------------------------------------------------------------- config


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _parse_scalar(key, text, kind):
    try:
        if kind is bool:
            word = text.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"not a boolean: {text!r}")
            return _BOOL_WORDS[word]
        return kind(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def _parse_list(key, text, kind):
    items = [part.strip() for part in str(text).split(",") if part.strip()]
    if not items:
        raise ConfigError(f"{key} must list at least one value")
    return tuple(_parse_scalar(key, part, kind) for part in items)


def parse_config_text(text):
    """Flat `key = value` lines; '#' starts a comment; later keys must not
    repeat earlier ones."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def config_from_mapping(mapping):
    """Build an ExperimentConfig from a flat dotted-key mapping; unknown keys
    are an error so typos never pass silently."""
    mapping = dict(mapping)

    def take(key, default=None):
        return mapping.pop(key, default)

    def scalar(key, kind, default):
        raw = take(key)
        return default if raw is None else _parse_scalar(key, str(raw), kind)

    def listing(key, kind, default):
        raw = take(key)
        if raw is None:
            return default
        if isinstance(raw, (list, tuple)):
            return tuple(kind(v) for v in raw)
        return _parse_list(key, str(raw), kind)

    base = ExperimentConfig()
    truth = FieldParams(
        h=scalar("field.h", float, base.truth.h),
        rho_x=scalar("field.rho_x", float, base.truth.rho_x),
        rho_y=scalar("field.rho_y", float, base.truth.rho_y),
        x_c=scalar("field.x_c", float, base.truth.x_c),
        y_c=scalar("field.y_c", float, base.truth.y_c),
    )
    area = Area(
        x_min=scalar("area.x_min", float, base.area.x_min),
        x_max=scalar("area.x_max", float, base.area.x_max),
        y_min=scalar("area.y_min", float, base.area.y_min),
        y_max=scalar("area.y_max", float, base.area.y_max),
    )
    solver = SolverConfig(
        tol=scalar("solver.tol", float, base.solver.tol),
        max_outer=scalar("solver.max_outer", int, base.solver.max_outer),
        max_inner=scalar("solver.max_inner", int, base.solver.max_inner),
        damping=scalar("solver.damping", int, base.solver.damping),
        ridge=scalar("solver.ridge", float, base.solver.ridge),
    )
    init_raw = take("init.theta")
    if init_raw is None:
        init_theta = base.init_theta
    else:
        values = (
            tuple(float(v) for v in init_raw)
            if isinstance(init_raw, (list, tuple))
            else _parse_list("init.theta", str(init_raw), float)
        )
        if len(values) != N_PARAMS:
            raise ConfigError(f"init.theta needs {N_PARAMS} values, got {len(values)}")
        init_theta = FieldParams.from_array(np.array(values))
    try:
        cfg = ExperimentConfig(
            truth=truth,
            area=area,
            k_values=listing("network.k", int, base.k_values),
            channel=str(take("channel.kind", base.channel)).strip(),
            m_values=listing("channel.m", int, base.m_values),
            quantizer_lo=scalar("channel.quantizer_lo", float, base.quantizer_lo),
            quantizer_hi=scalar("channel.quantizer_hi", float, base.quantizer_hi),
            snr_o_db=listing("snr.observation_db", float, base.snr_o_db),
            snr_c_db=listing("snr.channel_db", float, base.snr_c_db),
            estimator=str(take("estimator.kind", "auto")).strip(),
            solver=solver,
            trials=scalar("trials.count", int, base.trials),
            base_seed=scalar("trials.base_seed", int, base.base_seed),
            init_policy=str(take("init.policy", base.init_policy)).strip(),
            init_theta=init_theta,
            init_regions=listing("init.regions", int, base.init_regions),
            crlb_enabled=scalar("crlb.enabled", bool, base.crlb_enabled),
            crlb_method=str(take("crlb.method", base.crlb_method)).strip(),
            crlb_zeta=scalar("crlb.zeta", int, base.crlb_zeta),
            crlb_nodes=scalar("crlb.nodes", int, base.crlb_nodes),
            tau_min=scalar("report.tau_min", float, base.tau_min),
            tau_max=scalar("report.tau_max", float, base.tau_max),
            tau_count=scalar("report.tau_count", int, base.tau_count),
            grid=scalar("quadrature.grid", int, base.grid),
            workers=scalar("run.workers", int, base.workers),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if mapping:
        raise ConfigError(f"unknown configuration keys: {sorted(mapping)}")
    return cfg


def load_config(path=None, overrides=None):
    """Configuration from an optional file plus override mapping (CLI flags)."""
    mapping = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        mapping.update(parse_config_text(text))
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping)
