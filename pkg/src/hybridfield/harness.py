"""Seeded Monte Carlo reproduction engine.

Runs the end-to-end estimation pipelines over sweeps of SNR, pilot
length, antenna count, near-field ratio, or data power ratio; collects
NMSE / spectral-efficiency statistics; persists CSV/JSON results whose
bytes are a pure function of (spec, master seed) regardless of the
worker-thread count.
"""
import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .channel import receive_pilots, synth_hybrid_channel, transform_dictionary
from .config import SystemConfig
from .errors import ConfigError
from .los import LosSearchConfig, estimate_los, grid_projection
from .pilot_design import AdmmSchedule, admm_pilot_design, baseline_pilot, load_pilot
from .scattering import bmp_with_prior, bmp_without_prior, genie_ls, hf_omp_baseline, make_priors

log = logging.getLogger(__name__)

# scatterer geometry stream salt: antenna sweeps keep scatterers fixed
# across sweep points by seeding geometry from (seed, SALT, trial) only
GEOMETRY_SALT = 0x67656F6D

ESTIMATOR_NAMES = ("genie-ls", "bmp-csi", "bmp-nocsi", "hf-omp")


@dataclass
class FrameSpec:
    coherence_time: float = 0.5e-3
    symbol_time: float = 4.17e-6


def nmse(h_hat, h):
    """Per-trial squared error ratio ||h_hat - h||^2 / ||h||^2."""
    denom = float(np.vdot(h, h).real)
    if denom == 0:
        raise ValueError("true channel has zero norm")
    diff = h_hat - h
    return float(np.vdot(diff, diff).real) / denom


def spectral_efficiency(h_hat, h, gamma, cfg, frame=None):
    """Pilot-overhead-scaled rate with a matched-filter beam toward the
    estimate: (1 - M T_sym / T_coh) log2(1 + gamma P_x |h_hat^H h|^2 /
    (||h_hat||^2 sigma_w^2))."""
    frame = frame or FrameSpec()
    overhead = 1.0 - cfg.pilot_len * frame.symbol_time / frame.coherence_time
    if overhead <= 0:
        return 0.0
    power = float(np.vdot(h_hat, h_hat).real)
    if power == 0:
        return 0.0
    match = abs(np.vdot(h_hat, h)) ** 2 / power
    if cfg.noise_var <= 0:
        return float("inf") if match > 0 else 0.0
    snr_eff = gamma * cfg.pilot_power * match / cfg.noise_var
    return overhead * float(np.log2(1.0 + snr_eff))


@dataclass
class PointWorkspace:
    """Per-sweep-point precomputation shared by every trial."""

    cfg: SystemConfig
    X: np.ndarray
    F: np.ndarray
    ring_dists: np.ndarray
    Psi: np.ndarray
    priors: object
    projection: object
    bmp_iters: int
    search: LosSearchConfig


def make_workspace(cfg, X, bmp_iters=6, search=None):
    F, ring_dists = transform_dictionary(cfg)
    if X.shape != (cfg.pilot_len, cfg.num_antennas):
        raise ConfigError(
            f"pilot shape {X.shape} does not match config "
            f"({cfg.pilot_len} x {cfg.num_antennas})")
    search = search or LosSearchConfig()
    return PointWorkspace(cfg=cfg, X=X, F=F, ring_dists=ring_dists,
                          Psi=X @ F, priors=make_priors(cfg, F.shape[1]),
                          projection=grid_projection(X, cfg, search),
                          bmp_iters=bmp_iters, search=search)


def _two_stage(ws, y, with_prior):
    est = estimate_los(y, ws.X, ws.cfg, ws.search, ws.projection)
    if with_prior:
        r_grid = np.concatenate([np.full(ws.cfg.num_antennas, est.r_hat),
                                 ws.ring_dists])
        _, h_ap, _ = bmp_with_prior(est.residual, ws.Psi, ws.priors, r_grid,
                                    ws.bmp_iters, ws.cfg.num_antennas)
    else:
        _, h_ap, _ = bmp_without_prior(est.residual, ws.Psi,
                                       ws.cfg.noise_var, ws.bmp_iters)
    return est.h_los_hat + ws.F @ h_ap


def _estimate(name, ws, chan, y):
    if name == "genie-ls":
        return genie_ls(y, ws.X, ws.Psi, chan, ws.cfg, ws.F)
    if name == "bmp-csi":
        return _two_stage(ws, y, with_prior=True)
    if name == "bmp-nocsi":
        return _two_stage(ws, y, with_prior=False)
    if name == "hf-omp":
        # LoS is folded into the far-field components: one extra far pick
        _, h_dense = hf_omp_baseline(y, ws.Psi, ws.cfg.num_antennas,
                                     ws.cfg.num_far + 1, ws.cfg.num_near,
                                     F=ws.F)
        return h_dense
    raise ConfigError(f"unknown estimator {name!r}")


def run_point(cfg, estimators, trials, seed, point_index=0, threads=1,
              workspace=None, fixed_geometry=False, gamma=1.0, frame=None,
              pilot=None, bmp_iters=6, search=None):
    """Monte Carlo statistics for one sweep point.

    Per-trial rng streams derive from (seed, point_index, trial), so any
    worker-thread count reproduces the same numbers; with
    fixed_geometry=True the channel draw instead uses (seed, SALT, trial)
    and is shared across sweep points (antenna sweeps). Failed estimator
    runs are excluded from the statistics and counted.
    """
    for name in estimators:
        if name not in ESTIMATOR_NAMES:
            raise ConfigError(f"unknown estimator {name!r}")
    ws = workspace
    if ws is None:
        X = pilot if pilot is not None else baseline_pilot(
            "unimodular_random_phase", cfg, np.random.default_rng(seed))
        ws = make_workspace(cfg, X, bmp_iters, search)

    def one_trial(t):
        rng_point = np.random.default_rng(
            np.random.SeedSequence((seed, point_index, t)))
        if fixed_geometry:
            rng_geom = np.random.default_rng(
                np.random.SeedSequence((seed, GEOMETRY_SALT, t)))
        else:
            rng_geom = rng_point   # one stream: synthesis then noise
        chan = synth_hybrid_channel(cfg, rng_geom, (ws.F, ws.ring_dists))
        y = receive_pilots(chan.h, ws.X, cfg.noise_var, rng_point)
        out = {}
        for name in estimators:
            try:
                h_hat = _estimate(name, ws, chan, y)
                out[name] = (nmse(h_hat, chan.h),
                             spectral_efficiency(h_hat, chan.h, gamma, cfg, frame))
            except Exception:
                log.exception("estimator %s failed on trial %d", name, t)
                out[name] = None
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(one_trial, range(trials)))
    else:
        per_trial = [one_trial(t) for t in range(trials)]

    stats = {}
    for name in estimators:
        vals = [per_trial[t][name] for t in range(trials)]
        good = [v for v in vals if v is not None]
        failures = trials - len(good)
        if good:
            nm = np.array([v[0] for v in good])
            se = np.array([v[1] for v in good])
            mean = float(nm.mean())
            stderr = float(nm.std(ddof=1) / np.sqrt(nm.size)) if nm.size > 1 else 0.0
            stats[name] = {"nmse_mean": mean,
                           "nmse_db": 10.0 * float(np.log10(mean)) if mean > 0 else -np.inf,
                           "nmse_stderr": stderr,
                           "se_mean": float(se.mean()),
                           "trials": trials, "failures": failures}
        else:
            stats[name] = {"nmse_mean": float("nan"), "nmse_db": float("nan"),
                           "nmse_stderr": float("nan"), "se_mean": float("nan"),
                           "trials": trials, "failures": failures}
    return stats


SWEEP_PARAMS = ("snr_db", "pilot_len", "num_antennas", "near_ratio",
                "data_power_ratio")


@dataclass
class SweepSpec:
    param: str
    values: list
    base: SystemConfig = field(default_factory=SystemConfig)
    trials: int = 200
    estimators: tuple = ESTIMATOR_NAMES
    seed: int = 0
    pilot: str = "admm"          # pilot kind, or "file:PATH"
    threads: int = 1
    gamma: float = 1.0
    bmp_iters: int = 6
    design: AdmmSchedule = None
    frame: FrameSpec = None
    search: LosSearchConfig = None

    def validate(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {self.param!r}")
        if not self.values:
            raise ConfigError("sweep value list is empty")
        if sorted(self.values) != list(self.values):
            raise ConfigError("sweep values must be sorted")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 < self.gamma <= 1:
            raise ConfigError("data_power_ratio gamma must lie in (0, 1]")


def _apply_param(spec, value):
    cfg, gamma = spec.base, spec.gamma
    if spec.param == "snr_db":
        cfg = cfg.with_snr_db(value)
    elif spec.param == "pilot_len":
        cfg = replace(cfg, pilot_len=int(value))
    elif spec.param == "num_antennas":
        cfg = replace(cfg, num_antennas=int(value))
    elif spec.param == "near_ratio":
        total = cfg.num_paths
        near = int(round(value * total))
        cfg = replace(cfg, num_far=total - near, num_near=near)
    elif spec.param == "data_power_ratio":
        gamma = float(value)
    return cfg, gamma


class PilotCache:
    """Designed-pilot store keyed by (M, N, Q, seed)."""

    def __init__(self):
        self._store = {}

    def get(self, spec, cfg):
        kind = spec.pilot
        if kind.startswith("file:"):
            return load_pilot(kind[5:])
        key = (cfg.pilot_len, cfg.num_antennas, cfg.distance_rings, spec.seed)
        if key not in self._store:
            rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0xB1107)))
            if kind == "admm":
                F, _ = transform_dictionary(cfg)
                sched = spec.design if spec.design is not None else AdmmSchedule()
                X, _ = admm_pilot_design(F, cfg, sched, rng)
            else:
                X = baseline_pilot(kind, cfg, rng)
            self._store[key] = X
        return self._store[key]


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    provenance: dict


def _spec_digest(spec):
    payload = {
        "param": spec.param, "values": list(spec.values),
        "trials": spec.trials, "estimators": list(spec.estimators),
        "seed": spec.seed, "pilot": spec.pilot, "gamma": spec.gamma,
        "bmp_iters": spec.bmp_iters,
        "config": {k: repr(v) for k, v in vars(spec.base).items()},
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def run_sweep(spec):
    """Execute a SweepSpec; returns a SweepResult with one row per
    (point, estimator). Antenna sweeps reuse scatterer geometry across
    points; pilots are designed (or loaded) once per distinct (M, N, Q)."""
    spec.validate()
    cache = PilotCache()
    rows = []
    for i, value in enumerate(spec.values):
        cfg, gamma = _apply_param(spec, value)
        X = cache.get(spec, cfg)
        ws = make_workspace(cfg, X, spec.bmp_iters, spec.search)
        stats = run_point(cfg, spec.estimators, spec.trials, spec.seed,
                          point_index=i, threads=spec.threads, workspace=ws,
                          fixed_geometry=(spec.param == "num_antennas"),
                          gamma=gamma, frame=spec.frame)
        for name in spec.estimators:
            row = {"sweep_param": spec.param, "value": value, "estimator": name}
            row.update(stats[name])
            row["seed"] = spec.seed
            rows.append(row)
    provenance = {"config_sha256": _spec_digest(spec), "seed": spec.seed,
                  "version": __version__}
    return SweepResult(spec=spec, rows=rows, provenance=provenance)


CSV_COLUMNS = ("sweep_param", "value", "estimator", "nmse_mean", "nmse_db",
               "nmse_stderr", "se_mean", "trials", "failures", "seed")


def _format_cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(result, path, format="csv"):
    """Persist a SweepResult. CSV carries exactly the documented columns;
    JSON mirrors the rows plus a provenance block. Output bytes depend
    only on the result content."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow([_format_cell(row[col]) for col in CSV_COLUMNS])
        payload = buf.getvalue()
    elif format == "json":
        doc = {"provenance": result.provenance,
               "rows": [{col: row[col] for col in CSV_COLUMNS}
                        for row in result.rows]}
        payload = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    else:
        raise ConfigError(f"unknown output format {format!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(payload)
    except OSError as exc:
        raise ConfigError(f"cannot write results to {path}: {exc}") from exc
