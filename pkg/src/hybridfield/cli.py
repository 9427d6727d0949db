"""Command-line entry points.

Subcommands: design-pilot (run the ADMM designer and persist the pilot),
simulate (one Monte Carlo point, printed as a table), sweep (full sweep
from a config file, written to CSV/JSON), coherence-report (pilot
coherence comparison). Exit codes: 0 success, 2 config error, 3
numerical failure.
"""
import argparse
import sys

import numpy as np

from .channel import transform_dictionary
from .config import SystemConfig, config_from_mapping, load_config_file
from .errors import ConfigError, NumericalError
from .harness import (ESTIMATOR_NAMES, SweepSpec, run_point, run_sweep,
                      write_results)
from .los import LosSearchConfig
from .pilot_design import (AdmmSchedule, admm_pilot_design, baseline_pilot,
                           load_pilot, mutual_coherence, save_pilot)

RANDOM_PILOT_TRIALS = ("random_binary", "unimodular_random_phase")


def _load(args):
    raw = load_config_file(args.config) if args.config else {}
    cfg = config_from_mapping(raw)
    overrides = {}
    for attr, field in (("pilot_len", "pilot_len"),
                        ("num_antennas", "num_antennas"),
                        ("distance_rings", "distance_rings"),
                        ("snr_db", None)):
        value = getattr(args, attr, None)
        if value is None:
            continue
        if attr == "snr_db":
            cfg = cfg.with_snr_db(value)
        else:
            overrides[field] = value
    if overrides:
        cfg = cfg.with_updates(**overrides)
    return cfg, raw


def _schedule(args):
    sched = AdmmSchedule()
    if getattr(args, "iters", None) is not None:
        sched.outer = args.iters
        sched.ramp = min(sched.ramp, args.iters)
    if getattr(args, "rho_start", None) is not None:
        sched.rho_start = args.rho_start
    if getattr(args, "rho_end", None) is not None:
        sched.rho_end = args.rho_end
    if getattr(args, "ramp", None) is not None:
        sched.ramp = args.ramp
    return sched


def cmd_design_pilot(args):
    cfg, _ = _load(args)
    F, _ = transform_dictionary(cfg)
    rng = np.random.default_rng(args.seed)
    X, state = admm_pilot_design(F, cfg, _schedule(args), rng)
    save_pilot(args.out, X, history=state.history)
    print(f"designed {cfg.pilot_len} x {cfg.num_antennas} pilot in "
          f"{state.iteration} iterations")
    print(f"coherence {state.best_coherence:.4f}  residual {state.residual:.4f}")
    print(f"wrote {args.out} (+ .json history)")
    return 0


def _pilot_for(args, cfg):
    if args.pilot:
        return load_pilot(args.pilot)
    rng = np.random.default_rng(args.seed)
    if args.pilot_kind == "admm":
        F, _ = transform_dictionary(cfg)
        X, _ = admm_pilot_design(F, cfg, AdmmSchedule(), rng)
        return X
    return baseline_pilot(args.pilot_kind, cfg, rng)


def cmd_simulate(args):
    cfg, raw = _load(args)
    estimators = args.estimators.split(",") if args.estimators else list(ESTIMATOR_NAMES)
    X = _pilot_for(args, cfg)
    from .harness import make_workspace
    ws = make_workspace(cfg, X, args.bmp_iters, LosSearchConfig.from_mapping(raw))
    stats = run_point(cfg, estimators, args.trials, args.seed,
                      threads=args.threads, workspace=ws)
    print(f"{'estimator':<12} {'nmse':>12} {'nmse_db':>9} {'se':>8} {'fail':>5}")
    for name in estimators:
        s = stats[name]
        print(f"{name:<12} {s['nmse_mean']:>12.6g} {s['nmse_db']:>9.2f} "
              f"{s['se_mean']:>8.3f} {s['failures']:>5d}")
    return 0


def cmd_sweep(args):
    cfg, raw = _load(args)
    section = raw.get("sweep")
    if not isinstance(section, dict):
        raise ConfigError("config file needs a `sweep` section")
    if "param" not in section or "values" not in section:
        raise ConfigError("sweep section needs `param` and `values`")
    estimators = args.estimators.split(",") if args.estimators \
        else section.get("estimators", list(ESTIMATOR_NAMES))
    spec = SweepSpec(
        param=section["param"], values=section["values"], base=cfg,
        trials=args.trials or section.get("trials", 200),
        estimators=tuple(estimators),
        seed=args.seed, pilot=args.pilot_kind or section.get("pilot", "admm"),
        threads=args.threads, gamma=section.get("gamma", 1.0),
        bmp_iters=section.get("bmp_iters", 6),
        search=LosSearchConfig.from_mapping(raw))
    result = run_sweep(spec)
    write_results(result, args.out, args.format)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    return 0


def cmd_coherence_report(args):
    cfg, _ = _load(args)
    F, _ = transform_dictionary(cfg)
    rows = []
    for kind in RANDOM_PILOT_TRIALS:
        mus = []
        for t in range(args.trials):
            rng = np.random.default_rng(np.random.SeedSequence((args.seed, t)))
            mus.append(mutual_coherence(baseline_pilot(kind, cfg, rng) @ F))
        mus = np.asarray(mus)
        rows.append((kind, mus.mean(), mus.std(ddof=1) / np.sqrt(mus.size),
                     args.trials))
    rng = np.random.default_rng(args.seed)
    rows.append(("zadoff_chu",
                 mutual_coherence(baseline_pilot("zadoff_chu", cfg, rng) @ F),
                 0.0, 1))
    mus = []
    for t in range(args.trials):
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, t)))
        mus.append(mutual_coherence(baseline_pilot("gaussian", cfg, rng)))
    mus = np.asarray(mus)
    rows.append(("gaussian", mus.mean(), mus.std(ddof=1) / np.sqrt(mus.size),
                 args.trials))
    if args.pilot:
        rows.append(("admm", mutual_coherence(load_pilot(args.pilot) @ F),
                     0.0, 1))
    lines = ["pilot,coherence_mean,coherence_stderr,trials"]
    for kind, mean, stderr, trials in rows:
        lines.append(f"{kind},{float(mean)!r},{float(stderr)!r},{trials}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="hybridfield")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials_default):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=trials_default)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("design-pilot", help="run the ADMM pilot designer")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output pilot file")
    p.add_argument("-M", "--pilot-len", type=int, dest="pilot_len")
    p.add_argument("-N", "--num-antennas", type=int, dest="num_antennas")
    p.add_argument("-Q", "--distance-rings", type=int, dest="distance_rings")
    p.add_argument("--iters", type=int, help="outer ADMM iterations")
    p.add_argument("--rho-start", type=float, dest="rho_start")
    p.add_argument("--rho-end", type=float, dest="rho_end")
    p.add_argument("--ramp", type=int, help="iterations to reach rho-end")
    p.set_defaults(func=cmd_design_pilot)

    p = sub.add_parser("simulate", help="one Monte Carlo point")
    common(p, 100)
    p.add_argument("--estimators", help="comma-separated estimator names")
    p.add_argument("--pilot", help="pilot file from design-pilot")
    p.add_argument("--pilot-kind", default="unimodular_random_phase")
    p.add_argument("--snr-db", type=float, dest="snr_db")
    p.add_argument("--bmp-iters", type=int, default=6)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="full sweep from the config file")
    common(p, None)
    p.add_argument("--estimators")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--pilot-kind", dest="pilot_kind")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("coherence-report", help="pilot coherence comparison")
    common(p, 100)
    p.add_argument("--out")
    p.add_argument("--pilot", help="include a designed pilot file")
    p.set_defaults(func=cmd_coherence_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
