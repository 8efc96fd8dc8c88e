"""Command line entry points.

    pushrl train <config>        run training, write report, metrics, tables, figures
    pushrl commbench <config>    communication benchmark against the collect-time model
    pushrl plan --cores M (--profile FILE | --measure) [--config FILE]
    pushrl profile <config>      measure a throughput profile

Environment overrides: ``PUSHRL_METRICS`` (metrics file for ``train``) and
``PUSHRL_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...).

Exit codes: 0 success or target reached, 1 usage or config error, 2 runtime
failure, 3 budget exhausted without reaching the target.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from pushrl import config as cfgmod
from pushrl.config import ConfigError, RunConfig

log = logging.getLogger("pushrl")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_BUDGET = 0, 1, 2, 3
ENV_METRICS = "PUSHRL_METRICS"
ENV_LOG_LEVEL = "PUSHRL_LOG_LEVEL"


class UsageError(Exception):
    pass


def _out_dir(args, cfg_path) -> Path:
    out = Path(args.out) if args.out else Path("runs") / Path(cfg_path).stem
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path) -> RunConfig:
    try:
        return cfgmod.parse_config(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


# --- train ----------------------------------------------------------------------

def cmd_train(args) -> int:
    from pushrl import reports
    from pushrl.runtime import run_training

    cfg = _load(args.config)
    changes = {}
    if args.seed is not None:
        changes["environment"] = {"seed": args.seed}
        changes["model"] = {"seed": args.seed}
    if args.mode:
        changes["distribution"] = {"mode": args.mode}
    if changes:
        cfg = cfgmod.replace(cfg, **changes)
    out = _out_dir(args, args.config)
    metrics_path = Path(os.environ.get(ENV_METRICS) or args.metrics or out / "metrics.jsonl")
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    s = cfg.settings()
    log.info("training %s mode on %s, %d actor(s), %d learner(s)", s.mode, s.env.name,
             s.n_actors, s.n_learners)
    with open(metrics_path, "w") as metrics:
        report = run_training(s, metrics)
    report.write_jsonl(out / "report.jsonl")
    reports.training_tables(report, out / "train")
    if not args.no_figures:
        reports.training_figure(report, out / "train.png", s.window)
    print(f"mode={report.mode} reason={report.reason} steps={report.total_steps} "
          f"updates={report.updates} episodes={len(report.episodes)} "
          f"window_mean={report.final_window_mean:.3f} final_time={report.final_time}")
    print(f"outputs in {out}")
    if report.errors:
        for e in report.errors:
            print(f"worker failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if s.target_return is None or report.target_reached:
        return EXIT_OK
    return EXIT_BUDGET


# --- commbench ---------------------------------------------------------------------

def cmd_commbench(args) -> int:
    from pushrl import reports
    from pushrl.bench import commbench

    cfg = _load(args.config)
    c = cfg.commbench or cfgmod.CommbenchConfig()
    if args.samples:
        c = dataclasses.replace(c, n_samples=args.samples)
    out = _out_dir(args, args.config)

    def progress(n, size, t):
        log.info("actors=%d size=%d collection_time=%.3fs", n, size, t)

    rep = commbench(c.message_size, c.n_actors, c.sample_time, c.n_samples, c.transport,
                    c.queue_depth, c.message_sizes, repeats=args.repeats, progress=progress)
    (out / "commbench.csv").write_text(rep.to_csv())
    (out / "commbench.json").write_text(json.dumps(rep.as_dict(), indent=2))
    if not args.no_figures:
        reports.commbench_figure(rep, out / "commbench.png")
    cal = rep.calibration
    print(f"t_sp={cal.t_sp * 1e3:.3f}ms t_sd={cal.t_sd * 1e6:.1f}us t_rv={cal.t_rv * 1e6:.1f}us "
          f"predicted_switch={rep.predicted_switch:.2f} measured_onset={rep.measured_onset()}")
    print(f"{'actors':>6} {'measured_s':>10} {'model_s':>8} {'branch':>8} {'recv/s':>8}")
    for r in rep.rows + rep.size_rows:
        print(f"{r.n_actors:>6} {r.collection_time:>10.3f} {r.predicted_time:>8.3f} "
              f"{r.predicted_branch:>8} {r.receive_rate:>8.1f}")
    print(f"outputs in {out}")
    return EXIT_OK


# --- plan / profile ---------------------------------------------------------------------

def cmd_profile(args) -> int:
    from pushrl.bench import profile

    cfg = _load(args.config)
    prof = profile(cfg, args.duration)
    text = cfgmod.dumps_profile(prof)
    if args.out:
        Path(args.out).write_text(text)
        print(f"profile written to {args.out}")
    print(text, end="")
    return EXIT_OK


def cmd_plan(args) -> int:
    from pushrl.bench import profile
    from pushrl.strategy import plan

    base = _load(args.config) if args.config else RunConfig()
    if args.profile:
        prof = cfgmod.load_profile(args.profile)
    elif args.measure:
        prof = profile(base, args.duration)
    else:
        raise UsageError("plan needs --profile FILE or --measure")
    hp = base.training.hyperparams()
    p = plan(prof, args.cores, hp, n_learners=args.learners)
    planned = cfgmod.replace(
        base,
        distribution={"n_actors": p.n_actors, "n_learners": p.n_learners, "cores": p.total_cores},
        training={"buffer_capacity": p.adjusted_capacity},
        plan={"predicted_tr_a": p.predicted_tr_a, "predicted_tr_l": p.predicted_tr_l,
              "target_p": p.target_P, "m_l": p.m_l, "m_a": p.m_a, "bottleneck": p.bottleneck},
    )
    header = (f"allocation plan for {args.cores} cores\n"
              f"profile measured on: {prof.measured_on or 'unknown'}")
    text = cfgmod.dumps(planned, header)
    if args.out:
        Path(args.out).write_text(text)
    print(f"learners={p.n_learners} actors={p.n_actors} m_l={p.m_l} m_a={p.m_a} "
          f"TR_A={p.predicted_tr_a:.1f} TR_L={p.predicted_tr_l:.1f} "
          f"capacity={p.adjusted_capacity} target_P={p.target_P:.4g}")
    print(f"predicted bottleneck: {p.bottleneck}")
    if args.out:
        print(f"plan written to {args.out}")
    return EXIT_OK


# --- entry ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pushrl", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run training from a config file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default runs/<config name>)")
    p.add_argument("--metrics", help=f"metrics JSON-lines path (env {ENV_METRICS} wins)")
    p.add_argument("--seed", type=int, help="override environment and model seeds")
    p.add_argument("--mode", choices=("serial", "distributed"))
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("commbench", help="communication benchmark")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--samples", type=int, help="override commbench.n_samples")
    p.add_argument("--repeats", type=int, default=3, help="runs per sweep point (median kept)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_commbench)

    p = sub.add_parser("plan", help="solve for an actor/learner allocation")
    p.add_argument("--cores", type=int, required=True, help="total cores M")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--profile", help="profile file written by 'pushrl profile'")
    src.add_argument("--measure", action="store_true", help="profile the --config now")
    p.add_argument("--config", help="base config supplying hyperparameters")
    p.add_argument("--learners", type=int, help="pin the learner count")
    p.add_argument("--duration", type=float, default=6.0, help="seconds for --measure")
    p.add_argument("--out", help="write the planned config here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("profile", help="measure single-unit throughputs")
    p.add_argument("config")
    p.add_argument("--duration", type=float, default=6.0)
    p.add_argument("--out", help="write the profile file here")
    p.set_defaults(func=cmd_profile)
    return ap


def main(argv=None) -> int:
    from pushrl.bench import BenchError, ProfileError
    from pushrl.strategy import StrategyError

    logging.basicConfig(level=os.environ.get(ENV_LOG_LEVEL, "WARNING").upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; ours is 1
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StrategyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BenchError, ProfileError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception:
        log.exception("unexpected failure")
        print("runtime failure (see log above)", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
