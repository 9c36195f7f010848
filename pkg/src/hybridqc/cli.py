"""Command-line front end: ``hybridqc <subcommand> ...``.

Every subcommand writes its outputs into ``--out`` and finishes by writing
``manifest.json`` there. Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 a result check failed.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .config import Mode, config_from_dict
from .ensemble import run_ensemble
from .errors import ConfigError, HybridError
from .io import (RunManifest, Stopwatch, apply_overrides, dump_config, env_overrides,
                 parse_config, write_json, write_table_csv, write_trajectory_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4


class CheckFailed(Exception):
    pass


def _numeric_overrides(args):
    return {("numerics", "dt"): args.dt, ("numerics", "t_final"): args.t_final,
            ("numerics", "output_stride"): args.output_stride, (None, "seed"): args.seed}


def _load(args, mode=None):
    snapshot = getattr(args, "config_data", None)
    if snapshot is not None:
        return config_from_dict(snapshot)
    overrides = _numeric_overrides(args)
    if mode is not None:
        overrides[(None, "mode")] = mode
    if args.config is None:
        data = experiments.default_config().to_dict()
        data = apply_overrides(data, env_overrides())
        return config_from_dict(apply_overrides(data, overrides))
    return parse_config(args.config, overrides)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


REPLAY_SKIP = ("func", "out", "config", "config_data")


def _finish(manifest, out, files, checks, args):
    for f in files:
        manifest.add_file(f, out)
    manifest.arguments["checks"] = checks
    replay = {k: v for k, v in vars(args).items() if k not in REPLAY_SKIP}
    replay["config_given"] = (getattr(args, "config", None) is not None
                              or args.config_data is not None)
    manifest.arguments["replay"] = replay
    manifest.write(out)
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise CheckFailed("checks failed: " + ", ".join(failed))


def cmd_simulate(args):
    cfg = _load(args, args.mode)
    out = _outdir(args)
    with Stopwatch() as sw:
        rec = experiments.simulate(cfg, cfg.seed)
    files = [write_trajectory_csv(rec, out / "trajectory.csv")]
    (out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    files.append(out / "config.yaml")
    m = RunManifest("simulate", cfg.to_dict(), {"master_seed": cfg.seed, "index": 0},
                    steps=cfg.numerics.n_steps, wall_clock=sw.elapsed,
                    arguments={"mode": cfg.mode.value})
    checks = {"finite_output": bool(np.all(np.isfinite(rec.as_array()[:-1])))}
    _finish(m, out, files, checks, args)
    return {"trajectory": str(out / "trajectory.csv"), "config_hash": cfg.config_hash()}


def cmd_ensemble(args):
    cfg = _load(args)
    if cfg.mode is Mode.MEANFIELD:
        raise ConfigError("mode", "ensemble needs a stochastic mode (hybrid or chain)")
    out = _outdir(args)
    with Stopwatch() as sw:
        s = run_ensemble(cfg, args.n, cfg.seed, chunk=args.chunk, workers=args.workers)
    files = [write_json(s.to_dict(), out / "summary.json")]
    rows = s.branch_table()
    files.append(write_table_csv(
        {"branch": [r["branch"] for r in rows], "count": [r["count"] for r in rows],
         "frequency": [r["frequency"] for r in rows],
         "wilson_low": [r.get("wilson_low", float("nan")) for r in rows],
         "wilson_high": [r.get("wilson_high", float("nan")) for r in rows]},
        out / "branches.csv", "branch frequencies with 95% Wilson intervals"))
    moments = {"t": s.t}
    for key, val in s.moments.items():
        moments[f"mean_{key}"] = val
        moments[f"se_{key}"] = s.moment_se[key]
    files.append(write_table_csv(moments, out / "moments.csv", "ensemble moment curves"))
    if args.trajectories:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for i in range(args.n):
            files.append(write_trajectory_csv(experiments.simulate(cfg, cfg.seed, i),
                                              tdir / f"trajectory_{i:06d}.csv"))
    m = RunManifest("ensemble", cfg.to_dict(), {"master_seed": cfg.seed,
                                                "indices": [0, args.n - 1]},
                    steps=cfg.numerics.n_steps * args.n, wall_clock=sw.elapsed,
                    arguments={"n": args.n, "chunk": args.chunk})
    checks = {"unresolved_below_1pct": s.unresolved < 0.01 * s.n_trajectories}
    _finish(m, out, files, checks, args)
    return s.to_dict()


def cmd_compare(args):
    cfg = _load(args)
    out = _outdir(args)
    with Stopwatch() as sw:
        r = experiments.compare_conventions(cfg, args.n, args.n_broad, t_star=args.t_star,
                                            master_seed=cfg.seed)
    curves = {"t": r["t"]}
    for name in ("chain", "chain_consistent", "paper_literal"):
        curves[f"var_{name}"] = r["variance_curves"][name]
        curves[f"se_{name}"] = r["variance_se"][name]
    curves["var_unmeasured"] = r["unmeasured_curve"]
    files = [write_table_csv(curves, out / "variance_curves.csv",
                             "ensemble mean Var(x)(t) for a broad packet")]
    summary = {k: r[k] for k in ("ground_moments", "agreement", "t_star", "discrimination",
                                 "excess_decay_ratio", "drift_ratio", "selected")}
    files.append(write_json(summary, out / "summary.json"))
    m = RunManifest("compare-conventions", cfg.to_dict(), {"master_seed": cfg.seed},
                    wall_clock=sw.elapsed, arguments={"n": args.n, "n_broad": args.n_broad})
    a = r["agreement"]["chain_consistent"]
    checks = {"chain_matches_mean": a["mean_z"] < 3, "chain_matches_variance": a["var_z"] < 3,
              "discrimination_above_3": r["discrimination"] > 3}
    _finish(m, out, files, checks, args)
    return summary


def cmd_scaling(args):
    out = _outdir(args)
    with Stopwatch() as sw:
        r = experiments.localization_scaling(tuple(args.separations), tuple(args.sigmas),
                                             args.sep_for_sigma, args.lam, args.n, args.seed)
    rows = r["separation_rows"] + r["sigma_rows"]
    table = {k: [row[k] for row in rows] for k in rows[0]}
    files = [write_table_csv(table, out / "localization.csv",
                             "median localization time with quartiles per (separation, sigma)")]
    summary = {k: r[k] for k in ("separation_exponent", "sigma_exponent", "sigma_direction",
                                 "verbal_sigma_claim_consistent")}
    files.append(write_json(summary, out / "summary.json"))
    m = RunManifest("scaling", {}, {"master_seed": args.seed}, wall_clock=sw.elapsed,
                    arguments={"lam": args.lam, "n": args.n, "separations": args.separations,
                               "sigmas": args.sigmas})
    checks = {"separation_exponent_in_range": -2.4 <= r["separation_exponent"] <= -1.6,
              "sigma_monotone": r["sigma_direction"] != "non-monotone"}
    _finish(m, out, files, checks, args)
    return summary


def cmd_oracle(args):
    cfg = None if args.config is None else _load(args)
    out = _outdir(args)
    times = tuple(np.round(np.linspace(0, args.t_end, args.points + 1)[1:], 12))
    with Stopwatch() as sw:
        r = experiments.lindblad_comparison(cfg, args.n, times,
                                            master_seed=args.seed if cfg is None else cfg.seed)
    table = {"t": r["t"], "purity": r["oracle_purity"][1:],
             "trace_distance_chain_consistent": r["chain_consistent"],
             "trace_distance_paper_literal": r["paper_literal"]}
    files = [write_table_csv(table, out / "trace_distance.csv",
                             "ensemble mixture vs master equation")]
    m = RunManifest("oracle", (cfg or experiments.default_config()).to_dict(),
                    {"master_seed": args.seed}, wall_clock=sw.elapsed,
                    arguments={"n": args.n, "times": list(times)})
    checks = {"purity_non_increasing": r["purity_non_increasing"],
              "trace_distance_below_0.05": max(r["chain_consistent"]) < 0.05}
    _finish(m, out, files, checks, args)
    return {"final_trace_distance": r["chain_consistent"][-1]}


def cmd_replay(args):
    old = RunManifest.read(args.manifest)
    saved = old.arguments.get("replay")
    if saved is None or old.command not in COMMANDS:
        raise ConfigError("manifest", "no replay record for this manifest")
    saved = dict(saved)
    given = saved.pop("config_given")
    rerun = argparse.Namespace(**saved, out=args.out, config=None,
                               config_data=old.config if given else None)
    COMMANDS[old.command](rerun)
    new = RunManifest.read(Path(args.out) / "manifest.json")
    before = {f["path"]: f["sha256"] for f in old.files}
    after = {f["path"]: f["sha256"] for f in new.files}
    differ = sorted(k for k in before.keys() | after.keys() if before.get(k) != after.get(k))
    if differ:
        raise CheckFailed("replay outputs differ: " + ", ".join(differ))
    return {"command": old.command, "files": len(after), "identical": True}


COMMANDS = {"simulate": cmd_simulate, "ensemble": cmd_ensemble,
            "compare-conventions": cmd_compare, "scaling": cmd_scaling, "oracle": cmd_oracle}


def build_parser():
    p = argparse.ArgumentParser(prog="hybridqc",
                                description="Hybrid quantum-classical trajectory simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("config", help="YAML configuration file")
        else:
            sp.add_argument("config", nargs="?", help="YAML configuration file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--t-final", type=float)
        sp.add_argument("--output-stride", type=int)

    sp = sub.add_parser("simulate", help="one trajectory to CSV")
    common(sp)
    sp.add_argument("--mode", choices=[m.value for m in Mode])
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ensemble", help="n trajectories, branch table and moments")
    common(sp)
    sp.add_argument("-n", type=int, default=1000)
    sp.add_argument("--chunk", type=int, default=250)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--trajectories", action="store_true", help="also write per-trajectory CSVs")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("compare-conventions", help="chain versus both SDE conventions")
    common(sp, config_required=False)
    sp.add_argument("-n", type=int, default=2000)
    sp.add_argument("--n-broad", type=int, default=400)
    sp.add_argument("--t-star", type=float, default=0.2)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("scaling", help="localization time versus separation and sigma")
    sp.add_argument("--out", default="out")
    sp.add_argument("--seed", type=int, default=19)
    sp.add_argument("-n", type=int, default=300)
    sp.add_argument("--lam", type=float, default=4.0)
    sp.add_argument("--separations", type=float, nargs="+", default=[4.0, 8.0, 16.0])
    sp.add_argument("--sigmas", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    sp.add_argument("--sep-for-sigma", type=float, default=10.0)
    sp.set_defaults(func=cmd_scaling)

    sp = sub.add_parser("oracle", help="frozen-X ensemble versus master equation")
    common(sp, config_required=False)
    sp.add_argument("-n", type=int, default=5000)
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--points", type=int, default=10)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("replay", help="rerun a manifest and compare output digests")
    sp.add_argument("manifest", help="manifest.json of an earlier run")
    sp.add_argument("--out", default="replay", help="output directory for the rerun")
    sp.set_defaults(func=cmd_replay)
    return p


def error_record(exc, code):
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("path", "reason", "step"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    return rec


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (CheckFailed, AssertionError)):
        return EXIT_CHECK
    if isinstance(exc, (HybridError, FloatingPointError)):
        return EXIT_NUMERICAL
    return None


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.config_data = None
    try:
        result = args.func(args)
    except Exception as exc:
        code = exit_code(exc)
        if code is None:
            raise
        print(json.dumps(error_record(exc, code)), file=sys.stderr)
        return code
    print(json.dumps(result, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
