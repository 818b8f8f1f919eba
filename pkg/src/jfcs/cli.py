"""Command line entry point: simulate, benchmark, sweep, verify."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import SCHEMES, ConfigError, PRESETS, load_config
from .export import ExportError, export_csv
from .sim import SWEEP_PARAMS, run_simulation, sweep, theorem_inputs

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "JFCS_OUT_DIR"

log = logging.getLogger("jfcs")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="base parameter set (default table1)")
    p.add_argument("--phi", type=float)
    p.add_argument("--scheduler", choices=("mrt", "zfbf"))
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--out", help=f"output directory (else ${OUT_ENV}, else config)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jfcs", description="Flow-split, congestion control and "
                                 "scheduling simulator for multi-RU radio access networks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and export CSV traces")
    _common(p)
    p.add_argument("--scheme", choices=SCHEMES)

    p = sub.add_parser("benchmark", help="run the learning scheme against the reference schemes")
    _common(p)
    p.add_argument("--schemes", default=",".join(SCHEMES),
                   help="comma separated list (default: all)")

    p = sub.add_parser("sweep", help="sweep phi, M or lambda")
    _common(p)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p.add_argument("--values", default="", help="comma separated values")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("verify", help="check the drift inequality and queue bound on a run")
    _common(p)
    p.add_argument("--scheme", choices=SCHEMES)
    return ap


def _config(args):
    over = {k: getattr(args, k, None) for k in ("phi", "scheduler", "seed", "frames", "scheme")}
    out = args.out or os.environ.get(OUT_ENV) or None
    over["out"] = out
    return load_config(args.config, args.preset, **over)


def _progress(total, verbose):
    if not verbose:
        return None
    step = max(1, total // 20)

    def cb(t):
        if t % step == 0 or t == total:
            log.info("frame %d/%d", t, total)
    return cb


def _summary_lines(summary: dict) -> list[str]:
    keys = ("steady_a_norm", "steady_qhat_l1", "worst_delay", "convergence_slots",
            "drift_violations", "infeasible_events")
    return [f"{k:>20}: {summary[k]:.6g}" if isinstance(summary[k], float) else
            f"{k:>20}: {summary[k]}" for k in keys if k in summary]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    tr = run_simulation(cfg, _progress(cfg.frames, args.verbose))
    files = export_csv(tr, cfg.out)
    print(f"scheme {cfg.scheme}, scheduler {cfg.scheduler}, {tr.n_frames} frames")
    print("\n".join(_summary_lines(tr.summary)))
    print(f"wrote {files['slots'].parent}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown scheme(s): {', '.join(bad)}")
    rows = []
    for s in schemes:
        tr = run_simulation(cfg.replace(scheme=s), _progress(cfg.frames, args.verbose))
        export_csv(tr, Path(cfg.out) / s)
        rows.append((s, tr.summary))
    print(f"{'scheme':>10} {'steady |a|':>14} {'steady |qhat|_1':>16} {'worst delay':>12}")
    for s, m in rows:
        print(f"{s:>10} {m['steady_a_norm']:14.6g} {m['steady_qhat_l1']:16.6g} {m['worst_delay']:12.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values: {args.values!r}") from exc
    res = sweep(cfg, args.param, values, workers=args.workers)
    out = Path(cfg.out)
    lines = [f"{args.param},steady_a_norm,steady_qhat_l1,worst_delay,convergence_slots"]
    for v in res.values:
        s = res.summaries.get(v)
        if s is None:
            print(f"{args.param}={v:g}: failed ({res.errors.get(v)})")
            continue
        print(f"{args.param}={v:g}: steady |a| {s['steady_a_norm']:.6g}, "
              f"steady |qhat|_1 {s['steady_qhat_l1']:.6g}")
        lines.append(",".join([repr(float(v)), repr(s["steady_a_norm"]), repr(s["steady_qhat_l1"]),
                               repr(s["worst_delay"]), str(s["convergence_slots"])]))
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sweep_{args.param}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        if res.report is not None:
            (out / "scaling_report.txt").write_text(res.report.text() + "\n", encoding="utf-8")
            (out / "scaling_report.csv").write_text(res.report.csv(), encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot write sweep results to {out}: {exc}") from exc
    if res.report is not None:
        print(res.report.text())
    return EXIT_OK if not res.errors else EXIT_RUNTIME


def cmd_verify(args) -> int:
    cfg = _config(args)
    tr = run_simulation(cfg, _progress(cfg.frames, args.verbose))
    m = tr.summary
    consts = theorem_inputs(cfg, m["r_max"])
    unit = cfg.rate_unit
    bound = consts.queue_bound(cfg.phi, cfg.a_max / unit)
    q = m["steady_qhat_l1"] / unit
    print(f"drift inequality violations: {m['drift_violations']} of {tr.n_slots} slots")
    print(f"max B: {m['max_B']:.6g}")
    print(f"C1 {consts.c1:.6g}  C2 {consts.c2:.6g}  C3 {consts.c3:.6g}  (rate unit {unit:g} bit/s)")
    print(f"steady |qhat|_1 {q:.6g} <= bound {bound:.6g}: {q <= bound}")
    ok = m["drift_violations"] == 0 and q <= bound and bool(np.isfinite(q))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "benchmark": cmd_benchmark, "sweep": cmd_sweep,
            "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExportError, RuntimeError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
