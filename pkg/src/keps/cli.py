"""Command-line front end: ``keps {validate,run,decay,mms,estimate}``.

Exit codes: 0 success, 2 bad configuration or inadmissible initial data,
3 a run that failed (divergence, blow-up, tolerance breach).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import analysis
from . import config as cfgmod
from . import grid as g
from . import mms
from .errors import ConfigError, InvalidField, KepsError, PicardDiverged
from .model import State
from .picard import picard_march, picard_solve
from .presets import build_initial

log = logging.getLogger("keps")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUN = 3

TEMPORAL_ORDER_MIN = 0.9
SPATIAL_ORDER_MIN = 1.9


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# -- setup --------------------------------------------------------------------


def _load(args):
    overrides = {"output.dir": args.output} if getattr(args, "output", None) else None
    try:
        return cfgmod.load(args.config, overrides)
    except ConfigError as exc:
        raise _Fail(EXIT_INPUT, f"config error: {exc}") from None


def _initial_state(cfg, grid):
    files = cfg["init.files"]
    if files is None:
        try:
            return build_initial(cfg["init.preset"], grid, cfg)
        except (ValueError, KeyError) as exc:
            raise _Fail(EXIT_INPUT, f"preset {cfg['init.preset']}: {exc}") from None
    fields = {}
    t0 = 0.0
    for name, path in zip(cfgmod.INIT_FILE_ORDER, files):
        try:
            snap = g.read_snapshot(path, grid)
        except OSError as exc:
            raise _Fail(EXIT_INPUT, f"init.files: cannot read {path}: {exc.strerror}") from None
        except InvalidField as exc:
            raise _Fail(EXIT_INPUT, f"init.files: {path}: {exc}") from None
        if snap.grid != grid:
            raise _Fail(EXIT_INPUT, f"init.files: {path} is on grid {snap.grid.n}, config has {grid.n}")
        expected = grid.vector_shape if name == "u" else grid.shape
        if snap.values.shape != expected:
            raise _Fail(EXIT_INPUT, f"init.files: {path} has shape {snap.values.shape}, {name} needs {expected}")
        fields[name] = snap.values
        t0 = snap.t
    try:
        return State(grid, t0, **fields)
    except InvalidField as exc:
        raise _Fail(EXIT_INPUT, f"init.files: {exc}") from None


def _setup(args):
    cfg = _load(args)
    grid = _build(cfgmod.build_grid, cfg)
    return cfg, grid, _initial_state(cfg, grid)


def _build(builder, cfg):
    try:
        return builder(cfg)
    except ConfigError as exc:
        raise _Fail(EXIT_INPUT, f"config error: {exc}") from None


def _validate(init, params, out=print):
    report = analysis.validate_initial(init, params)
    for line in report.lines():
        out(line)
    if not report.passed:
        names = "; ".join(c.name for c in report.failures())
        raise _Fail(EXIT_INPUT, f"initial data rejected: {names}")
    return report


# -- validate -------------------------------------------------------------------


def cmd_validate(args):
    cfg, grid, init = _setup(args)
    params = _build(cfgmod.build_params, cfg)
    _validate(init, params)
    print("validation passed")
    return EXIT_OK


# -- run / decay -------------------------------------------------------------------


class RunOutput:
    """Collects the run log and writes every output file atomically."""

    def __init__(self, cfg):
        self.dir = Path(cfg["output.dir"])
        self.log_lines: List[str] = ["# effective configuration"]
        self.log_lines += cfg_lines(cfg)
        self.log_lines.append("# run")

    def note(self, line):
        self.log_lines.append(line)

    def write(self, name, text):
        g.atomic_write(self.dir / name, text)

    def finish(self, summary):
        self.note("# summary")
        self.note(json.dumps(summary, sort_keys=True))
        self.write("run.log", "\n".join(self.log_lines) + "\n")


def cfg_lines(cfg):
    return cfgmod.echo(cfg).splitlines()


def _picard_csv_names(count):
    if count == 1:
        return ["picard.csv"]
    return [f"picard_w{i:03d}.csv" for i in range(count)]


def _write_snapshots(out, traj, every):
    levels = list(range(len(traj)))
    chosen = [j for j in levels if j == 0 or j == levels[-1] or (every and j % every == 0)]
    for j in chosen:
        s = traj.states[j]
        for name in State.FIELDS:
            text = g.format_snapshot(getattr(s, name), traj.grid, s.t, name)
            out.write(f"snapshots/{name}_{j:06d}.txt", text)


def _solve(cfg, init, out):
    """Validated solve; returns ``(trajectory, reports)`` or raises ``_Fail``."""
    params = _build(cfgmod.build_params, cfg)
    step_cfg = _build(cfgmod.build_step, cfg)
    pic_cfg = _build(cfgmod.build_picard, cfg)
    _validate(init, params, out.note)
    window = cfg["picard.window"]
    try:
        if window is None:
            traj, report = picard_solve(init, params, pic_cfg, step_cfg)
            reports = [report]
        else:
            traj, reports = picard_march(init, params, pic_cfg, step_cfg, window)
    except PicardDiverged as exc:
        out.write("picard.csv", exc.report.to_csv())
        out.note(f"picard diverged: {exc}")
        out.finish({"status": "picard_diverged", "message": str(exc)})
        raise _Fail(EXIT_RUN, f"run failed in Picard iteration: {exc}") from None
    except KepsError as exc:
        stage = type(exc).__name__
        out.note(f"solver error {stage}: {exc}")
        out.finish({"status": "solver_error", "stage": stage, "message": str(exc)})
        raise _Fail(EXIT_RUN, f"run failed ({stage}): {exc}") from None
    for name, rep in zip(_picard_csv_names(len(reports)), reports):
        out.write(name, rep.to_csv())
    for rec in traj.records:
        out.note(rec.manifest_line())
    if not all(rep.converged for rep in reports):
        out.finish({"status": "not_converged", "windows": [rep.summary() for rep in reports]})
        raise _Fail(EXIT_RUN, "run failed: Picard iteration hit max_outer without converging")
    return params, traj, reports


def _norms(cfg, traj, params, out):
    try:
        consts = analysis.estimate_constants(
            max(analysis.compute_c0(traj.states[0]), 2.0), params.gamma, params.c_generic
        )
    except KepsError:
        consts = None
    try:
        report = analysis.monitor_apriori(traj, consts, every=cfg["output.norms_every"])
    except KepsError as exc:
        out.note(f"norm monitor stopped: {exc}")
        out.finish({"status": "blowup", "message": str(exc)})
        raise _Fail(EXIT_RUN, f"run failed in norm monitor: {exc}") from None
    out.write("norms.csv", report.to_csv())
    return report


def _summary(traj, reports, extra=None):
    drift = max((rec.mass_drift for rec in traj.records), default=0.0)
    ratios = [rep.final_ratio for rep in reports]
    summary = {
        "status": "ok",
        "steps": len(traj) - 1,
        "t_end": traj.states[-1].t,
        "max_mass_drift": drift,
        "min_rho": min(float(np.min(s.rho)) for s in traj.states),
        "min_k": min(float(np.min(s.k)) for s in traj.states),
        "picard_windows": len(reports),
        "picard_iterations": [rep.iterations for rep in reports],
        "final_contraction_ratio": ratios[-1],
        "max_contraction_ratio": max((r for r in ratios if r is not None), default=None),
    }
    summary.update(extra or {})
    return summary


def cmd_run(args):
    cfg, grid, init = _setup(args)
    out = RunOutput(cfg)
    params, traj, reports = _solve(cfg, init, out)
    _norms(cfg, traj, params, out)
    _write_snapshots(out, traj, cfg["output.dump_every"])
    summary = _summary(traj, reports)
    out.finish(summary)
    _print_summary(summary)
    return EXIT_OK


def _print_summary(summary):
    print(f"steps={summary['steps']} t_end={summary['t_end']:.6g}")
    print(f"picard iterations per window: {summary['picard_iterations']}")
    ratio = summary["final_contraction_ratio"]
    print(f"final contraction ratio = {'n/a' if ratio is None else format(ratio, '.6g')}")
    print(f"max |mass drift| = {summary['max_mass_drift']:.3e}")


def decay_errors(traj, k0, eps0, c2):
    """Per-level max relative errors of ``k`` and ``eps`` against the closed form."""
    times = traj.times - traj.times[0]
    k_ex, e_ex = analysis.homogeneous_decay(times, k0, eps0, c2)
    rows = []
    for s, t, ke, ee in zip(traj.states, times, k_ex, e_ex):
        err_k = float(np.max(np.abs(s.k - ke))) / abs(ke)
        err_e = float(np.max(np.abs(s.eps - ee))) / (abs(ee) if ee != 0 else 1.0)
        rows.append((float(t), float(np.mean(s.k)), float(ke), float(np.mean(s.eps)), float(ee), err_k, err_e))
    return rows


def cmd_decay(args):
    cfg, grid, init = _setup(args)
    if cfg["init.files"] is not None or cfg["init.preset"] not in ("uniform", "decay"):
        raise _Fail(EXIT_INPUT, "decay needs the uniform or decay preset")
    if cfg["init.u0"] != 0:
        raise _Fail(EXIT_INPUT, "decay needs u0 = 0 (spatially homogeneous turbulence)")
    out = RunOutput(cfg)
    params, traj, reports = _solve(cfg, init, out)
    _norms(cfg, traj, params, out)
    _write_snapshots(out, traj, cfg["output.dump_every"])
    rows = decay_errors(traj, cfg["init.k0"], cfg["init.eps0"], params.c2)
    lines = ["t,k,k_exact,eps,eps_exact,rel_err_k,rel_err_eps"]
    lines += [",".join(format(v, ".17g") for v in row) for row in rows]
    out.write("decay.csv", "\n".join(lines) + "\n")
    err_k = max(r[5] for r in rows)
    err_e = max(r[6] for r in rows)
    tol = cfg["decay.tol_per_dt"] * cfg["time.dt"]
    summary = _summary(traj, reports, {"decay_max_rel_err_k": err_k, "decay_max_rel_err_eps": err_e,
                                        "decay_tolerance": tol, "k_final": rows[-1][1]})
    passed = err_k <= tol and err_e <= tol
    if not passed:
        summary["status"] = "tolerance_breach"
    out.finish(summary)
    _print_summary(summary)
    print(f"k(t_end) = {rows[-1][1]:.10g} (closed form {rows[-1][2]:.10g})")
    print(f"max relative error: k = {err_k:.6e}, eps = {err_e:.6e} (tolerance {tol:.3e})")
    if not passed:
        raise _Fail(EXIT_RUN, "decay error exceeds tolerance")
    return EXIT_OK


# -- mms --------------------------------------------------------------------------


def cmd_mms(args):
    cfg = _load(args)
    params = _build(cfgmod.build_params, cfg)
    spatial = mms.spatial_study(params=params)
    temporal = mms.temporal_study(params=params)
    lines = ["study,size,error"]
    for study in (spatial, temporal):
        for line in study.lines():
            print(line)
        lines += [f"{study.kind},{s:.17g},{e:.17g}" for s, e in zip(study.sizes, study.errors)]
    g.atomic_write(Path(cfg["output.dir"]) / "mms.csv", "\n".join(lines) + "\n")
    print(f"orders: temporal={temporal.order:.4f} spatial={spatial.order:.4f}")
    if temporal.order < TEMPORAL_ORDER_MIN or spatial.order < SPATIAL_ORDER_MIN:
        raise _Fail(
            EXIT_RUN,
            f"convergence orders below target (temporal >= {TEMPORAL_ORDER_MIN}, spatial >= {SPATIAL_ORDER_MIN})",
        )
    return EXIT_OK


# -- estimate ------------------------------------------------------------------------


def cmd_estimate(args):
    cfg, grid, init = _setup(args)
    gamma = cfg["params.gamma"]
    c_generic = cfg["params.c_generic"]
    if not gamma >= 1:
        raise _Fail(EXIT_INPUT, f"config error: params.gamma must be at least 1, got {gamma}")
    if not c_generic >= 1:
        raise _Fail(EXIT_INPUT, f"config error: params.c_generic must be at least 1, got {c_generic}")
    # admissibility depends only on m; the ladder accepts gamma = 1 as well
    check_cfg = dict(cfg)
    check_cfg["params.gamma"] = gamma if gamma > 1 else 1.4
    params = _build(cfgmod.build_params, check_cfg)
    report = _validate(init, params)
    for bound, flag in ((args.t1, "--t1"), (args.t2, "--t2")):
        if not bound > 0:
            raise _Fail(EXIT_INPUT, f"{flag} must be positive")
    consts = analysis.estimate_constants(report.c0, gamma, c_generic)
    t_final = analysis.existence_time(consts, args.t1, args.t2)
    for line in consts.as_lines(t_final):
        print(line)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------


def _threads(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("--threads must be at least 1")
    return val


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--output", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=_threads, default=1,
                        help="worker threads; never changes results")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="keps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the initial data")
    sub.add_parser("run", parents=[common], help="solve with Picard iteration")
    sub.add_parser("decay", parents=[common], help="homogeneous decay against the closed form")
    sub.add_parser("mms", parents=[common], help="manufactured-solution convergence study")
    est = sub.add_parser("estimate", parents=[common], help="constants ladder and existence time")
    est.add_argument("--t1", type=float, default=math.inf, help="horizon bound T1 (default unbounded)")
    est.add_argument("--t2", type=float, default=math.inf, help="horizon bound T2 (default unbounded)")
    return parser


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "decay": cmd_decay,
    "mms": cmd_mms,
    "estimate": cmd_estimate,
}


def main(argv: Optional[List[str]] = None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    log.debug("threads=%d pid=%d", args.threads, os.getpid())
    try:
        return COMMANDS[args.command](args)
    except _Fail as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except KepsError as exc:
        print(f"run failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUN
    except Exception as exc:  # noqa: BLE001 - the exit-code contract allows only 0/2/3
        log.exception("unexpected failure")
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
