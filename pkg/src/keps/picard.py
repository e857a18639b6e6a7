"""Successive linearisation: feed each linearised solution back as the known triple.

Every outer pass solves the linear system with ``(v, pi, theta)`` taken
from the previous iterate's ``(u, k, eps)`` and measures the difference to
that iterate with the density-weighted functional ``phi``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import grid as g
from .errors import InsufficientIterations, KepsError, NonpositiveDensity, PicardDiverged
from .linstep import StepConfig, linearized_solve, num_steps
from .model import ModelParams, State, Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicardConfig:
    horizon: float
    max_outer: int = 40
    tol_phi: float = 1e-10
    relative: bool = True
    ratio_window: int = 3
    auto_shrink: bool = False
    max_shrink: int = 8

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.tol_phi > 0:
            raise ValueError("tol_phi must be positive")
        if self.max_outer < 2:
            raise ValueError("max_outer must be at least 2")
        if self.ratio_window < 1:
            raise ValueError("ratio_window must be at least 1")


@dataclass
class DiffNorms:
    """Per time level: ``phi`` and squared H1 norms of the differences."""

    phi: np.ndarray
    h1_u: np.ndarray
    h1_h: np.ndarray
    h1_k: np.ndarray
    h1_eps: np.ndarray

    @property
    def h1_total(self):
        return self.h1_u + self.h1_h + self.h1_k + self.h1_eps


@dataclass
class PicardIteration:
    iteration: int
    sup_phi: float
    int_h1: float
    ratio: Optional[float]

    @property
    def metric(self):
        return self.sup_phi + self.int_h1


@dataclass
class PicardReport:
    horizon: float
    dt: float
    rows: List[PicardIteration] = field(default_factory=list)
    converged: bool = False
    threshold: float = math.nan
    ratio_window: int = 3
    # iterate that served as the known triple for the returned trajectory
    previous: Optional[Trajectory] = field(default=None, repr=False)

    @property
    def iterations(self):
        return len(self.rows)

    @property
    def final_ratio(self):
        try:
            return contraction_ratio(self)
        except InsufficientIterations:
            return None

    def to_csv(self):
        lines = ["iter,sup_phi,int_h1,ratio"]
        for row in self.rows:
            ratio = "n/a" if row.ratio is None else f"{row.ratio:.17g}"
            lines.append(f"{row.iteration},{row.sup_phi:.17g},{row.int_h1:.17g},{ratio}")
        return "\n".join(lines) + "\n"

    def summary(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_ratio": self.final_ratio,
            "horizon": self.horizon,
            "dt": self.dt,
        }


def initial_iterate(init: State, horizon, dt, params: Optional[ModelParams] = None):
    """Zeroth iterate: the initial data held constant over ``[0, horizon]``."""
    steps = num_steps(horizon, dt)
    states = [init] + [init.at_time(init.t + j * dt) for j in range(1, steps + 1)]
    return Trajectory(init.grid, params or ModelParams(), dt, states)


def phi_diff(a: State, b: State):
    """``|rho_a - rho_b|^2 + sum |sqrt(rho_a) (f_a - f_b)|^2`` over u, h, k, eps."""
    grid = a.grid
    if not float(np.min(a.rho)) > 0:
        raise NonpositiveDensity("phi weight rho is not positive")
    drho = a.rho - b.rho
    total = g.inner_l2(drho, drho, grid)
    for name in ("u", "h", "k", "eps"):
        d = getattr(a, name) - getattr(b, name)
        total += g.inner_l2(a.rho * d * d, 1.0, grid)
    return total


def _h1_sq(f, grid):
    val = g.inner_l2(f, f, grid)
    if f.ndim == grid.dim + 1:
        for comp in f:
            grad = g.gradient(comp, grid)
            val += g.inner_l2(grad, grad, grid)
    else:
        grad = g.gradient(f, grid)
        val += g.inner_l2(grad, grad, grid)
    return val


def diff_norms(new: Trajectory, old: Trajectory):
    """Difference norms at every level of ``new`` (which supplies the phi weight)."""
    levels = len(new)
    phi = np.zeros(levels)
    h1 = {name: np.zeros(levels) for name in ("u", "h", "k", "eps")}
    for j in range(levels):
        a, b = new.states[j], old.states[j]
        phi[j] = phi_diff(a, b)
        for name in h1:
            h1[name][j] = _h1_sq(getattr(a, name) - getattr(b, name), new.grid)
    return DiffNorms(phi, h1["u"], h1["h"], h1["k"], h1["eps"])


def contraction_ratio(report: PicardReport, window=None):
    """Geometric mean of the trailing ``window`` ratios of ``sup_phi + int_h1``."""
    window = report.ratio_window if window is None else window
    ratios = [r.ratio for r in report.rows if r.ratio is not None]
    if len(report.rows) < 2 or not ratios:
        raise InsufficientIterations("need at least two Picard iterations for a ratio")
    tail = ratios[-window:]
    if any(r == 0 for r in tail):
        return 0.0
    return math.exp(sum(math.log(r) for r in tail) / len(tail))


def _solve_once(init, params, cfg, step_cfg, horizon):
    report = PicardReport(horizon=horizon, dt=step_cfg.dt, ratio_window=cfg.ratio_window)
    known = initial_iterate(init, horizon, step_cfg.dt, params)
    first = None
    consecutive = 0
    traj = known
    for n in range(1, cfg.max_outer + 1):
        try:
            traj = linearized_solve(init, known, params, step_cfg, horizon)
        except PicardDiverged:
            raise
        except KepsError as exc:
            if n == 1:
                raise
            # the previous iterate is no longer an admissible known triple
            err = PicardDiverged(
                report,
                f"Picard pass {n} left the admissible region at horizon {horizon:g}: "
                f"{type(exc).__name__}: {Exception.__str__(exc)}",
            )
            err.time_level = exc.time_level
            raise err from exc
        diffs = diff_norms(traj, known)
        sup_phi = float(np.max(diffs.phi))
        int_h1 = float(step_cfg.dt * np.sum(diffs.h1_total[1:]))
        metric = sup_phi + int_h1
        if report.rows:
            prev = report.rows[-1].metric
            if prev > 0:
                ratio = metric / prev
            else:
                ratio = 0.0 if metric == 0 else math.inf
        else:
            ratio = None
        if not math.isfinite(metric):
            ratio = math.inf
        report.rows.append(PicardIteration(n, sup_phi, int_h1, ratio))
        report.previous = known
        log.debug("picard pass %d: sup_phi=%.3e int_h1=%.3e ratio=%s", n, sup_phi, int_h1, ratio)
        if first is None:
            first = metric
            report.threshold = cfg.tol_phi * first if cfg.relative else cfg.tol_phi
        if metric <= report.threshold:
            report.converged = True
            return traj, report
        consecutive = consecutive + 1 if (ratio is not None and ratio >= 1.0) else 0
        if consecutive >= cfg.ratio_window:
            raise PicardDiverged(
                report,
                f"Picard ratios >= 1 for {consecutive} consecutive passes at horizon {horizon:g}",
            )
        known = traj
    return traj, report


def picard_solve(init: State, params: ModelParams, cfg: PicardConfig, step_cfg: StepConfig):
    """Iterate the linearised solve to a fixed point on ``[0, cfg.horizon]``.

    Returns the last trajectory and the per-pass report.  Stops when
    ``sup_phi + int_h1`` drops below ``tol_phi`` (times the first-pass value
    when ``cfg.relative``) or after ``max_outer`` passes.
    """
    horizon = cfg.horizon
    shrinks = 0
    while True:
        try:
            return _solve_once(init, params, cfg, step_cfg, horizon)
        except PicardDiverged:
            if not cfg.auto_shrink or shrinks >= cfg.max_shrink:
                raise
            half = horizon / 2
            # keep a whole number of steps
            steps = max(1, int(round(half / step_cfg.dt)))
            if steps * step_cfg.dt >= horizon:
                raise
            horizon = steps * step_cfg.dt
            shrinks += 1
            log.info("Picard diverged; retrying with horizon %g", horizon)


def picard_march(init: State, params: ModelParams, cfg: PicardConfig, step_cfg: StepConfig,
                 window=None):
    """Run ``picard_solve`` on consecutive windows covering ``[0, cfg.horizon]``.

    Each window restarts from the converged end state of the previous one.
    Returns the joined trajectory and one report per window.
    """
    dt = step_cfg.dt
    total = num_steps(cfg.horizon, dt)
    per = total if window is None else max(1, int(round(window / dt)))
    states = [init]
    records = []
    reports = []
    state = init
    done = 0
    while done < total:
        steps = min(per, total - done)
        sub = PicardConfig(
            horizon=steps * dt,
            max_outer=cfg.max_outer,
            tol_phi=cfg.tol_phi,
            relative=cfg.relative,
            ratio_window=cfg.ratio_window,
            auto_shrink=False,
        )
        try:
            traj, report = picard_solve(state, params, sub, step_cfg)
        except KepsError as exc:
            if exc.time_level is not None:
                exc.time_level += done
            raise
        for rec in traj.records:
            rec.step += done
        records.extend(traj.records)
        for j, s in enumerate(traj.states[1:], start=1):
            s.t = init.t + (done + j) * dt
            states.append(s)
        reports.append(report)
        state = states[-1]
        done += steps
    mass0 = g.mass(init.rho, init.grid)
    for rec in records:
        rec.mass_drift = abs(rec.mass - mass0) / abs(mass0) if mass0 else 0.0
    return Trajectory(init.grid, params, dt, states, records), reports
