"""Convergence study against the manufactured solution.

The linearised system is solved with the known triple set to the exact
manufactured ``(u, k, eps)`` and the embedded forcing added to every
equation, so the discrete solution tracks the manufactured state up to
discretisation error.  Spatial order comes from errors against the exact
state under ``dt ~ h^2``; temporal order from self-convergence under
halving ``dt`` on a fixed grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from . import _mms_forcing as mf
from . import grid as g
from .grid import GridSpec
from .linstep import StepConfig, linearized_solve, num_steps
from .model import ModelParams, State
from .presets import MMS_HORIZON, MMS_LEVELS, mms_exact

log = logging.getLogger(__name__)


class ExactStates:
    """Lazy sequence of manufactured states at ``j * dt``."""

    def __init__(self, grid, dt, levels):
        self.grid = grid
        self.dt = dt
        self._levels = levels

    def __len__(self):
        return self._levels

    def __getitem__(self, j):
        if not 0 <= j < self._levels:
            raise IndexError(j)
        return mms_exact(self.grid, j * self.dt)


class ExactTrajectory:
    """Known-triple provider for :func:`linearized_solve` without storing every level."""

    def __init__(self, grid: GridSpec, dt, horizon):
        self.grid = grid
        self.dt = dt
        self.horizon = horizon
        self.states = ExactStates(grid, dt, num_steps(horizon, dt) + 1)

    def __len__(self):
        return len(self.states)


def forcing_function(grid: GridSpec, params: ModelParams):
    x, y = grid.coords()
    args = (params.mu, params.mu_t, params.mu_e, params.c1, params.c2, params.gamma)

    def forcing(t):
        return {
            "rho": mf.forcing_rho(x, y, t, *args),
            "u": np.stack([mf.forcing_u0(x, y, t, *args), mf.forcing_u1(x, y, t, *args)]),
            "h": mf.forcing_h(x, y, t, *args),
            "k": mf.forcing_k(x, y, t, *args),
            "eps": mf.forcing_eps(x, y, t, *args),
        }

    return forcing


def solve_manufactured(n, dt, horizon=MMS_HORIZON, params=None, lin_tol=1e-12):
    """Final state of the forced linearised march on an ``n x n`` unit square."""
    params = params or ModelParams()
    grid = GridSpec.box((n, n))
    cfg = StepConfig(dt=dt, lin_tol=lin_tol)
    init = mms_exact(grid, 0.0)
    known = ExactTrajectory(grid, dt, horizon)
    traj = linearized_solve(init, known, params, cfg, horizon, forcing_function(grid, params))
    return traj.states[-1]


def state_distance(a: State, b: State):
    """Root of the summed squared L2 norms of the field differences."""
    total = 0.0
    for name in State.FIELDS:
        d = getattr(a, name) - getattr(b, name)
        total += g.inner_l2(d, d, a.grid)
    return math.sqrt(total)


def fit_order(sizes, errors):
    """Least-squares slope of ``log(error)`` against ``log(size)``."""
    ls = np.log(np.asarray(sizes, dtype=float))
    le = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(ls, le, 1)[0])


@dataclass
class ConvergenceStudy:
    kind: str
    sizes: List[float]
    errors: List[float]
    order: float

    def lines(self):
        label = "h" if self.kind == "spatial" else "dt"
        out = [f"{self.kind} study:"]
        for s, e in zip(self.sizes, self.errors):
            out.append(f"  {label}={s:.6g} error={e:.6e}")
        out.append(f"  observed {self.kind} order = {self.order:.4f}")
        return out


def spatial_study(levels: Sequence[str] = ("mms1", "mms2", "mms3"), params=None):
    """Errors against the exact state on the refinement ladder (``dt ~ h^2``)."""
    sizes, errors = [], []
    for name in levels:
        n, steps = MMS_LEVELS[name]
        dt = MMS_HORIZON / steps
        final = solve_manufactured(n, dt, params=params)
        exact = mms_exact(final.grid, final.t)
        err = state_distance(final, exact)
        log.info("mms %s: n=%d dt=%g error=%.6e", name, n, dt, err)
        sizes.append(1.0 / n)
        errors.append(err)
    return ConvergenceStudy("spatial", sizes, errors, fit_order(sizes, errors))


def temporal_study(n=32, steps=(10, 20, 40), params=None):
    """Self-convergence in ``dt`` on a fixed grid.

    With solutions ``s_1, s_2, s_3`` for halving steps the differences
    ``|s_1 - s_2|`` and ``|s_2 - s_3|`` shrink like ``dt^p``.
    """
    dts = [MMS_HORIZON / s for s in steps]
    finals = [solve_manufactured(n, dt, params=params) for dt in dts]
    diffs = [state_distance(finals[i], finals[i + 1]) for i in range(len(finals) - 1)]
    sizes = dts[:-1]
    return ConvergenceStudy("temporal", sizes, diffs, fit_order(sizes, diffs))
