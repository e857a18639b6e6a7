"""Time stepping of the linearised system for a known triple ``(v, pi, theta)``.

Per step the unknowns are advanced in the order rho -> u -> h -> k -> eps.
Density uses an explicit conservative upwind update, the four parabolic
equations are backward Euler with convection inside the implicit operator
and sources evaluated from the known triple at the new time level.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import grid as g
from .errors import (
    CflViolation,
    KepsError,
    LinearSolveDiverged,
    NonpositiveDensity,
    TurbulentEnergyFloor,
)
from .grid import GridSpec
from .model import ModelParams, State, StepRecord, Trajectory, pressure, pressure_dt, source_g, source_sk

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepConfig:
    dt: float
    lin_tol: float = 1e-10
    lin_maxit: int = 2000
    k_floor: Optional[float] = None  # None means m / 10
    implicit_sink: bool = False
    restart: int = 40
    cfl_max: float = 0.9

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.lin_tol < 1:
            raise ValueError("lin_tol must lie in (0, 1)")
        if self.lin_maxit < 1:
            raise ValueError("lin_maxit must be at least 1")
        if self.k_floor is not None and self.k_floor < 0:
            raise ValueError("k_floor must be non-negative")

    def floor(self, params: ModelParams):
        return params.m / 10.0 if self.k_floor is None else self.k_floor


@dataclass
class SolveStats:
    iterations: int
    final_relative_residual: float
    converged: bool


def _norm(x):
    # numpy's pairwise summation; fixed order regardless of BLAS threading
    return math.sqrt(float(np.sum(x * x)))


def solve_linear_system(apply_operator, rhs, cfg: StepConfig, x0=None, diag=None, label="",
                        scale=None, precond=None):
    """Restarted GMRES with right preconditioning.

    ``apply_operator`` maps an array shaped like ``rhs`` to another one.
    The preconditioner is ``precond`` (an approximate inverse acting on
    arrays shaped like ``rhs``) when given, else division by ``diag``.
    Returns ``(x, SolveStats)`` with ``|A x - b| <= lin_tol * max(|b|, scale)``.
    ``scale`` lets a caller whose right-hand side is a near-cancelling sum
    measure the residual against the size of its terms instead.
    """
    shape = rhs.shape
    b = np.ravel(rhs).astype(float)
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros(shape), SolveStats(0, 0.0, True)
    if scale is not None and scale > bnorm:
        bnorm = float(scale)
    inv_diag = None if diag is None else 1.0 / np.ravel(np.broadcast_to(diag, shape))

    def A(vec):
        return np.ravel(apply_operator(vec.reshape(shape)))

    def M(vec):
        if precond is not None:
            return np.ravel(precond(vec.reshape(shape)))
        return vec if inv_diag is None else vec * inv_diag

    tol = cfg.lin_tol * bnorm
    x = np.zeros_like(b) if x0 is None else np.ravel(x0).astype(float).copy()
    m = max(1, cfg.restart)
    total = 0
    previous = math.inf
    while True:
        r = b - A(x)
        rnorm = _norm(r)
        if rnorm <= tol:
            return x.reshape(shape), SolveStats(total, rnorm / bnorm, True)
        # a full cycle that gains nothing means we sit on the roundoff floor
        stalled = total > 0 and rnorm >= 0.999 * previous
        previous = rnorm
        if total >= cfg.lin_maxit or stalled or not math.isfinite(rnorm):
            stats = SolveStats(total, rnorm / bnorm, False)
            raise LinearSolveDiverged(stats, label)
        basis = np.zeros((m + 1, b.size))
        basis[0] = r / rnorm
        hess = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        resid = np.zeros(m + 1)
        resid[0] = rnorm
        steps = 0
        for j in range(m):
            w = A(M(basis[j]))
            # classical Gram-Schmidt, repeated once when cancellation is severe;
            # reductions run along fixed axes so the arithmetic is reproducible
            active = basis[: j + 1]
            before = _norm(w)
            for _ in range(2):
                coef = np.sum(active * w, axis=1)
                w = w - np.sum(coef[:, None] * active, axis=0)
                hess[: j + 1, j] += coef
                after = _norm(w)
                if after > 0.7 * before:
                    break
                before = after
            hess[j + 1, j] = after
            for i in range(j):
                a, c = hess[i, j], hess[i + 1, j]
                hess[i, j] = cs[i] * a + sn[i] * c
                hess[i + 1, j] = -sn[i] * a + cs[i] * c
            denom = math.hypot(hess[j, j], hess[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = hess[j, j] / denom, hess[j + 1, j] / denom
            breakdown = hess[j + 1, j] == 0.0
            if not breakdown:
                basis[j + 1] = w / hess[j + 1, j]
            hess[j, j] = denom
            hess[j + 1, j] = 0.0
            resid[j + 1] = -sn[j] * resid[j]
            resid[j] = cs[j] * resid[j]
            steps = j + 1
            total += 1
            if abs(resid[j + 1]) <= 0.5 * tol or breakdown or total >= cfg.lin_maxit:
                break
        y = np.zeros(steps)
        for i in range(steps - 1, -1, -1):
            y[i] = (resid[i] - hess[i, i + 1 : steps] @ y[i + 1 : steps]) / hess[i, i]
        update = np.sum(y[:, None] * basis[:steps], axis=0)
        x = x + M(update)


# -- separable preconditioner ---------------------------------------------------


@functools.lru_cache(maxsize=128)
def _second_difference_eigen(n, h, bc):
    """Eigenpairs of the 1D three-point second difference with the ghost rule ``bc``."""
    mat = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    if bc == "periodic":
        mat[0, -1] = mat[-1, 0] = 1.0
    elif bc == "dirichlet":
        mat[0, 0] = mat[-1, -1] = -3.0
    elif bc == "neumann":
        mat[0, 0] = mat[-1, -1] = -1.0
    else:
        raise ValueError(f"no separable form for boundary treatment {bc!r}")
    lam, vec = np.linalg.eigh(mat / h**2)
    return lam, np.ascontiguousarray(vec), np.ascontiguousarray(vec.T)


def _along_axis(mat, f, axis):
    # einsum's own loops keep the summation order fixed (no threaded BLAS)
    moved = np.moveaxis(f, axis, -1)
    return np.moveaxis(np.einsum("...j,ij->...i", moved, mat), -1, axis)


class SeparableInverse:
    """Exact inverse of ``shift - sum_a weight_a d_aa`` on the grid.

    Each axis is diagonalised by the eigenvectors of its 1D second
    difference, so applying the inverse costs a few small dense products
    per axis.  Used as a preconditioner with ``shift`` the mean of the
    operator's zeroth-order coefficient.
    """

    def __init__(self, grid: GridSpec, bc, shift, weights=None):
        weights = weights or (1.0,) * grid.dim
        kind = grid.bc(bc)
        self._axes = [_second_difference_eigen(n, h, kind) for n, h in zip(grid.n, grid.spacing)]
        # constants are an exact null vector of the difference operator here
        self._constants_exact = kind in ("neumann", "periodic")
        self._shift = float(shift)
        denom = np.full(grid.shape, float(shift))
        for a, (lam, _, _) in enumerate(self._axes):
            shape = [1] * grid.dim
            shape[a] = -1
            denom = denom - weights[a] * lam.reshape(shape)
        self._inv = 1.0 / denom

    def __call__(self, f):
        if self._constants_exact and np.all(f == f.flat[0]):
            # keep uniform fields exactly uniform instead of roundoff-close
            return f / self._shift
        for a, (_, _, vt) in enumerate(self._axes):
            f = _along_axis(vt, f, a)
        f = f * self._inv
        for a, (_, v, _) in enumerate(self._axes):
            f = _along_axis(v, f, a)
        return f


# -- explicit transport -----------------------------------------------------


def _face_fluxes(rho, va, axis, periodic):
    """Upwind fluxes through the faces below and above each node along ``axis``."""
    r = np.moveaxis(rho, axis, 0)
    v = np.moveaxis(va, axis, 0)
    if periodic:
        rp = np.roll(r, -1, axis=0)
        vf = 0.5 * (v + np.roll(v, -1, axis=0))
        up = np.maximum(vf, 0.0) * r + np.minimum(vf, 0.0) * rp
        down = np.roll(up, 1, axis=0)
        vf_up = vf
        vf_down = np.roll(vf, 1, axis=0)
    else:
        vf = 0.5 * (v[:-1] + v[1:])
        flux = np.maximum(vf, 0.0) * r[:-1] + np.minimum(vf, 0.0) * r[1:]
        zero = np.zeros_like(r[:1])
        up = np.concatenate([flux, zero])
        down = np.concatenate([zero, flux])
        vf_up = np.concatenate([vf, zero])
        vf_down = np.concatenate([zero, vf])
    outflow = np.maximum(vf_up, 0.0) + np.maximum(-vf_down, 0.0)
    return (np.moveaxis(up, 0, axis), np.moveaxis(down, 0, axis), np.moveaxis(outflow, 0, axis))


def cfl_number(v, grid: GridSpec, dt):
    """Largest fraction of a cell's content leaving it in one step.

    Sums the outflow face speeds of every node over all axes, so a value
    ``<= 1`` guarantees a non-negative upwind update.
    """
    total = np.zeros(grid.shape)
    for a in range(grid.dim):
        _, _, out = _face_fluxes(np.zeros(grid.shape), v[a], a, grid.periodic)
        total = total + out * (dt / grid.spacing[a])
    return float(np.max(total))


def upwind_divergence(rho, v, grid: GridSpec):
    """Conservative first-order upwind ``div(rho v)``; wall faces carry no flux."""
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        up, down, _ = _face_fluxes(rho, v[a], a, grid.periodic)
        out = out + (up - down) / grid.spacing[a]
    return out


def transport_step(rho, v, grid: GridSpec, cfg: StepConfig, source=None):
    lo = float(np.min(rho))
    if not lo > 0:
        raise NonpositiveDensity(f"min(rho) = {lo:.6g} before transport")
    cfl = cfl_number(v, grid, cfg.dt)
    if cfl > cfg.cfl_max:
        raise CflViolation(cfl, cfg.cfl_max)
    new = rho - cfg.dt * upwind_divergence(rho, v, grid)
    if source is not None:
        new = new + cfg.dt * source
    return new


# -- implicit parabolic steps ---------------------------------------------------


def _scalar_operator(rho, v, grid, dt, bc, sink=None):
    coef = rho / dt if sink is None else rho / dt + sink

    def apply(x):
        return coef * x + rho * g.convect(v, x, grid, bc) - g.laplacian(x, grid, bc)

    return apply, SeparableInverse(grid, bc, float(np.mean(coef)))


def _solve_scalar(rho, old, rhs, v, grid, cfg, bc, label, sink=None, x0=None):
    apply, precond = _scalar_operator(rho, v, grid, cfg.dt, bc, sink)
    scale = _norm(rho * old / cfg.dt)
    start = old if x0 is None else x0
    x, stats = solve_linear_system(apply, rhs, cfg, x0=start, label=label, scale=scale,
                                   precond=precond)
    return x, stats


def momentum_step(rho, u, v, pi, grid: GridSpec, params: ModelParams, cfg: StepConfig,
                  forcing=None, return_stats=False, x0=None):
    """Backward Euler for ``rho u_t + rho v.grad u - lap u - grad div u + grad p = -2/3 grad(rho pi)``.

    ``rho`` is the already advanced density.
    """
    if not float(np.min(rho)) > 0:
        raise NonpositiveDensity("min(rho) is not positive in the momentum step")
    dt = cfg.dt
    bc = "dirichlet"
    p = pressure(rho, params.gamma)
    rhs = rho * u / dt - g.gradient(p, grid) - (2.0 / 3.0) * g.gradient(rho * pi, grid)
    if forcing is not None:
        rhs = rhs + forcing

    def apply(x):
        out = rho * x / dt - g.vector_laplacian(x, grid, bc) - g.grad_div(x, grid, bc)
        for a in range(grid.dim):
            out[a] = out[a] + rho * g.convect(v, x[a], grid, bc)
        return out

    # grad div contributes roughly d_aa to component a
    shift = float(np.mean(rho)) / dt
    parts = [
        SeparableInverse(grid, bc, shift, tuple(2.0 if b == a else 1.0 for b in range(grid.dim)))
        for a in range(grid.dim)
    ]

    def precond(x):
        return np.stack([parts[a](x[a]) for a in range(grid.dim)])

    scale = _norm(rho * u / dt)
    start = u if x0 is None else x0
    x, stats = solve_linear_system(apply, rhs, cfg, x0=start, label="momentum", scale=scale,
                                   precond=precond)
    return (x, stats) if return_stats else x


def enthalpy_step(rho, h, v, u_new, grid: GridSpec, params: ModelParams, cfg: StepConfig,
                  forcing=None, return_stats=False, x0=None):
    """Backward Euler for ``rho h_t + rho v.grad h - lap h = p_t + u.grad p + S'_k``, ``h = 0`` on walls."""
    if not float(np.min(rho)) > 0:
        raise NonpositiveDensity("min(rho) is not positive in the enthalpy step")
    p = pressure(rho, params.gamma)
    src = (
        pressure_dt(rho, v, params.gamma, grid)
        + g.convect(u_new, p, grid)
        + source_sk(v, rho, params, grid)
    )
    rhs = rho * h / cfg.dt + src
    if forcing is not None:
        rhs = rhs + forcing
    x, stats = _solve_scalar(rho, h, rhs, v, grid, cfg, "dirichlet", "enthalpy", x0=x0)
    return (x, stats) if return_stats else x


def tke_step(rho, k, v, pi, theta, grid: GridSpec, params: ModelParams, cfg: StepConfig,
             forcing=None, return_stats=False, x0=None):
    """Backward Euler for ``rho k_t + rho v.grad k - lap k = G' - rho theta``, Neumann walls."""
    prod = source_g(v, rho, pi, params, grid)
    sink = None
    if cfg.implicit_sink:
        floor = cfg.floor(params)
        _check_floor(pi, floor)
        sink = rho * theta / pi
        rhs = rho * k / cfg.dt + prod
    else:
        rhs = rho * k / cfg.dt + prod - rho * theta
    if forcing is not None:
        rhs = rhs + forcing
    x, stats = _solve_scalar(rho, k, rhs, v, grid, cfg, "neumann", "tke", sink, x0)
    return (x, stats) if return_stats else x


def _check_floor(pi, floor):
    lo = float(np.min(pi))
    if not lo > max(floor, 0.0):
        raise TurbulentEnergyFloor(lo, floor)


def dissipation_step(rho, eps, v, pi, theta, grid: GridSpec, params: ModelParams, cfg: StepConfig,
                     forcing=None, return_stats=False, x0=None):
    """Backward Euler for ``rho eps_t + rho v.grad eps - lap eps = C1 G' theta/pi - C2 rho theta^2/pi``."""
    _check_floor(pi, cfg.floor(params))
    prod = source_g(v, rho, pi, params, grid)
    sink = None
    if cfg.implicit_sink:
        sink = params.c2 * rho * theta / pi
        rhs = rho * eps / cfg.dt + params.c1 * prod * theta / pi
    else:
        rhs = rho * eps / cfg.dt + params.c1 * prod * theta / pi - params.c2 * rho * theta**2 / pi
    if forcing is not None:
        rhs = rhs + forcing
    x, stats = _solve_scalar(rho, eps, rhs, v, grid, cfg, "neumann", "dissipation", sink, x0)
    return (x, stats) if return_stats else x


# -- full horizon -------------------------------------------------------------


def advance(state: State, known: State, params: ModelParams, cfg: StepConfig, forcing=None):
    """One step from ``state`` using the known triple of the new time level.

    The known state also seeds the Krylov solves: inside a Picard loop it
    is the previous iterate, which is already close to the answer.
    Returns the new state and the total number of Krylov iterations.
    """
    grid = state.grid
    v, pi, theta = known.u, known.k, known.eps
    f = forcing or {}
    rho = transport_step(state.rho, v, grid, cfg, f.get("rho"))
    u, s1 = momentum_step(rho, state.u, v, pi, grid, params, cfg, f.get("u"), True, known.u)
    h, s2 = enthalpy_step(rho, state.h, v, u, grid, params, cfg, f.get("h"), True, known.h)
    k, s3 = tke_step(rho, state.k, v, pi, theta, grid, params, cfg, f.get("k"), True, known.k)
    eps, s4 = dissipation_step(rho, state.eps, v, pi, theta, grid, params, cfg, f.get("eps"), True,
                               known.eps)
    new = State(grid, state.t + cfg.dt, rho, u, h, k, eps)
    return new, s1.iterations + s2.iterations + s3.iterations + s4.iterations


def num_steps(horizon, dt):
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(horizon, 1.0):
        raise ValueError(f"horizon {horizon} is not a whole number of steps of {dt}")
    return steps


def linearized_solve(init: State, known: Trajectory, params: ModelParams, cfg: StepConfig,
                     horizon=None, forcing: Optional[Callable] = None):
    """March the linearised system over ``[0, horizon]`` against the known trajectory.

    ``forcing(t)``, when given, returns a dict of extra right-hand sides
    (keys ``rho, u, h, k, eps``) evaluated at the new time level.
    """
    if abs(known.dt - cfg.dt) > 1e-12 * cfg.dt:
        raise ValueError(f"known trajectory dt={known.dt} differs from step dt={cfg.dt}")
    if horizon is None:
        horizon = known.horizon
    steps = num_steps(horizon, cfg.dt)
    if len(known) < steps + 1:
        raise ValueError("known trajectory does not cover the horizon")
    grid = init.grid
    mass0 = g.mass(init.rho, grid)
    states = [init]
    records = []
    state = init
    for j in range(steps):
        try:
            f = forcing(init.t + (j + 1) * cfg.dt) if forcing is not None else None
            state, iters = advance(state, known.states[j + 1], params, cfg, f)
            state.t = init.t + (j + 1) * cfg.dt
        except KepsError as exc:
            exc.time_level = j + 1
            raise
        m = g.mass(state.rho, grid)
        records.append(
            StepRecord(
                step=j + 1,
                t=state.t,
                lin_iters=iters,
                min_rho=float(np.min(state.rho)),
                min_k=float(np.min(state.k)),
                mass=m,
                mass_drift=abs(m - mass0) / abs(mass0) if mass0 else 0.0,
            )
        )
        states.append(state)
    return Trajectory(grid, params, cfg.dt, states, records)
