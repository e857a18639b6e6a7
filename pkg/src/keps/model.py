"""Physical constants, the state container and the constitutive terms.

The production terms follow the linearised form: the strain contraction
uses the known velocity ``v`` and the ``G`` term the known turbulent
energy ``pi``.  Both deviatoric brackets carry their viscosity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from . import grid as g
from .errors import InvalidField, NonpositiveDensity
from .grid import GridSpec


@dataclass(frozen=True)
class ModelParams:
    mu: float = 1.0
    mu_t: float = 1.0
    mu_e: float = 2.0
    c1: float = 1.44
    c2: float = 1.92
    gamma: float = 1.4
    m: float = 0.1
    c_generic: float = 1.0

    def __post_init__(self):
        for name in ("mu", "mu_t", "mu_e", "c1", "c2", "gamma", "m", "c_generic"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val}")
        if self.gamma <= 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if abs(self.mu + self.mu_t - self.mu_e) > 1e-12 * self.mu_e:
            raise ValueError(
                f"mu + mu_t must equal mu_e ({self.mu} + {self.mu_t} != {self.mu_e})"
            )


def _check_scalar(grid, name, arr):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != grid.shape:
        raise InvalidField(f"{name} has shape {arr.shape}, expected {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidField(f"{name} contains non-finite values")
    return arr


@dataclass(eq=False)
class State:
    """The five unknowns at one time level.

    Construction checks shapes and finiteness.  Positivity of ``rho`` and
    ``k`` is checked where it is needed (the steps raise, and validation
    reports), so that offending data can still be represented.
    """

    grid: GridSpec
    t: float
    rho: np.ndarray
    u: np.ndarray
    h: np.ndarray
    k: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        self.rho = _check_scalar(self.grid, "rho", self.rho)
        self.h = _check_scalar(self.grid, "h", self.h)
        self.k = _check_scalar(self.grid, "k", self.k)
        self.eps = _check_scalar(self.grid, "eps", self.eps)
        u = np.asarray(self.u, dtype=float)
        if u.shape != self.grid.vector_shape:
            raise InvalidField(f"u has shape {u.shape}, expected {self.grid.vector_shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidField("u contains non-finite values")
        self.u = u

    FIELDS = ("rho", "u", "h", "k", "eps")

    def fields(self):
        return {name: getattr(self, name) for name in self.FIELDS}

    def at_time(self, t):
        return replace(self, t=float(t))

    def identical(self, other):
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.FIELDS)

    @classmethod
    def uniform(cls, grid, rho=1.0, h=0.0, k=1.0, eps=0.0, u=0.0, t=0.0):
        return cls(
            grid,
            t,
            np.full(grid.shape, float(rho)),
            np.full(grid.vector_shape, float(u)),
            np.full(grid.shape, float(h)),
            np.full(grid.shape, float(k)),
            np.full(grid.shape, float(eps)),
        )


@dataclass
class StepRecord:
    step: int
    t: float
    lin_iters: int
    min_rho: float
    min_k: float
    mass: float
    mass_drift: float

    def manifest_line(self):
        return (
            f"step={self.step} t={self.t:.17g} lin_iters={self.lin_iters} "
            f"min_rho={self.min_rho:.17g} min_k={self.min_k:.17g} "
            f"mass_drift={self.mass_drift:.3e}"
        )


@dataclass(eq=False)
class Trajectory:
    grid: GridSpec
    params: ModelParams
    dt: float
    states: List[State]
    records: List[StepRecord] = field(default_factory=list)

    def __post_init__(self):
        if not self.states:
            raise ValueError("trajectory needs at least one state")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        t0 = self.states[0].t
        for j, s in enumerate(self.states):
            if s.grid != self.grid:
                raise ValueError("all states must share the trajectory grid")
            if abs(s.t - (t0 + j * self.dt)) > 1e-9 * max(1.0, abs(s.t)):
                raise ValueError(f"state {j} at t={s.t} breaks the uniform spacing dt={self.dt}")

    def __len__(self):
        return len(self.states)

    def __getitem__(self, j):
        return self.states[j]

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    @property
    def horizon(self):
        return self.states[-1].t - self.states[0].t


# -- constitutive terms -----------------------------------------------------


def _require_positive(rho, what="rho"):
    lo = float(np.min(rho))
    if not lo > 0:
        raise NonpositiveDensity(f"min({what}) = {lo:.6g} is not positive")


def pressure(rho, gamma):
    """Isentropic law ``p = rho**gamma``."""
    _require_positive(rho)
    return np.power(rho, gamma)


def pressure_dt(rho, v, gamma, grid: GridSpec):
    """``p_t`` through the transport equation: ``-gamma rho^(gamma-1) div(rho v)``."""
    _require_positive(rho)
    return -gamma * np.power(rho, gamma - 1.0) * g.divergence(rho * v, grid)


def _strain_contraction(jac, viscosity):
    """``sum_ij viscosity (J_ij + J_ji) J_ij`` and ``div``."""
    dim = jac.shape[0]
    total = np.zeros(jac.shape[2:])
    for i in range(dim):
        for j in range(dim):
            total = total + (jac[i, j] + jac[j, i]) * jac[i, j]
    div = jac[0, 0]
    for i in range(1, dim):
        div = div + jac[i, i]
    return viscosity * total, div


def source_sk(v, rho, params: ModelParams, grid: GridSpec):
    """Enthalpy source ``S'_k``.

    The pressure-density term uses ``grad p = gamma rho^(gamma-1) grad rho``,
    which keeps it a non-negative multiple of ``|grad rho|^2``.
    """
    _require_positive(rho)
    jac = g.velocity_gradient(v, grid)
    strain, div = _strain_contraction(jac, params.mu)
    strain = strain - (2.0 / 3.0) * params.mu * div * div
    grad_rho = g.gradient(rho, grid)
    sq = np.sum(grad_rho * grad_rho, axis=0)
    gam = params.gamma
    return strain + params.mu_t * gam * np.power(rho, gam - 3.0) * sq


def source_g(v, rho, pi, params: ModelParams, grid: GridSpec):
    """Turbulence production ``G'`` with the known energy ``pi``."""
    jac = g.velocity_gradient(v, grid)
    strain, div = _strain_contraction(jac, params.mu_e)
    return strain - (2.0 / 3.0) * (rho * pi + params.mu_e * div) * div
