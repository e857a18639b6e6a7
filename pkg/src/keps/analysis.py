"""Discrete Sobolev norms, the constants ladder, initial-data checks and run diagnostics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import mpmath
import numpy as np

from . import grid as g
from .errors import BlowupDetected, InsufficientResolution
from .grid import GridSpec
from .model import ModelParams, State, Trajectory

_DPS = 60


# -- Sobolev norms ----------------------------------------------------------


def multi_indices(dim, order):
    """All multi-indices ``alpha`` with ``|alpha| <= order``, graded then lexicographic."""
    out = []
    for total in range(order + 1):
        for alpha in itertools.product(range(total + 1), repeat=dim):
            if sum(alpha) == total:
                out.append(alpha)
    return out


def _derivatives(f, grid, order, bc):
    """Map ``alpha -> D^alpha f``; pure second derivatives use the compact stencil."""
    cache = {(0,) * grid.dim: f}

    def get(alpha):
        if alpha in cache:
            return cache[alpha]
        axis = next(a for a in range(grid.dim) if alpha[a] > 0)
        lower = list(alpha)
        if alpha[axis] >= 2:
            lower[axis] -= 2
            val = g.diff2(get(tuple(lower)), grid, axis, bc)
        else:
            lower[axis] -= 1
            val = g.diff1(get(tuple(lower)), grid, axis, bc)
        cache[alpha] = val
        return val

    return {alpha: get(alpha) for alpha in multi_indices(grid.dim, order)}


def sobolev_norm_sq(f, grid: GridSpec, order, bc=None):
    if order < 0 or order > 4:
        raise ValueError(f"order must lie in 0..4, got {order}")
    if any(n < 2 * order + 2 for n in grid.n):
        raise InsufficientResolution(
            f"H^{order} needs at least {2 * order + 2} cells per axis, grid has {grid.n}"
        )
    f = np.asarray(f, dtype=float)
    comps = f if f.ndim == grid.dim + 1 else f[np.newaxis]
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for comp in comps:
            for d in _derivatives(comp, grid, order, bc).values():
                total += g.inner_l2(d, d, grid)
    return total


def sobolev_norm(f, grid: GridSpec, order, bc=None):
    """Discrete ``H^order`` norm: root of the summed squared L2 norms of all ``D^alpha f``.

    Works for scalar and vector arrays (components are summed).  Derivatives
    use extrapolated ghosts on walls unless ``bc`` says otherwise.
    """
    return math.sqrt(sobolev_norm_sq(f, grid, order, bc))


def joint_norm(fields, grid, order):
    return math.sqrt(sum(sobolev_norm_sq(f, grid, order) for f in fields))


def compute_c0(init: State):
    """``2 + |(rho0, u0)|_{H^3} + |(h0, k0, eps0)|_{H^2}``."""
    grid = init.grid
    return 2.0 + joint_norm([init.rho, init.u], grid, 3) + joint_norm(
        [init.h, init.k, init.eps], grid, 2
    )


# -- constants ladder -------------------------------------------------------

LADDER_ORDER = ("c1", "c2", "c5", "c6", "c3", "c4")


@dataclass
class EstimateConstants:
    c0: mpmath.mpf
    c1: mpmath.mpf
    c2: mpmath.mpf
    c3: mpmath.mpf
    c4: mpmath.mpf
    c5: mpmath.mpf
    c6: mpmath.mpf
    t_estimate: mpmath.mpf
    gamma: float
    c_generic: float

    def value(self, name):
        return getattr(self, name)

    def log10(self, name):
        with mpmath.workdps(_DPS):
            return float(mpmath.log10(getattr(self, name)))

    def as_lines(self, t_value=None):
        """``name=value log10_name=...`` lines in ladder order, ending with ``T``."""
        lines = []
        for name in ("c0",) + LADDER_ORDER:
            lines.append(f"{name}={format_mp(self.value(name))} log10_{name}={self.log10(name):.17g}")
        t = self.t_estimate if t_value is None else t_value
        with mpmath.workdps(_DPS):
            lt = float(mpmath.log10(t))
        lines.append(f"T={format_mp(t)} log10_T={lt:.17g}")
        return lines


def format_mp(x, digits=17):
    """Shortest faithful text for an mpf: integers print without a fraction."""
    with mpmath.workdps(_DPS):
        x = mpmath.mpf(x)
        if mpmath.isinf(x):
            return "inf"
        if x == mpmath.floor(x) and abs(x) < mpmath.mpf(10) ** digits:
            return str(int(x))
        return mpmath.nstr(x, digits, min_fixed=-4, max_fixed=digits)


def estimate_constants(c0, gamma, c_generic=1.0):
    """The ladder ``c1, c2, c5, c6, c3, c4`` in dependency order, in arbitrary exponent range."""
    if not c0 > 1:
        raise ValueError(f"c0 must exceed 1, got {c0}")
    if not gamma > 1 - 1e-15:
        raise ValueError(f"gamma must be at least 1, got {gamma}")
    if not c_generic >= 1:
        raise ValueError(f"c_generic must be at least 1, got {c_generic}")
    with mpmath.workdps(_DPS):
        C = mpmath.mpf(c_generic)
        a = mpmath.mpf(c0)
        gm = mpmath.mpf(gamma)
        half = mpmath.mpf(1) / 2
        c1 = C * a ** (7 + 2 * gm)
        c2 = C * a ** (5 * half + 3 * gm) * c1**2
        c5 = C * a ** (7 * half) * c1 * c2**2
        c6 = C * a ** (9 * half) * c1**2 * c2**2
        c3 = C * a ** (13 * half + 3 * gm) * c1**4 * c2 * c5
        c4 = C * a ** (9 + 6 * gm) * c1**5 * c2**2
        log_t = -(
            (6 * gm + 16) * mpmath.log(a)
            + 10 * mpmath.log(c1)
            + 8 * mpmath.log(c2)
            + 8 * mpmath.log(c3)
            + 2 * mpmath.log(c4)
            + 2 * mpmath.log(c5)
            + 4 * mpmath.log(c6)
        )
        t = mpmath.exp(log_t)
    return EstimateConstants(a, c1, c2, c3, c4, c5, c6, t, float(gamma), float(c_generic))


def existence_time(consts: EstimateConstants, t1=math.inf, t2=math.inf):
    """``min(product term, T1, T2)``; infinite ``t1``/``t2`` mean unconstrained."""
    if not (t1 > 0 and t2 > 0):
        raise ValueError("T1 and T2 must be positive")
    with mpmath.workdps(_DPS):
        return min(consts.t_estimate, mpmath.mpf(t1), mpmath.mpf(t2))


# -- initial data ----------------------------------------------------------

CLAUSE_RHO = "0 < m < ρ₀"
CLAUSE_RHO_H3 = "ρ₀ ∈ H³"
CLAUSE_U_H3 = "u₀ ∈ H³"
CLAUSE_HKE_H2 = "(h₀, k₀, ε₀) ∈ H²"
CLAUSE_U_BC = "u₀ · n = 0 on ∂Ω"
CLAUSE_H_BC = "h₀ = 0 on ∂Ω"
CLAUSE_K_BC = "∂k₀/∂n = 0 on ∂Ω"
CLAUSE_EPS_BC = "∂ε₀/∂n = 0 on ∂Ω"
CLAUSE_K = "0 < m < k₀"

CLAUSES = (
    CLAUSE_RHO,
    CLAUSE_RHO_H3,
    CLAUSE_U_H3,
    CLAUSE_HKE_H2,
    CLAUSE_U_BC,
    CLAUSE_H_BC,
    CLAUSE_K_BC,
    CLAUSE_EPS_BC,
    CLAUSE_K,
)


@dataclass
class ClauseResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


@dataclass
class ValidationReport:
    clauses: List[ClauseResult]
    c0: float

    @property
    def passed(self):
        return all(c.passed for c in self.clauses)

    def failures(self):
        return [c for c in self.clauses if not c.passed]

    def lines(self):
        out = []
        for c in self.clauses:
            status = "ok  " if c.passed else "FAIL"
            out.append(f"{status} {c.name}: {c.detail}")
        out.append(f"c0={c0_text(self.c0)}")
        return out


def c0_text(c0):
    return format_mp(c0) if math.isfinite(c0) else "inf"


def _bc_tol(f, tol_bc):
    if tol_bc is not None:
        return tol_bc
    scale = float(np.max(np.abs(f))) if f.size else 0.0
    return max(1e-10 * scale, 1e-14)


def _face_traces(f, grid):
    """Values and outward normal differences of ``f`` at every wall face.

    Face values use linear extrapolation from the two nearest cells; normal
    differences are the one-sided cell differences next to the wall.
    """
    values, normals = [], []
    for a in range(grid.dim):
        fa = np.moveaxis(f, a, 0)
        h = grid.spacing[a]
        values.append(1.5 * fa[0] - 0.5 * fa[1])
        values.append(1.5 * fa[-1] - 0.5 * fa[-2])
        normals.append((fa[0] - fa[1]) / h)
        normals.append((fa[-1] - fa[-2]) / h)
    return values, normals


def _max_abs(arrays):
    return max(float(np.max(np.abs(x))) for x in arrays) if arrays else 0.0


def validate_initial(init: State, params: ModelParams, tol_bc=None):
    """Check the admissibility conditions on initial data; never raises."""
    grid = init.grid
    res = []
    rho_min = float(np.min(init.rho))
    res.append(ClauseResult(CLAUSE_RHO, rho_min > params.m, rho_min, params.m,
                            f"min(rho0)={rho_min:.17g} m={params.m:.17g}"))
    norms = {}
    for name, fields, order in (
        (CLAUSE_RHO_H3, [init.rho], 3),
        (CLAUSE_U_H3, [init.u], 3),
        (CLAUSE_HKE_H2, [init.h, init.k, init.eps], 2),
    ):
        try:
            val = joint_norm(fields, grid, order)
            detail = f"norm={val:.17g}"
        except InsufficientResolution as exc:
            val, detail = math.inf, str(exc)
        norms[name] = val
        res.append(ClauseResult(name, math.isfinite(val), val, math.inf, detail))

    if grid.periodic:
        for name in (CLAUSE_U_BC, CLAUSE_H_BC, CLAUSE_K_BC, CLAUSE_EPS_BC):
            res.append(ClauseResult(name, True, 0.0, 0.0, "periodic grid, no boundary"))
    else:
        normal_u = []
        for a in range(grid.dim):
            ua = np.moveaxis(init.u[a], a, 0)
            normal_u.append(1.5 * ua[0] - 0.5 * ua[1])
            normal_u.append(1.5 * ua[-1] - 0.5 * ua[-2])
        checks = (
            (CLAUSE_U_BC, normal_u, _bc_tol(init.u, tol_bc)),
            (CLAUSE_H_BC, _face_traces(init.h, grid)[0], _bc_tol(init.h, tol_bc)),
            (CLAUSE_K_BC, _face_traces(init.k, grid)[1], _bc_tol(init.k, tol_bc)),
            (CLAUSE_EPS_BC, _face_traces(init.eps, grid)[1], _bc_tol(init.eps, tol_bc)),
        )
        for name, traces, tol in checks:
            val = _max_abs(traces)
            res.append(ClauseResult(name, val <= tol, val, tol, f"max={val:.3e} tol={tol:.3e}"))

    k_min = float(np.min(init.k))
    res.append(ClauseResult(CLAUSE_K, k_min > params.m, k_min, params.m,
                            f"min(k0)={k_min:.17g} m={params.m:.17g}"))
    finite = all(math.isfinite(v) for v in norms.values())
    c0 = 2.0 + math.hypot(norms[CLAUSE_RHO_H3], norms[CLAUSE_U_H3]) + norms[CLAUSE_HKE_H2] if finite else math.inf
    return ValidationReport(res, c0)


# -- density lower bound ----------------------------------------------------


def grad_linf(v, grid):
    """``max_x sum_ij |d v_i / d x_j|``, which dominates ``|div v|`` pointwise."""
    jac = g.velocity_gradient(v, grid)
    return float(np.max(np.sum(np.abs(jac), axis=(0, 1))))


@dataclass
class DensityBoundReport:
    times: np.ndarray
    min_rho: np.ndarray
    bound: np.ndarray
    tolerance: float

    @property
    def margin(self):
        return self.min_rho - self.bound

    @property
    def violated(self):
        return bool(np.any(self.min_rho < self.bound - self.tolerance))


def check_density_bound(traj: Trajectory, known: Trajectory, rel_tol=0.05):
    """Compare ``min rho(t)`` with ``min rho0 * exp(-sum dt |grad v|_inf)``.

    Step ``j -> j+1`` used the known velocity of level ``j+1``, so the
    integral is accumulated from those levels.
    """
    levels = len(traj)
    rho0 = float(np.min(traj.states[0].rho))
    integral = 0.0
    bound = np.zeros(levels)
    bound[0] = rho0
    for j in range(1, levels):
        integral += traj.dt * grad_linf(known.states[j].u, traj.grid)
        bound[j] = rho0 * math.exp(-integral)
    mins = np.array([float(np.min(s.rho)) for s in traj.states])
    return DensityBoundReport(traj.times, mins, bound, rel_tol * rho0)


# -- a-priori diagnostics ---------------------------------------------------

NORM_COLUMNS = (
    "t", "rho_h3", "rhot_h1", "u_h1", "u_h2", "u_h3", "k_h1", "k_h2", "eps_h1", "eps_h2",
    "h_h1", "h_h2", "sr_ut", "sr_ht", "sr_kt", "sr_et", "int_u_h4", "int_k_h3",
)
_TIME_DERIVATIVE_COLUMNS = ("rhot_h1", "sr_ut", "sr_ht", "sr_kt", "sr_et")


@dataclass
class NormReport:
    rows: List[Dict[str, Optional[float]]] = field(default_factory=list)
    # running integrals of squared H1 norms of time derivatives
    int_t_h1: List[Dict[str, Optional[float]]] = field(default_factory=list)
    bound_ratios: Dict[str, float] = field(default_factory=dict)

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows])

    def to_csv(self):
        lines = [",".join(NORM_COLUMNS)]
        for row in self.rows:
            cells = []
            for name in NORM_COLUMNS:
                val = row[name]
                cells.append("n/a" if val is None else f"{val:.17g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _norm_or_none(f, grid, order):
    try:
        return sobolev_norm(f, grid, order)
    except InsufficientResolution:
        return None


def monitor_apriori(traj: Trajectory, consts: Optional[EstimateConstants] = None, every=1):
    """Norm time series of a trajectory; diagnostic only, nothing is asserted.

    Time derivatives are first-order backward differences of stored levels
    and are ``None`` on the first level.  Raises ``BlowupDetected`` on any
    non-finite field value or norm.
    """
    grid = traj.grid
    dt = traj.dt
    report = NormReport()
    int_u_h4 = 0.0
    int_k_h3 = 0.0
    int_t = {"u": 0.0, "h": 0.0, "k": 0.0, "eps": 0.0}
    prev = None
    for j, s in enumerate(traj.states):
        for name in s.FIELDS:
            if not np.all(np.isfinite(getattr(s, name))):
                raise BlowupDetected(j, name)
        with np.errstate(over="ignore", invalid="ignore"):
            u_h4 = _norm_or_none(s.u, grid, 4)
            k_h3 = _norm_or_none(s.k, grid, 3)
            if j > 0:
                int_u_h4 = None if u_h4 is None or int_u_h4 is None else int_u_h4 + dt * u_h4**2
                int_k_h3 = None if k_h3 is None or int_k_h3 is None else int_k_h3 + dt * k_h3**2
            row = {
                "t": s.t,
                "rho_h3": _norm_or_none(s.rho, grid, 3),
                "u_h1": _norm_or_none(s.u, grid, 1),
                "u_h2": _norm_or_none(s.u, grid, 2),
                "u_h3": _norm_or_none(s.u, grid, 3),
                "k_h1": _norm_or_none(s.k, grid, 1),
                "k_h2": _norm_or_none(s.k, grid, 2),
                "eps_h1": _norm_or_none(s.eps, grid, 1),
                "eps_h2": _norm_or_none(s.eps, grid, 2),
                "h_h1": _norm_or_none(s.h, grid, 1),
                "h_h2": _norm_or_none(s.h, grid, 2),
                "int_u_h4": int_u_h4 if j > 0 else 0.0,
                "int_k_h3": int_k_h3 if j > 0 else 0.0,
            }
            if prev is None:
                for name in _TIME_DERIVATIVE_COLUMNS:
                    row[name] = None
            else:
                sq_rho = np.sqrt(s.rho)
                rt = (s.rho - prev.rho) / dt
                row["rhot_h1"] = _norm_or_none(rt, grid, 1)
                for col, name in (("sr_ut", "u"), ("sr_ht", "h"), ("sr_kt", "k"), ("sr_et", "eps")):
                    ft = (getattr(s, name) - getattr(prev, name)) / dt
                    row[col] = g.norm_l2(sq_rho * ft, grid)
                    h1 = _norm_or_none(ft, grid, 1)
                    int_t[name] = None if h1 is None or int_t[name] is None else int_t[name] + dt * h1**2
        for col, val in row.items():
            if val is not None and not math.isfinite(val):
                raise BlowupDetected(j, col)
        prev = s
        if j % every == 0 or j == len(traj) - 1:
            report.rows.append(row)
            report.int_t_h1.append(dict(int_t))
    if consts is not None:
        report.bound_ratios = bound_ratios(report, consts)
    return report


def _ratio(q, c):
    if q is None:
        return math.nan
    if q == 0:
        return 0.0
    with mpmath.workdps(_DPS):
        return float(mpmath.mpf(q) / c)


def bound_ratios(report: NormReport, consts: EstimateConstants):
    """Observed quantity over its ladder bound; informative only."""

    def sup(col):
        vals = [r[col] for r in report.rows if r[col] is not None]
        return max(vals) if vals else None

    last_t = report.int_t_h1[-1] if report.int_t_h1 else {}
    last = report.rows[-1] if report.rows else {}
    first_sum = None
    pieces = [sup("u_h1"), sup("k_h1"), sup("eps_h1")]
    if all(p is not None for p in pieces):
        first_sum = sum(pieces)
        extra = [last.get("int_k_h3"), last_t.get("u"), last_t.get("k"), last_t.get("eps")]
        if all(e is not None for e in extra):
            first_sum += sum(extra)
    return {
        "c1": _ratio(first_sum, consts.c1),
        "c2": _ratio(sup("u_h2"), consts.c2),
        "c3": _ratio(sup("u_h3"), consts.c3),
        "c4": _ratio(last.get("int_u_h4"), consts.c4),
        "c5": _ratio(sup("k_h2"), consts.c5),
        "c6": _ratio(sup("eps_h2"), consts.c6),
        "rho_h3/(C c0)": _ratio(sup("rho_h3"), consts.c0 * consts.c_generic),
    }


# -- homogeneous decay ------------------------------------------------------


def homogeneous_decay(t, k0, eps0, c2):
    """Closed-form ``(k, eps)`` of ``k' = -eps``, ``eps' = -c2 eps^2 / k``.

    ``k = k0 (1 + t/t0)^(-n)`` and ``eps = eps0 (1 + t/t0)^(-n-1)`` with
    ``n = 1/(c2 - 1)``, ``t0 = n k0 / eps0``; ``eps0 = 0`` leaves ``k`` fixed.
    """
    t = np.asarray(t, dtype=float)
    if eps0 == 0:
        return np.full_like(t, float(k0)), np.zeros_like(t)
    n = 1.0 / (c2 - 1.0)
    t0 = n * k0 / eps0
    base = 1.0 + t / t0
    return k0 * base ** (-n), eps0 * base ** (-n - 1.0)
