import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keps.analysis import (
    CLAUSE_EPS_BC,
    CLAUSE_H_BC,
    CLAUSE_HKE_H2,
    CLAUSE_K,
    CLAUSE_K_BC,
    CLAUSE_RHO,
    CLAUSE_RHO_H3,
    CLAUSE_U_BC,
    CLAUSE_U_H3,
    CLAUSES,
    BlowupDetected,
    check_density_bound,
    compute_c0,
    estimate_constants,
    existence_time,
    homogeneous_decay,
    monitor_apriori,
    multi_indices,
    sobolev_norm,
    validate_initial,
)
from keps.errors import InsufficientResolution
from keps.grid import GridSpec
from keps.linstep import StepConfig, linearized_solve
from keps.model import State, Trajectory
from keps.picard import initial_iterate
from keps.presets import bump


# -- Sobolev norms -------------------------------------------------------------


def test_multi_indices_count():
    # number of multi-indices of size <= s in d variables is binom(s + d, d)
    for dim in (1, 2, 3):
        for order in range(5):
            assert len(multi_indices(dim, order)) == math.comb(order + dim, dim)


@pytest.mark.parametrize("order", range(5))
def test_constant_field_norm(order):
    grid = GridSpec.box((12, 12))
    assert sobolev_norm(np.full(grid.shape, -3.0), grid, order) == pytest.approx(3.0, rel=1e-14)
    assert sobolev_norm(np.zeros(grid.shape), grid, order) == 0.0


def test_l2_norm_of_sine():
    for n in (32, 64):
        grid = GridSpec.box(n, periodic=True)
        f = np.sin(2 * math.pi * grid.coords()[0])
        assert sobolev_norm(f, grid, 0) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_h1_norm_of_sine_converges():
    # |sin 2 pi x|_{H1}^2 = 1/2 + (2 pi)^2 / 2
    exact = math.sqrt(0.5 + 2 * math.pi**2)
    errs = []
    for n in (32, 64):
        grid = GridSpec.box(n, periodic=True)
        errs.append(abs(sobolev_norm(np.sin(2 * math.pi * grid.coords()[0]), grid, 1) - exact))
    assert errs[1] < errs[0] / 3.5


def test_insufficient_resolution():
    grid = GridSpec.box(7)
    sobolev_norm(np.ones(grid.shape), grid, 2)
    with pytest.raises(InsufficientResolution):
        sobolev_norm(np.ones(grid.shape), grid, 3)
    with pytest.raises(ValueError):
        sobolev_norm(np.ones(grid.shape), grid, 5)


@settings(max_examples=25)
@given(st.integers(0, 2**31 - 1), st.integers(0, 3), st.floats(1e-3, 5), st.booleans())
def test_norm_monotone_in_order_and_homogeneous(seed, order, alpha, negative):
    alpha = -alpha if negative else alpha
    rng = np.random.default_rng(seed)
    grid = GridSpec.box((11, 10))
    f = rng.normal(size=grid.shape)
    lo, hi = sobolev_norm(f, grid, order), sobolev_norm(f, grid, order + 1)
    assert hi >= lo
    assert sobolev_norm(alpha * f, grid, order) == pytest.approx(abs(alpha) * lo, rel=1e-12, abs=1e-300)


# -- c0 and the ladder ------------------------------------------------------------


def test_compute_c0_examples(wall2d):
    unit = GridSpec.box((12, 12))
    assert compute_c0(State.uniform(unit)) == pytest.approx(4.0, rel=1e-14)
    assert compute_c0(State.uniform(unit, k=0.0)) == pytest.approx(3.0, rel=1e-14)
    assert compute_c0(State.uniform(unit, rho=2.0)) == pytest.approx(5.0, rel=1e-14)
    # on a box of volume 0.75 a unit constant has norm sqrt(0.75)
    assert compute_c0(State.uniform(wall2d)) == pytest.approx(2 + 2 * math.sqrt(0.75), rel=1e-14)


def _exponent_oracle(s, gamma):
    """Base-2 exponents of the ladder for c0 = 2**s and C = 1, in exact rationals."""
    gm = Fraction(float(gamma))  # the binary value the code actually receives
    e1 = (7 + 2 * gm) * s
    e2 = (Fraction(5, 2) + 3 * gm) * s + 2 * e1
    e5 = Fraction(7, 2) * s + e1 + 2 * e2
    e6 = Fraction(9, 2) * s + 2 * e1 + 2 * e2
    e3 = (Fraction(13, 2) + 3 * gm) * s + 4 * e1 + e2 + e5
    e4 = (9 + 6 * gm) * s + 5 * e1 + 2 * e2
    et = -((6 * gm + 16) * s + 10 * e1 + 8 * e2 + 8 * e3 + 2 * e4 + 2 * e5 + 4 * e6)
    return {"c1": e1, "c2": e2, "c3": e3, "c4": e4, "c5": e5, "c6": e6, "T": et}


@pytest.mark.parametrize("s,gamma", [(1, 1), (2, 1), (1, Fraction(7, 5)), (2, 2)])
def test_ladder_against_exact_exponents(s, gamma):
    consts = estimate_constants(2**s, float(gamma))
    oracle = _exponent_oracle(s, gamma)
    with mpmath.workdps(60):
        for name in ("c1", "c2", "c3", "c4", "c5", "c6"):
            got = mpmath.log(consts.value(name), 2)
            assert abs(got - mpmath.mpf(oracle[name].numerator) / oracle[name].denominator) < mpmath.mpf(10) ** -40
        got_t = mpmath.log(consts.t_estimate, 2)
        want_t = mpmath.mpf(oracle["T"].numerator) / oracle["T"].denominator
        assert abs(got_t - want_t) < mpmath.mpf(10) ** -35


def test_ladder_examples():
    consts = estimate_constants(2, 1.0)
    assert consts.c1 == 512
    assert float(consts.c2) == pytest.approx(2**23.5, rel=1e-15)
    assert float(consts.c2) == pytest.approx(1.1863e7, rel=1e-4)
    assert _exponent_oracle(2, 1)["c1"] == 18  # c0 = 4 gives 4**9 = 2**18


def test_ladder_near_degenerate_edge():
    consts = estimate_constants(1 + 1e-12, 1.0)
    for name in ("c1", "c2", "c3", "c4", "c5", "c6"):
        assert 1 < consts.value(name) < 1 + 1e-6
    assert 1 - 1e-5 < consts.t_estimate < 1


def test_ladder_rejects_bad_input():
    for args in ((1.0, 1.4), (2.0, 0.5), (2.0, 1.4, 0.5)):
        with pytest.raises(ValueError):
            estimate_constants(*args)


@settings(max_examples=25)
@given(st.floats(1.5, 50), st.floats(1.0, 3.0), st.floats(1.0, 5.0), st.floats(1.01, 2.0))
def test_ladder_monotone(c0, gamma, cgen, factor):
    base = estimate_constants(c0, gamma, cgen)
    up_c0 = estimate_constants(c0 * factor, gamma, cgen)
    up_c = estimate_constants(c0, gamma, cgen * factor)
    for name in ("c1", "c2", "c3", "c4", "c5", "c6"):
        assert up_c0.value(name) > base.value(name)
        assert up_c.value(name) > base.value(name)
    assert up_c0.t_estimate < base.t_estimate
    assert existence_time(base, 0.5, 2.0) <= 0.5


def test_existence_time_min_semantics():
    consts = estimate_constants(1 + 1e-9, 1.0)
    assert existence_time(consts, 1e-30) == mpmath.mpf(1e-30)
    assert existence_time(consts) == consts.t_estimate
    with pytest.raises(ValueError):
        existence_time(consts, 0.0)


def test_as_lines_order():
    lines = estimate_constants(2, 1.0).as_lines()
    names = [line.split("=", 1)[0] for line in lines]
    assert names == ["c0", "c1", "c2", "c5", "c6", "c3", "c4", "T"]
    assert lines[1].startswith("c1=512 ")


# -- validation -----------------------------------------------------------------------


def _failed(report):
    return {c.name for c in report.failures()}


def test_validation_uniform_passes(wall2d, params):
    init = State.uniform(wall2d, eps=1.0)
    report = validate_initial(init, params)
    assert report.passed
    assert [c.name for c in report.clauses] == list(CLAUSES)
    assert report.c0 == pytest.approx(compute_c0(init), rel=1e-14)
    assert report.lines()[-1].startswith("c0=")


@pytest.mark.parametrize("kwargs,clause", [
    (dict(rho=0.05), CLAUSE_RHO),
    (dict(k=0.05), CLAUSE_K),
    (dict(h=1.0), CLAUSE_H_BC),
    (dict(u=1.0), CLAUSE_U_BC),
    (dict(rho=1e200), CLAUSE_RHO_H3),
    (dict(eps=1e200), CLAUSE_HKE_H2),
])
def test_validation_single_clause_failures(wall2d, params, kwargs, clause):
    report = validate_initial(State.uniform(wall2d, **kwargs), params)
    assert clause in _failed(report)
    assert not report.passed


def test_validation_velocity_norm_and_normal_derivatives(wall2d, params):
    x, y = wall2d.coords()
    b = bump(x) * bump(y / 0.75)
    u = np.stack([1e200 * b, 0 * b])
    s = State(wall2d, 0.0, np.ones(wall2d.shape), u, 0 * b, np.ones(wall2d.shape), np.ones(wall2d.shape))
    assert _failed(validate_initial(s, params)) == {CLAUSE_U_H3}
    tilted = State(wall2d, 0.0, np.ones(wall2d.shape), np.zeros(wall2d.vector_shape), 0 * b, 1 + 0.1 * x,
                   1 + 0.1 * y)
    assert _failed(validate_initial(tilted, params)) == {CLAUSE_K_BC, CLAUSE_EPS_BC}


def test_validation_periodic_skips_boundary(periodic1d, params):
    report = validate_initial(State.uniform(periodic1d, h=1.0, u=1.0), params)
    assert report.passed


def test_validation_is_order_independent(params):
    grid = GridSpec.box((12, 10))
    x, y = grid.coords()
    s = State(grid, 0.0, 1 + 0.1 * bump(x) * bump(y), np.zeros(grid.vector_shape), 0.2 * x * y,
              1 + x, np.ones(grid.shape))
    a = validate_initial(s, params)
    flipped = State(grid, 0.0, s.rho[::-1, ::-1].copy(), s.u, s.h[::-1, ::-1].copy(),
                    s.k[::-1, ::-1].copy(), s.eps)
    b = validate_initial(flipped, params)
    assert _failed(a) == _failed(b) == {CLAUSE_H_BC, CLAUSE_K_BC}
    assert a.c0 == pytest.approx(b.c0, rel=1e-12)


# -- density bound ----------------------------------------------------------------------


def _constant_known(init, horizon, dt, params, v):
    base = initial_iterate(init, horizon, dt, params)
    states = [s if j == 0 else State(s.grid, s.t, s.rho, v, s.h, s.k, s.eps) for j, s in enumerate(base.states)]
    return Trajectory(init.grid, params, dt, states)


def _rho_only_run(grid, rho0, v, dt, steps, params):
    init = State(grid, 0.0, rho0, np.zeros(grid.vector_shape), np.zeros(grid.shape), np.ones(grid.shape),
                 np.zeros(grid.shape))
    known = _constant_known(init, steps * dt, dt, params, v)
    return linearized_solve(init, known, params, StepConfig(dt=dt)), known


def test_density_bound_at_rest(wall1d, params):
    rho0 = 1 + 0.3 * bump(wall1d.coords()[0])
    traj, known = _rho_only_run(wall1d, rho0, np.zeros(wall1d.vector_shape), 0.01, 5, params)
    rep = check_density_bound(traj, known)
    assert np.all(rep.bound == rho0.min()) and np.all(rep.min_rho == rho0.min())
    assert not rep.violated


def test_density_bound_constant_periodic_flow(periodic1d, params):
    x = periodic1d.coords()[0]
    rho0 = 1 + 0.5 * np.sin(2 * math.pi * x)
    traj, known = _rho_only_run(periodic1d, rho0, np.full(periodic1d.vector_shape, 0.5), 0.01, 20, params)
    rep = check_density_bound(traj, known)
    assert np.all(np.diff(rep.min_rho) >= -1e-14)
    assert not rep.violated and np.all(rep.margin >= -1e-14)


def test_density_bound_compressive_flow(params):
    # v = alpha sin(2 pi x) / (2 pi) vanishes on the walls, compresses toward the
    # centre and stretches at the walls, where div v = alpha = |grad v|_inf.  With the
    # density minimum on the walls the bound rho0 exp(-alpha t) is nearly attained.
    alpha, dt, steps = 2.0, 2e-3, 100
    reports = {}
    for n in (64, 256):
        grid = GridSpec.box(n)
        x = grid.coords()[0]
        v = (alpha * np.sin(2 * math.pi * x) / (2 * math.pi))[None]
        rho0 = 1 - 0.2 * np.cos(2 * math.pi * x)
        refine = n // 64
        traj, known = _rho_only_run(grid, rho0, v, dt / refine, steps * refine, params)
        reports[n] = check_density_bound(traj, known)
    coarse, fine = reports[64], reports[256]
    assert not coarse.violated and not fine.violated
    # the coarse minimum tracks the fine-grid reference within the stated tolerance
    assert np.max(np.abs(coarse.min_rho - fine.min_rho[::4])) < coarse.tolerance
    assert np.all(coarse.min_rho >= coarse.bound - coarse.tolerance)
    assert coarse.bound[-1] == pytest.approx(float(rho0.min()) * math.exp(-alpha * 0.2), rel=0.02)


# -- monitor --------------------------------------------------------------------------------


def test_monitor_constant_trajectory(wall2d, params):
    init = State.uniform(wall2d, rho=1.0, k=1.0, eps=0.0)
    traj = initial_iterate(init, 0.05, 0.01, params)
    report = monitor_apriori(traj, estimate_constants(4.0, 1.4))
    assert len(report.rows) == 6
    assert report.rows[0]["sr_ut"] is None
    for row in report.rows[1:]:
        assert row["sr_ut"] == 0 and row["sr_kt"] == 0 and row["rhot_h1"] == 0
    np.testing.assert_allclose(report.column("rho_h3"), math.sqrt(wall2d.volume), rtol=1e-14)
    assert report.bound_ratios["c2"] == 0.0
    assert report.to_csv().splitlines()[1].count("n/a") == 5


def test_monitor_detects_nan(wall2d, params):
    init = State.uniform(wall2d)
    traj = initial_iterate(init, 0.03, 0.01, params)
    bad = traj.states[2].k.copy()
    bad[3, 4] = np.nan
    traj.states[2].k = bad
    with pytest.raises(BlowupDetected) as info:
        monitor_apriori(traj)
    assert info.value.level == 2 and info.value.field == "k"


# -- homogeneous decay ---------------------------------------------------------------------------


def _rk4(k0, e0, c2, t_end, steps):
    def f(k, e):
        return -e, -c2 * e * e / k

    k, e = k0, e0
    h = t_end / steps
    for _ in range(steps):
        a = f(k, e)
        b = f(k + h / 2 * a[0], e + h / 2 * a[1])
        c = f(k + h / 2 * b[0], e + h / 2 * b[1])
        d = f(k + h * c[0], e + h * c[1])
        k += h / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        e += h / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
    return k, e


@pytest.mark.parametrize("k0,e0,c2", [(1.0, 1.0, 1.92), (2.0, 0.3, 1.5), (0.5, 2.0, 2.5)])
def test_homogeneous_decay_matches_rk4(k0, e0, c2):
    k, e = homogeneous_decay(1.0, k0, e0, c2)
    rk, re = _rk4(k0, e0, c2, 1.0, 4000)
    assert float(k) == pytest.approx(rk, rel=1e-10)
    assert float(e) == pytest.approx(re, rel=1e-10)


def test_homogeneous_decay_without_dissipation():
    k, e = homogeneous_decay(np.linspace(0, 1, 5), 1.3, 0.0, 1.92)
    assert np.all(k == 1.3) and np.all(e == 0)
