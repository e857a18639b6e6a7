import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from keps.errors import InvalidField, NonpositiveDensity
from keps.grid import GridSpec
from keps.model import (
    ModelParams,
    State,
    StepRecord,
    Trajectory,
    pressure,
    pressure_dt,
    source_g,
    source_sk,
)

from conftest import interior


def test_default_params():
    p = ModelParams()
    assert (p.mu, p.mu_t, p.mu_e, p.c1, p.c2, p.gamma, p.m) == (1, 1, 2, 1.44, 1.92, 1.4, 0.1)


@pytest.mark.parametrize("kwargs", [
    dict(mu_e=2.5),
    dict(gamma=1.0),
    dict(m=0.0),
    dict(c2=-1.0),
    dict(mu=float("nan")),
])
def test_params_invariants(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_params_viscosity_sum_tolerance():
    ModelParams(mu=0.3, mu_t=0.7, mu_e=1.0 + 1e-13)


# -- pressure --------------------------------------------------------------------


def test_pressure_examples():
    grid = GridSpec.box(8)
    for gamma in (1.01, 1.4, 3.0):
        assert np.all(pressure(np.ones(grid.shape), gamma) == 1.0)
    np.testing.assert_allclose(pressure(np.full(grid.shape, 2.0), 1.0), 2.0)
    with mpmath.workdps(40):
        oracle = float(mpmath.mpf(2) ** mpmath.mpf("1.4"))
    np.testing.assert_allclose(pressure(np.full(grid.shape, 2.0), 1.4), oracle, rtol=1e-15)
    assert oracle == pytest.approx(2.6390158, abs=1e-7)


def test_pressure_rejects_nonpositive_density():
    with pytest.raises(NonpositiveDensity):
        pressure(np.array([1.0, 0.0, 1.0, 1.0]), 1.4)


@given(st.lists(st.floats(0.01, 10), min_size=6, max_size=6), st.lists(st.floats(0, 5), min_size=6, max_size=6),
       st.floats(1.01, 3))
def test_pressure_monotone(base, extra, gamma):
    r2 = np.array(base)
    r1 = r2 + np.array(extra)
    assert np.all(pressure(r1, gamma) >= pressure(r2, gamma))


def test_pressure_dt_examples():
    grid = GridSpec.box((12, 12))
    x, y = grid.coords()
    zero = np.zeros_like(x)
    rho = np.ones(grid.shape)
    assert np.all(pressure_dt(rho, np.stack([zero, zero]), 1.4, grid) == 0)
    pdt = pressure_dt(rho, np.stack([x, zero]), 1.4, grid)
    np.testing.assert_allclose(interior(pdt), -1.4, rtol=1e-12)
    shear = np.stack([np.sin(2 * math.pi * y), zero])
    assert np.max(np.abs(pressure_dt(3.0 * rho, shear, 1.4, grid))) < 1e-12


# -- sources -----------------------------------------------------------------------


def _box3():
    grid = GridSpec.box((8, 8, 8))
    return grid, grid.coords()


def test_source_sk_examples(params):
    grid, (x, y, z) = _box3()
    zero = np.zeros_like(x)
    rho = np.full(grid.shape, 1.3)
    assert np.all(source_sk(np.stack([zero, zero, zero]), rho, params, grid) == 0)
    np.testing.assert_allclose(source_sk(np.stack([y, zero, zero]), rho, params, grid), params.mu, rtol=1e-12)
    alpha = 0.7
    dil = source_sk(alpha * np.stack([x, y, z]), rho, params, grid)
    assert np.max(np.abs(dil)) < 1e-12


def test_source_g_examples(params):
    grid, (x, y, z) = _box3()
    zero = np.zeros_like(x)
    rho = np.full(grid.shape, 1.5)
    pi = np.full(grid.shape, 0.8)
    assert np.all(source_g(np.stack([zero, zero, zero]), rho, pi, params, grid) == 0)
    np.testing.assert_allclose(source_g(np.stack([y, zero, zero]), rho, pi, params, grid), params.mu_e, rtol=1e-12)
    alpha = 0.5
    got = source_g(np.stack([alpha * x, zero, zero]), rho, pi, params, grid)
    expected = 4 / 3 * params.mu_e * alpha**2 - 2 / 3 * alpha * 1.5 * 0.8
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-14)


def test_source_g_matches_sk_strain_with_effective_viscosity(rng):
    grid = GridSpec.box((10, 9))
    x, y = grid.coords()
    a = rng.normal(size=6)
    v = np.stack([a[0] * np.sin(x + a[1] * y), a[2] * np.cos(a[3] * x) * y + a[4] * x * y])
    rho = np.full(grid.shape, 1.0 + a[5] ** 2)
    pe = ModelParams()
    sk_params = ModelParams(mu=pe.mu_e, mu_t=1.0, mu_e=pe.mu_e + 1.0)
    got = source_g(v, rho, np.zeros(grid.shape), pe, grid)
    np.testing.assert_allclose(got, source_sk(v, rho, sk_params, grid), rtol=1e-12, atol=1e-12)


@given(st.floats(0.1, 2.0), st.floats(-1, 1), st.floats(1.01, 2.5))
def test_source_sk_nonnegative_at_rest(base, slope, gamma):
    grid = GridSpec.box((10, 6))
    x, y = grid.coords()
    rho = base + 0.5 * abs(slope) * (1 + np.sin(3 * x + y))
    params = ModelParams(gamma=gamma)
    out = source_sk(np.zeros(grid.vector_shape), rho, params, grid)
    assert np.all(out >= 0)


def test_sources_are_frame_symmetric(params, rng):
    grid = GridSpec.box((9, 9))
    x, y = grid.coords()
    c = rng.normal(size=4)
    v = np.stack([c[0] * x * y + np.sin(y), c[1] * x**2 + c[2] * y])
    rho = 1.2 + 0.1 * np.cos(x + 2 * y)
    pi = 1.0 + 0.2 * x * y
    swapped_v = np.stack([v[1].T, v[0].T])
    for fn in (lambda vv, r, p: source_sk(vv, r, params, grid),
               lambda vv, r, p: source_g(vv, r, p, params, grid)):
        a = fn(v, rho, pi)
        b = fn(swapped_v, rho.T, pi.T)
        np.testing.assert_allclose(b, a.T, rtol=1e-12, atol=1e-12)


# -- containers --------------------------------------------------------------------


def test_state_checks_shapes_and_finiteness(wall1d):
    s = State.uniform(wall1d)
    with pytest.raises(InvalidField):
        State(wall1d, 0.0, s.rho[:-1], s.u, s.h, s.k, s.eps)
    bad = s.k.copy()
    bad[0] = np.inf
    with pytest.raises(InvalidField):
        State(wall1d, 0.0, s.rho, s.u, s.h, bad, s.eps)
    with pytest.raises(InvalidField):
        State(wall1d, 0.0, s.rho, np.zeros(wall1d.shape), s.h, s.k, s.eps)


def test_state_helpers(wall1d):
    s = State.uniform(wall1d, rho=2.0, k=3.0)
    later = s.at_time(0.5)
    assert later.t == 0.5 and later.identical(s)
    assert set(s.fields()) == set(State.FIELDS)


def test_trajectory_requires_uniform_spacing(wall1d, params):
    s = State.uniform(wall1d)
    Trajectory(wall1d, params, 0.1, [s, s.at_time(0.1), s.at_time(0.2)])
    with pytest.raises(ValueError):
        Trajectory(wall1d, params, 0.1, [s, s.at_time(0.1), s.at_time(0.25)])
    with pytest.raises(ValueError):
        Trajectory(wall1d, params, 0.1, [])
    traj = Trajectory(wall1d, params, 0.1, [s, s.at_time(0.1)])
    assert traj.horizon == pytest.approx(0.1) and len(traj) == 2


def test_manifest_line():
    rec = StepRecord(3, 0.003, 12, 0.99, 0.5, 1.0, 0.0)
    assert rec.manifest_line() == "step=3 t=0.0030000000000000001 lin_iters=12 min_rho=0.98999999999999999 min_k=0.5 mass_drift=0.000e+00"
