"""Built-in initial data: uniform, homogeneous decay, shear layer and the manufactured case.

Each preset contributes configuration defaults (grid, time step, horizon)
and builds the initial state on whatever grid the final configuration
describes.  Spatially varying presets use smooth bumps that vanish, with
all derivatives, outside ``(0.1, 0.9)`` so every wall condition holds
exactly.
"""

from __future__ import annotations

import math
from typing import Dict, Mapping

import numpy as np

from . import _mms_forcing as mf
from .grid import GridSpec
from .model import State

PRESETS = ("uniform", "decay", "shear", "mms1", "mms2", "mms3")

# refinement ladder of the manufactured case: cells per axis and steps to the horizon
MMS_HORIZON = 0.2
MMS_LEVELS = {"mms1": (16, 8), "mms2": (32, 32), "mms3": (64, 128)}

_COMMON = {
    "init.rho0": 1.0,
    "init.u0": 0.0,
    "init.h0": 0.0,
    "init.k0": 1.0,
    "init.eps0": 0.0,
    "init.amplitude": 1.0,
}

_DEFAULTS: Dict[str, Dict[str, object]] = {
    "uniform": {"grid.dim": 1, "grid.n": 64, "time.dt": 1e-3, "time.t_end": 0.1},
    "decay": {"grid.dim": 1, "grid.n": 64, "time.dt": 1e-3, "time.t_end": 1.0,
              "picard.window": 0.1, "init.eps0": 1.0},
    "shear": {"grid.dim": 2, "grid.n": 32, "time.dt": 2e-3, "time.t_end": 0.2,
              "init.eps0": 0.5},
}
for _name, (_n, _steps) in MMS_LEVELS.items():
    _DEFAULTS[_name] = {"grid.dim": 2, "grid.n": _n, "time.dt": MMS_HORIZON / _steps,
                        "time.t_end": MMS_HORIZON, "init.k0": 1.5, "init.eps0": 1.0}


def preset_defaults(name):
    """Configuration defaults a preset brings (lower precedence than the user's keys)."""
    if name not in _DEFAULTS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    out = dict(_COMMON)
    out.update(_DEFAULTS[name])
    return out


def bump(s):
    """``exp(1 - 1/(1 - r^2))`` with ``r = (s - 0.5)/0.4``: 1 at the centre, 0 off ``(0.1, 0.9)``."""
    r = (np.asarray(s, dtype=float) - 0.5) / 0.4
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _product_bump(coords, length):
    out = np.ones(coords[0].shape)
    for c, ell in zip(coords, length):
        out = out * bump(c / ell)
    return out


def _uniform(grid, opts):
    return State.uniform(grid, rho=opts["init.rho0"], h=opts["init.h0"], k=opts["init.k0"],
                         eps=opts["init.eps0"], u=opts["init.u0"])


def _shear(grid, opts):
    """Localised swirl-free shear: ``u_0 = A B (sin(2 pi y), 0, ...)``; 1D uses ``sin(2 pi x)``."""
    coords = grid.coords()
    b = _product_bump(coords, grid.length)
    amp = opts["init.amplitude"]
    u = np.zeros(grid.vector_shape)
    across = coords[1] / grid.length[1] if grid.dim > 1 else coords[0] / grid.length[0]
    u[0] = amp * b * np.sin(2.0 * math.pi * across)
    return State(
        grid,
        0.0,
        opts["init.rho0"] + 0.2 * b,
        u,
        0.1 * b,
        opts["init.k0"] + 0.5 * b,
        opts["init.eps0"] + 0.2 * b,
    )


def mms_exact(grid: GridSpec, t):
    """The manufactured state at time ``t`` (unit square only)."""
    if grid.dim != 2:
        raise ValueError("the manufactured solution is two-dimensional")
    x, y = grid.coords()
    u = np.stack([mf.exact_u0(x, y, t), mf.exact_u1(x, y, t)])
    return State(grid, t, mf.exact_rho(x, y, t), u, mf.exact_h(x, y, t), mf.exact_k(x, y, t),
                 mf.exact_eps(x, y, t))


def build_initial(name, grid: GridSpec, opts: Mapping[str, float]):
    """Initial state of preset ``name`` on ``grid`` using the ``init.*`` options."""
    merged = dict(_COMMON)
    merged.update({k: v for k, v in opts.items() if k.startswith("init.") and k in _COMMON})
    if name in ("uniform", "decay"):
        return _uniform(grid, merged)
    if name == "shear":
        return _shear(grid, merged)
    if name in MMS_LEVELS:
        return mms_exact(grid, 0.0)
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
