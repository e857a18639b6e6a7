"""Structured box grids, finite-difference operators and field snapshots.

Unknowns are collocated at cell centres ``x_i = (i + 1/2) h``.  Wall
boundaries sit on the cell faces at ``x = 0`` and ``x = L``; boundary
conditions are imposed through one layer of ghost values:

``dirichlet``  odd reflection about zero (homogeneous Dirichlet)
``neumann``    even reflection (homogeneous Neumann)
``periodic``   wraparound
``free``       cubic extrapolation, i.e. one-sided second order stencils
               for fields that carry no boundary condition (rho, p, ...)

Operators work on plain ``numpy`` arrays: a scalar field has shape
``grid.shape`` and a vector field ``(grid.dim, *grid.shape)``.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidField

BC_KINDS = ("dirichlet", "neumann", "periodic", "free")


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box ``[0, L_1] x ... x [0, L_d]`` with ``n_i`` cells per axis."""

    n: tuple
    length: tuple
    bc_velocity: str = "dirichlet0"
    bc_scalar_dirichlet: str = "standard"
    bc_scalar_neumann: str = "standard"
    spacing: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        length = tuple(float(v) for v in self.length)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)
        if len(n) not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {len(n)}")
        if len(length) != len(n):
            raise ValueError("n and length must have the same number of axes")
        if any(v < 4 for v in n):
            raise ValueError(f"need at least 4 cells per axis, got {n}")
        if any(not (v > 0 and math.isfinite(v)) for v in length):
            raise ValueError(f"lengths must be positive, got {length}")
        if self.bc_velocity not in ("dirichlet0", "periodic"):
            raise ValueError(f"bad bc_velocity {self.bc_velocity!r}")
        for name in ("bc_scalar_dirichlet", "bc_scalar_neumann"):
            if getattr(self, name) not in ("standard", "periodic"):
                raise ValueError(f"bad {name} {getattr(self, name)!r}")
        flags = {
            self.bc_velocity == "periodic",
            self.bc_scalar_dirichlet == "periodic",
            self.bc_scalar_neumann == "periodic",
        }
        if len(flags) != 1:
            raise ValueError("periodic boundaries must be used on all fields or none")
        object.__setattr__(self, "spacing", tuple(L / k for L, k in zip(length, n)))

    @classmethod
    def box(cls, n, length=1.0, periodic=False):
        if isinstance(n, int):
            n = (n,)
        n = tuple(n)
        if isinstance(length, (int, float)):
            length = (float(length),) * len(n)
        if periodic:
            return cls(n, tuple(length), "periodic", "periodic", "periodic")
        return cls(n, tuple(length))

    @property
    def dim(self):
        return len(self.n)

    @property
    def shape(self):
        return self.n

    @property
    def vector_shape(self):
        return (self.dim,) + self.n

    @property
    def num_nodes(self):
        return math.prod(self.n)

    @property
    def periodic(self):
        return self.bc_velocity == "periodic"

    @property
    def cell_volume(self):
        return math.prod(self.spacing)

    @property
    def volume(self):
        return math.prod(self.length)

    def axes(self):
        """1D node coordinates per axis."""
        return [(np.arange(k) + 0.5) * h for k, h in zip(self.n, self.spacing)]

    def coords(self):
        """Meshgrid of node coordinates, ``ij`` indexing."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def bc(self, kind):
        """Resolve a requested boundary treatment against the periodic flag."""
        if self.periodic:
            return "periodic"
        if kind is None:
            return "free"
        if kind not in BC_KINDS:
            raise ValueError(f"unknown boundary treatment {kind!r}")
        if kind == "periodic":
            raise ValueError("periodic treatment requested on a wall grid")
        return kind

    def zeros(self):
        return np.zeros(self.shape)

    def zeros_vector(self):
        return np.zeros(self.vector_shape)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size != self.grid.num_nodes:
                raise InvalidField(f"expected {self.grid.num_nodes} values, got {vals.size}")
            vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidField("scalar field contains non-finite values")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.vector_shape:
            if vals.size != self.grid.dim * self.grid.num_nodes:
                raise InvalidField(
                    f"expected {self.grid.dim * self.grid.num_nodes} values, got {vals.size}"
                )
            vals = vals.reshape(self.grid.vector_shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidField("vector field contains non-finite values")
        object.__setattr__(self, "values", vals)


# -- ghost values ---------------------------------------------------------


def _axis_slice(ndim, axis, sl):
    index = [slice(None)] * ndim
    index[axis] = sl
    return tuple(index)


def pad_axis(f, axis, bc):
    """Append one ghost layer on both ends of ``axis``."""
    nd = f.ndim

    def at(sl):
        return f[_axis_slice(nd, axis, sl)]

    if bc == "periodic":
        lo, hi = at(slice(-1, None)), at(slice(0, 1))
    elif bc == "neumann":
        lo, hi = at(slice(0, 1)), at(slice(-1, None))
    elif bc == "dirichlet":
        lo, hi = -at(slice(0, 1)), -at(slice(-1, None))
    elif bc == "free":
        # 4 f0 - 6 f1 + 4 f2 - f3 written in differences: exact on constants
        f0, f1, f2, f3 = (at(slice(i, i + 1)) for i in range(4))
        lo = f0 + 3.0 * (f0 - f1) - 3.0 * (f1 - f2) + (f2 - f3)
        f0, f1, f2, f3 = (at(slice(-1 - i, -i if i else None)) for i in range(4))
        hi = f0 + 3.0 * (f0 - f1) - 3.0 * (f1 - f2) + (f2 - f3)
    else:
        raise ValueError(f"unknown boundary treatment {bc!r}")
    return np.concatenate([lo, f, hi], axis=axis)


def _shift_slices(ndim, axis):
    lo = [slice(None)] * ndim
    hi = [slice(None)] * ndim
    mid = [slice(None)] * ndim
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    mid[axis] = slice(1, -1)
    return tuple(lo), tuple(mid), tuple(hi)


def diff1(f, grid, axis, bc=None):
    """Centred first difference along one axis of a scalar array."""
    fp = pad_axis(f, axis, grid.bc(bc))
    lo, _, hi = _shift_slices(f.ndim, axis)
    return (fp[hi] - fp[lo]) / (2.0 * grid.spacing[axis])


def diff2(f, grid, axis, bc=None):
    """Compact 3-point second difference along one axis."""
    fp = pad_axis(f, axis, grid.bc(bc))
    lo, mid, hi = _shift_slices(f.ndim, axis)
    return (fp[hi] - 2.0 * fp[mid] + fp[lo]) / grid.spacing[axis] ** 2


# -- operators --------------------------------------------------------------


def gradient(f, grid, bc=None):
    """Gradient of a scalar array; returns shape ``(dim, *grid.shape)``."""
    return np.stack([diff1(f, grid, a, bc) for a in range(grid.dim)])


def divergence(u, grid, bc=None):
    out = diff1(u[0], grid, 0, bc)
    for a in range(1, grid.dim):
        out = out + diff1(u[a], grid, a, bc)
    return out


def laplacian(f, grid, bc=None):
    out = diff2(f, grid, 0, bc)
    for a in range(1, grid.dim):
        out = out + diff2(f, grid, a, bc)
    return out


def vector_laplacian(u, grid, bc=None):
    return np.stack([laplacian(u[a], grid, bc) for a in range(grid.dim)])


def grad_div(u, grid, bc=None):
    """``grad(div u)``: divergence with the velocity ghosts, then a free gradient.

    The intermediate divergence carries no boundary condition of its own,
    so it is extended by extrapolation (or wraparound on periodic grids).
    Stencil width is 2 in each axis.
    """
    return gradient(divergence(u, grid, bc), grid, None)


def convect(v, f, grid, bc=None):
    """``v . grad f`` with centred differences."""
    out = v[0] * diff1(f, grid, 0, bc)
    for a in range(1, grid.dim):
        out = out + v[a] * diff1(f, grid, a, bc)
    return out


def velocity_gradient(v, grid, bc=None):
    """Jacobian ``J[i, j] = d v_i / d x_j`` at every node."""
    return np.stack([gradient(v[i], grid, bc) for i in range(grid.dim)])


def inner_l2(f, g, grid):
    """Midpoint-rule ``int f g``; vector arrays are contracted over components."""
    return float(np.sum(np.multiply(f, g)) * grid.cell_volume)


def norm_l2(f, grid):
    return math.sqrt(inner_l2(f, f, grid))


def mass(rho, grid):
    return float(np.sum(rho) * grid.cell_volume)


# -- snapshot files ---------------------------------------------------------

SNAPSHOT_TAG = "keps-field v1"


@dataclass
class Snapshot:
    grid: GridSpec
    t: float
    name: str
    values: np.ndarray

    @property
    def is_vector(self):
        return self.values.ndim == self.grid.dim + 1


def _fmt(x):
    return format(float(x), ".17g")


def format_snapshot(values, grid, t, name):
    values = np.asarray(values, dtype=float)
    vector = values.shape == grid.vector_shape and values.shape != grid.shape
    header = (
        f"# {SNAPSHOT_TAG} dim={grid.dim} n={','.join(str(k) for k in grid.n)} "
        f"len={','.join(_fmt(L) for L in grid.length)} t={_fmt(t)} name={name}"
        f" kind={'vector' if vector else 'scalar'}"
    )
    # node-major layout: components of a vector are interleaved per node
    arr = np.moveaxis(values, 0, -1) if vector else values
    rows = arr.reshape(grid.n[0], -1)
    lines = [header] + [" ".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(path, values, grid, t, name):
    atomic_write(path, format_snapshot(values, grid, t, name))


def parse_snapshot(text, grid_template: Optional[GridSpec] = None):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise InvalidField("snapshot is missing its header line")
    tokens = lines[0].lstrip("#").split()
    if " ".join(tokens[:2]) != SNAPSHOT_TAG:
        raise InvalidField(f"not a {SNAPSHOT_TAG} snapshot")
    meta = {}
    for tok in tokens[2:]:
        if "=" not in tok:
            raise InvalidField(f"malformed header token {tok!r}")
        key, val = tok.split("=", 1)
        meta[key] = val
    try:
        dim = int(meta["dim"])
        n = tuple(int(v) for v in meta["n"].split(","))
        length = tuple(float(v) for v in meta["len"].split(","))
        t = float(meta["t"])
        name = meta["name"]
        kind = meta.get("kind")
    except (KeyError, ValueError) as exc:
        raise InvalidField(f"bad snapshot header: {exc}") from exc
    if len(n) != dim:
        raise InvalidField("header dim does not match n")
    if grid_template is not None:
        grid = GridSpec(
            n,
            length,
            grid_template.bc_velocity,
            grid_template.bc_scalar_dirichlet,
            grid_template.bc_scalar_neumann,
        )
    else:
        grid = GridSpec(n, length)
    try:
        data = np.array([float(x) for ln in lines[1:] for x in ln.split()])
    except ValueError as exc:
        raise InvalidField(f"bad snapshot value: {exc}") from exc
    if kind not in (None, "scalar", "vector"):
        raise InvalidField(f"unknown field kind {kind!r}")
    if kind is None:
        # no kind token: a vector only when the sizes tell it apart
        kind = "vector" if dim > 1 and data.size == grid.num_nodes * dim else "scalar"
    components = dim if kind == "vector" else 1
    if kind == "scalar" and data.size == grid.num_nodes:
        values = data.reshape(grid.shape)
        ScalarField(grid, values)
    elif kind == "vector" and data.size == grid.num_nodes * dim:
        values = np.moveaxis(data.reshape(grid.shape + (dim,)), -1, 0)
        VectorField(grid, values)
    else:
        raise InvalidField(
            f"snapshot holds {data.size} values, expected {grid.num_nodes * components}"
        )
    return Snapshot(grid, t, name, np.ascontiguousarray(values))


def read_snapshot(path, grid_template: Optional[GridSpec] = None):
    with open(path, encoding="utf-8") as fh:
        return parse_snapshot(fh.read(), grid_template)


def sample(func, grid: GridSpec):
    """Evaluate ``func(*coords)`` on the node set."""
    return np.asarray(func(*grid.coords()), dtype=float) * np.ones(grid.shape)


def sample_vector(funcs: Sequence, grid: GridSpec):
    return np.stack([sample(fn, grid) for fn in funcs])
