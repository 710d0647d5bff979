"""Periodic uniform grids, finite-difference operators, and discrete norms.

All stencils are centered, second order, and wrap periodically.  Fields are
value types: every operator returns a new Field and never mutates its input.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GridSpec",
    "Field",
    "Trajectory",
    "gradient",
    "divergence",
    "third_derivative_axis",
    "laplacian",
    "lp_norm",
    "spacetime_integral",
    "write_snapshot_csv",
    "read_snapshot_csv",
    "write_snapshot_binary",
    "read_snapshot_binary",
]

SNAPSHOT_MAGIC = b"DDL1"


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on a box [0, L)^d with N cells per axis."""

    n: int
    length: float = 2.0 * np.pi
    dim: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.n}")
        if self.length <= 0:
            raise ValueError("period length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def axes(self) -> list:
        """Cell-center coordinates along each axis."""
        x = np.arange(self.n) * self.dx
        return [x] * self.dim

    def meshgrid(self) -> list:
        return list(np.meshgrid(*self.axes(), indexing="ij"))


class Field:
    """Gridded scalar values on a periodic box.  Immutable after construction."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite values in field")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def __setattr__(self, name, value):
        if hasattr(self, "values") and name in ("grid", "values"):
            raise AttributeError("Field is immutable")
        object.__setattr__(self, name, value)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass
class Trajectory:
    """Time history of a solve: sampled (t, Field) pairs plus run metadata."""

    grid: GridSpec
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    blowup: bool = False
    taint: bool = False

    def append(self, t: float, f: Field):
        if self.times and t <= self.times[-1]:
            raise ValueError("sample times must be strictly increasing")
        if not self.times and t != 0.0:
            raise ValueError("trajectory must start at t=0")
        self.times.append(float(t))
        self.fields.append(f)

    @property
    def t_final(self) -> float:
        return self.times[-1]

    def final(self) -> Field:
        return self.fields[-1]

    def at_time(self, t: float) -> Field:
        """Sample nearest in time to t."""
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.fields[i]


def _diff_centered(values: np.ndarray, axis: int, dx: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * dx)


def gradient(f: Field) -> list:
    """Centered gradient, one Field per axis, periodic wrap."""
    dx = f.grid.dx
    return [Field(f.grid, _diff_centered(f.values, ax, dx)) for ax in range(f.grid.dim)]


def divergence(components: list) -> Field:
    """Centered divergence of a vector of Fields sharing one grid."""
    grid = components[0].grid
    for c in components[1:]:
        if c.grid != grid:
            raise ValueError("divergence components must share a grid")
    if len(components) != grid.dim:
        raise ValueError(f"expected {grid.dim} components, got {len(components)}")
    out = np.zeros(grid.shape)
    for ax, c in enumerate(components):
        out += _diff_centered(c.values, ax, grid.dx)
    return Field(grid, out)


def laplacian(f: Field) -> Field:
    """divergence(gradient(u)): the wide 5-point stencil with spacing 2dx."""
    return divergence(gradient(f))


def third_derivative_axis(f: Field, axis: int = 0) -> Field:
    """Centered third derivative along one axis:
    (u_{i+2} - 2 u_{i+1} + 2 u_{i-1} - u_{i-2}) / (2 dx^3), second order."""
    u = f.values
    dx3 = f.grid.dx**3
    out = (
        np.roll(u, -2, axis=axis)
        - 2.0 * np.roll(u, -1, axis=axis)
        + 2.0 * np.roll(u, 1, axis=axis)
        - np.roll(u, 2, axis=axis)
    ) / (2.0 * dx3)
    return Field(f.grid, out)


def lp_norm(f: Field, p) -> float:
    """Discrete L^p norm: (sum |u|^p dx^d)^(1/p); p=inf gives max |u|."""
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(f.values)))
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p))


def spacetime_integral(traj: Trajectory, integrand) -> float:
    """Trapezoid in time of the cell sums of integrand(t, field).

    integrand maps (t, Field) to an array over grid cells (or a Field).
    """
    if len(traj.times) < 2:
        raise ValueError("need at least two time samples")
    vol = traj.grid.cell_volume
    sums = []
    for t, f in zip(traj.times, traj.fields):
        g = integrand(t, f)
        if isinstance(g, Field):
            g = g.values
        sums.append(float(np.sum(g)) * vol)
    return float(np.trapezoid(sums, traj.times))


# ---------------------------------------------------------------------------
# snapshot I/O


def write_snapshot_csv(f: Field, path):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if f.grid.dim == 1:
            fh.write("x,u\n")
            x = f.grid.axes()[0]
            for xi, ui in zip(x, f.values):
                fh.write(f"{float(xi)!r},{float(ui)!r}\n")
        else:
            fh.write("x,y,u\n")
            xg, yg = f.grid.meshgrid()
            for xi, yi, ui in zip(xg.ravel(), yg.ravel(), f.values.ravel()):
                fh.write(f"{float(xi)!r},{float(yi)!r},{float(ui)!r}\n")


def read_snapshot_csv(path, length=None) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    ncols = data.shape[1]
    if ncols == 2:
        n = data.shape[0]
        x = data[:, 0]
        dx = x[1] - x[0]
        grid = GridSpec(n=n, length=length if length is not None else n * dx, dim=1)
        return Field(grid, data[:, 1])
    if ncols == 3:
        n = int(round(np.sqrt(data.shape[0])))
        if n * n != data.shape[0]:
            raise ValueError("2-d snapshot is not square")
        x = data[:, 0].reshape(n, n)
        dx = x[1, 0] - x[0, 0]
        grid = GridSpec(n=n, length=length if length is not None else n * dx, dim=2)
        return Field(grid, data[:, 2].reshape(n, n))
    raise ValueError(f"unrecognized snapshot with {ncols} columns")


def write_snapshot_binary(f: Field, path):
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<B", f.grid.dim))
        fh.write(struct.pack("<d", f.grid.length))
        fh.write(struct.pack("<" + "q" * f.grid.dim, *f.values.shape))
        fh.write(f.values.astype("<f8").tobytes())


def read_snapshot_binary(path) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        (dim,) = struct.unpack("<B", fh.read(1))
        (length,) = struct.unpack("<d", fh.read(8))
        shape = struct.unpack("<" + "q" * dim, fh.read(8 * dim))
        vals = np.frombuffer(fh.read(), dtype="<f8").reshape(shape)
        grid = GridSpec(n=shape[0], length=length, dim=dim)
        return Field(grid, vals)


def write_manifest(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
