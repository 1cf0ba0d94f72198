"""Uniform 1D/2D grids with an explicit exterior collar, and fields over them.

Nodes sit at ``lower + i*h`` and each node owns the cell ``[x - h/2, x + h/2]``,
so kernel quadrature never touches a zero offset.  Non-periodic axes carry a
collar of stored exterior nodes on both sides and, beyond it, a constant
far-field tail per side.  Periodic axes wrap and have no collar.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

_REL_TOL = 1e-12


class GridError(ValueError):
    """Invalid grid, field or lattice data."""


def _as_multiple(length: float, h: float, what: str) -> int:
    q = length / h
    k = int(round(q))
    if abs(q - k) > _REL_TOL * max(1.0, abs(q)) * 10:
        raise GridError(f"{what} = {length!r} is not an integer multiple of h = {h!r}")
    return k


@dataclass(frozen=True)
class Grid:
    """Uniform grid.

    ``periodic[a]`` marks axis ``a`` as periodic with period ``upper[a] - lower[a]``;
    such an axis stores ``period / h`` nodes and no collar.  A non-periodic axis
    stores ``extent / h + 1`` interior nodes plus ``collar / h`` exterior nodes on
    each side.
    """

    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    h: float
    collar: float = 0.0
    periodic: tuple[bool, ...] = ()

    def __post_init__(self):
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * self.dim)

    @property
    def n_interior(self) -> tuple[int, ...]:
        out = []
        for a in range(self.dim):
            k = int(round((self.upper[a] - self.lower[a]) / self.h))
            out.append(k if self.periodic[a] else k + 1)
        return tuple(out)

    @property
    def n_collar(self) -> tuple[int, ...]:
        c = int(round(self.collar / self.h))
        return tuple(0 if p else c for p in self.periodic)

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the stored array (interior plus collar)."""
        return tuple(n + 2 * c for n, c in zip(self.n_interior, self.n_collar))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axis_coords(self, axis: int) -> np.ndarray:
        """Coordinates of every stored node along ``axis``."""
        c = self.n_collar[axis]
        idx = np.arange(self.shape[axis]) - c
        return self.lower[axis] + idx * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        axes = [self.axis_coords(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        sl = tuple(slice(c, c + n) for n, c in zip(self.n_interior, self.n_collar))
        mask[sl] = True
        return mask

    def interior_slice(self) -> tuple[slice, ...]:
        return tuple(slice(c, c + n) for n, c in zip(self.n_interior, self.n_collar))

    def period(self, axis: int) -> float:
        return self.upper[axis] - self.lower[axis]

    def same_as(self, other: "Grid") -> bool:
        return (
            self.dim == other.dim
            and self.shape == other.shape
            and self.periodic == other.periodic
            and math.isclose(self.h, other.h, rel_tol=1e-12)
            and all(math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12) for a, b in zip(self.lower, other.lower))
        )

    def container_weights(self, box: Sequence[tuple[float, float]] | None = None) -> np.ndarray:
        """Fraction of each node's cell lying inside the box ``box``.

        ``None`` selects the union of interior cells.  Periodic axes must span
        the full period and contribute a factor of one.
        """
        if box is None:
            return self.interior_mask().astype(float)
        if len(box) != self.dim:
            raise GridError(f"container has {len(box)} axes, grid has {self.dim}")
        mu = np.ones(self.shape)
        for a, (lo, hi) in enumerate(box):
            if hi <= lo:
                raise GridError(f"empty container along axis {a}: [{lo}, {hi}]")
            if self.periodic[a]:
                if not math.isclose(hi - lo, self.period(a), rel_tol=1e-9):
                    raise GridError(f"container must span the full period on periodic axis {a}")
                continue
            x = self.axis_coords(a)
            first, last = x[0] - self.h / 2, x[-1] + self.h / 2
            if lo < first - 1e-12 or hi > last + 1e-12:
                raise GridError(
                    f"container [{lo}, {hi}] exceeds the stored grid [{first}, {last}] along axis {a}"
                )
            frac = np.clip(np.minimum(x + self.h / 2, hi) - np.maximum(x - self.h / 2, lo), 0.0, None) / self.h
            shape = [1] * self.dim
            shape[a] = -1
            mu = mu * frac.reshape(shape)
        return mu


def build_grid(
    dimension: int,
    extent: Sequence[tuple[float, float]] | tuple[float, float],
    h: float,
    collar: float = 0.0,
    periodicity: Sequence[bool] | None = None,
) -> Grid:
    """Validate and build a :class:`Grid`.

    ``extent`` is one ``(lo, hi)`` pair per axis; a bare pair is broadcast to
    all axes.
    """
    if dimension not in (1, 2):
        raise GridError(f"dimension must be 1 or 2, got {dimension}")
    if not (h > 0 and math.isfinite(h)):
        raise GridError(f"spacing h must be positive, got {h}")
    if collar < 0:
        raise GridError(f"collar must be nonnegative, got {collar}")
    if len(extent) == 2 and not isinstance(extent[0], (tuple, list)):
        extent = [tuple(extent)] * dimension
    if len(extent) != dimension:
        raise GridError(f"extent has {len(extent)} axes, expected {dimension}")
    periodic = tuple(bool(p) for p in (periodicity or [False] * dimension))
    if len(periodic) != dimension:
        raise GridError("periodicity flags do not match the dimension")
    lower, upper = [], []
    for a, (lo, hi) in enumerate(extent):
        if not hi > lo:
            raise GridError(f"empty extent along axis {a}: [{lo}, {hi}]")
        k = _as_multiple(hi - lo, h, f"extent along axis {a}")
        n = k if periodic[a] else k + 1
        if n < 3:
            raise GridError(f"axis {a} has {n} interior nodes; at least 3 are required")
        lower.append(float(lo))
        upper.append(float(hi))
    if collar > 0:
        _as_multiple(collar, h, "collar")
    return Grid(dimension, tuple(lower), tuple(upper), float(h), float(collar), periodic)


@dataclass(frozen=True)
class Field:
    """Discrete function on the stored nodes of a grid plus far-field tails.

    ``tails[a]`` holds the constant value beyond the collar on the low and high
    side of non-periodic axis ``a`` (``None`` for periodic axes).
    """

    grid: Grid
    values: np.ndarray
    tails: tuple = ()
    exterior_rule: str = "constant"
    box: tuple[float, float] | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise GridError(f"values have shape {vals.shape}, grid expects {self.grid.shape}")
        bad = ~np.isfinite(vals)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise GridError(f"non-finite value at node {idx}")
        tails = self.tails
        if not tails:
            tails = tuple(None if p else (0.0, 0.0) for p in self.grid.periodic)
        tails = tuple(None if t is None else (float(t[0]), float(t[1])) for t in tails)
        if self.box is not None:
            lo, hi = self.box
            flat = [v for t in tails if t is not None for v in t]
            if vals.min() < lo - 1e-12 or vals.max() > hi + 1e-12 or any(v < lo - 1e-12 or v > hi + 1e-12 for v in flat):
                where = np.argwhere((vals < lo - 1e-12) | (vals > hi + 1e-12))
                node = tuple(int(i) for i in where[0]) if len(where) else "tail"
                raise GridError(f"value outside the box constraint [{lo}, {hi}] at node {node}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "tails", tails)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_slice()]

    def with_values(self, values: np.ndarray, **changes) -> "Field":
        kw = dict(grid=self.grid, values=values, tails=self.tails, exterior_rule=self.exterior_rule, box=self.box)
        kw.update(changes)
        return Field(**kw)

    def with_interior(self, interior: np.ndarray) -> "Field":
        vals = np.array(self.values)
        vals[self.grid.interior_slice()] = interior
        return self.with_values(vals)

    def map(self, fn: Callable[[np.ndarray], np.ndarray], box="keep") -> "Field":
        """Apply ``fn`` to every stored value and to the tail constants."""
        tails = tuple(None if t is None else tuple(float(fn(np.array(v))) for v in t) for t in self.tails)
        return Field(self.grid, fn(self.values), tails, self.exterior_rule, self.box if box == "keep" else box)


def constant_field(grid: Grid, value: float, box=None) -> Field:
    tails = tuple(None if p else (value, value) for p in grid.periodic)
    return Field(grid, np.full(grid.shape, float(value)), tails, "constant", box)


def sample_field(
    grid: Grid,
    fn: Callable[..., np.ndarray],
    tails: Sequence | None = None,
    box: tuple[float, float] | None = None,
    exterior_rule: str = "sampled",
) -> Field:
    """Evaluate ``fn`` at every stored node, collar included.

    Without explicit ``tails`` the far-field constants are the limits of the
    samples at the two ends of each non-periodic axis.
    """
    coords = grid.coords()
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(*coords), dtype=float)
    vals = np.broadcast_to(vals, grid.shape).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        x = tuple(float(c[idx]) for c in coords)
        raise GridError(f"non-finite sample at node {idx} (x = {x})")
    if tails is None:
        tails = []
        for a, p in enumerate(grid.periodic):
            if p:
                tails.append(None)
            else:
                lo = np.take(vals, 0, axis=a).mean()
                hi = np.take(vals, -1, axis=a).mean()
                tails.append((float(lo), float(hi)))
    return Field(grid, vals, tuple(tails), exterior_rule, box)


def lattice_shift(grid: Grid, k: Sequence[float]) -> tuple[int, ...]:
    """Node offsets for a translation vector ``k``; raises if incommensurate."""
    if len(k) != grid.dim:
        raise GridError(f"translation has {len(k)} components, grid has {grid.dim}")
    out = []
    for a, ka in enumerate(k):
        q = ka / grid.h
        n = int(round(q))
        if abs(q - n) > 1e-9 * max(1.0, abs(q)):
            raise GridError(f"translation component {ka} is not a multiple of h = {grid.h}")
        out.append(n)
    return tuple(out)


def shift_values(field: Field, shift: Sequence[int]) -> np.ndarray:
    """Values of ``u(x - k)`` on the stored nodes for a node offset ``shift``.

    Periodic axes wrap; nodes entering from beyond the stored band take the
    tail constant of the side they come from.
    """
    vals = field.values
    for a, n in enumerate(shift):
        if n == 0:
            continue
        if field.grid.periodic[a]:
            vals = np.roll(vals, n, axis=a)
            continue
        lo, hi = field.tails[a]
        size = vals.shape[a]
        out = np.empty_like(vals)
        src = np.arange(size) - n
        inside = (src >= 0) & (src < size)
        idx = [slice(None)] * vals.ndim
        idx[a] = np.nonzero(inside)[0]
        sidx = [slice(None)] * vals.ndim
        sidx[a] = src[inside]
        out[tuple(idx)] = vals[tuple(sidx)]
        idx[a] = np.nonzero(src < 0)[0]
        out[tuple(idx)] = lo
        idx[a] = np.nonzero(src >= size)[0]
        out[tuple(idx)] = hi
        vals = out
    return vals


def translate_field(field: Field, k: Sequence[float]) -> Field:
    """Return ``u(. - k)`` for a grid-commensurate vector ``k``."""
    shift = lattice_shift(field.grid, k)
    return field.with_values(shift_values(field, shift))


def field_to_csv(field: Field, path, interior_only: bool = False) -> None:
    """Write ``x[,y],u`` rows in row-major order."""
    g = field.grid
    coords = g.coords()
    vals = field.values
    if interior_only:
        sl = g.interior_slice()
        coords = tuple(c[sl] for c in coords)
        vals = vals[sl]
    names = ["x", "y"][: g.dim] + ["u"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*(c.ravel() for c in coords), vals.ravel()):
            w.writerow([repr(float(v)) for v in row])


def field_from_csv(grid: Grid, path, tails=None, box=None) -> Field:
    """Read a field written by :func:`field_to_csv` (full stored array)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    vals = data[:, -1].reshape(grid.shape)
    return Field(grid, vals, tails or (), "sampled", box)


@dataclass
class FieldArchive:
    """Versioned binary round trip for fields (``.npz``)."""

    version: int = 1
    extra: dict = dc_field(default_factory=dict)

    def save(self, field: Field, path) -> None:
        g = field.grid
        tails = np.array([[np.nan, np.nan] if t is None else t for t in field.tails], dtype=float)
        np.savez(
            path,
            version=self.version,
            dim=g.dim,
            lower=g.lower,
            upper=g.upper,
            h=g.h,
            collar=g.collar,
            periodic=np.array(g.periodic),
            values=field.values,
            tails=tails,
        )

    @staticmethod
    def load(path) -> Field:
        with np.load(path) as z:
            if int(z["version"]) != 1:
                raise GridError(f"unsupported field archive version {int(z['version'])}")
            g = Grid(
                int(z["dim"]),
                tuple(float(v) for v in z["lower"]),
                tuple(float(v) for v in z["upper"]),
                float(z["h"]),
                float(z["collar"]),
                tuple(bool(p) for p in z["periodic"]),
            )
            tails = tuple(None if np.isnan(t).any() else (float(t[0]), float(t[1])) for t in z["tails"])
            return Field(g, z["values"], tails, "sampled")
