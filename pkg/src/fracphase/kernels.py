"""Interaction kernel |y|^-(n+2s) and its discrete fractional Laplacian.

Weights are stored in physical units: ``w[m] ~ integral of K over the cell at
offset m``.  For a homogeneous (untruncated) kernel they scale exactly as
``h**(-2s)`` times an h-independent table, which makes the discrete energy obey
the continuum scaling law to rounding.

The self cell is handled by second-moment matching: the nearest-neighbour
weights absorb ``D / (2n)`` where ``D`` is the total mismatch between the
continuum second moment of K (self cell included) and the second moment of the
discrete weights.  This removes the O(h^(2-2s)) consistency error of plain
cell averaging.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import integrate, special

from .grid import Field, Grid, GridError


class KernelError(ValueError):
    """Invalid kernel parameters or operator/field mismatch."""


@dataclass(frozen=True)
class KernelSpec:
    s: float
    n: int = 1
    R: float = math.inf

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise KernelError(f"fractional order s must lie in (0, 1), got {self.s}")
        if self.n not in (1, 2):
            raise KernelError(f"dimension n must be 1 or 2, got {self.n}")
        if not self.R > 0:
            raise KernelError(f"truncation radius must be positive, got {self.R}")

    @property
    def truncated(self) -> bool:
        return math.isfinite(self.R)


def kernel_eval(spec: KernelSpec, y) -> float:
    """K(y) = |y|^-(n+2s) inside the truncation radius, 0 outside."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(y, dtype=float))))
    if r == 0.0:
        raise KernelError("the kernel is singular at y = 0 and is never evaluated there")
    if r > spec.R:
        return 0.0
    return r ** (-(spec.n + 2 * spec.s))


def normalizing_constant(n: int, s: float) -> float:
    """c_{n,s} such that c * p.v. int (u(x)-u(y)) K(x-y) dy has symbol |xi|^{2s}."""
    return s * 4.0**s * special.gamma(n / 2 + s) / (math.pi ** (n / 2) * special.gamma(1 - s))


def _ibeta_tail(x: np.ndarray, s: float) -> np.ndarray:
    """int_x^inf (1+v^2)^(-1-s) dv for x >= 0."""
    x = np.asarray(x, dtype=float)
    w = 1.0 / (1.0 + x * x)
    return 0.5 * special.betainc(s + 0.5, 0.5, w) * special.beta(s + 0.5, 0.5)


def line_integral(a, lo, s: float):
    """int_{lo}^inf (a^2 + t^2)^(-1-s) dt, for a >= 0 and lo > 0."""
    a = np.asarray(a, dtype=float)
    lo = np.asarray(lo, dtype=float)
    out = np.empty(np.broadcast(a, lo).shape)
    a_b, lo_b = np.broadcast_arrays(a, lo)
    zero = a_b == 0
    out[zero] = lo_b[zero] ** (-1 - 2 * s) / (1 + 2 * s)
    nz = ~zero
    out[nz] = a_b[nz] ** (-1 - 2 * s) * _ibeta_tail(lo_b[nz] / a_b[nz], s)
    return out


def reduced_constant(s: float) -> float:
    """int_R (1+v^2)^(-1-s) dv: integrating the 2D kernel over one coordinate."""
    return math.sqrt(math.pi) * special.gamma(s + 0.5) / special.gamma(s + 1)


# --------------------------------------------------------------------------
# 1D weight tables (units of h^-2s)


def _cell_integral_1d(s: float, a, b):
    return (np.power(a, -2 * s) - np.power(b, -2 * s)) / (2 * s)


def cell_weights_1d(s: float, rho: float, mmax: int) -> np.ndarray:
    """w[m], m = 0..mmax, for unit spacing; w[0] = 0; truncation at ``rho``."""
    m = np.arange(1, mmax + 1, dtype=float)
    a = np.minimum(m - 0.5, rho)
    b = np.minimum(m + 0.5, rho)
    w = np.zeros(mmax + 1)
    w[1:] = np.where(b > a, _cell_integral_1d(s, a, b), 0.0)
    return w


@lru_cache(maxsize=256)
def moment_correction_1d(s: float, rho: float) -> float:
    """Weight added to offsets +-1 so that second moments match the continuum."""
    self_cell = 2 * 0.5 ** (2 - 2 * s) / (2 - 2 * s)
    if math.isfinite(rho):
        mmax = int(math.ceil(rho + 0.5))
        m = np.arange(1, mmax + 1, dtype=float)
        a = np.minimum(m - 0.5, rho)
        b = np.minimum(m + 0.5, rho)
        second = np.where(b > a, (b ** (2 - 2 * s) - a ** (2 - 2 * s)) / (2 - 2 * s), 0.0)
        w = cell_weights_1d(s, rho, mmax)[1:]
        diff = np.sum(second - m * m * w)
        return 0.5 * (self_cell + 2 * diff)
    M = 4000
    m = np.arange(1, M + 1, dtype=float)
    second = ((m + 0.5) ** (2 - 2 * s) - (m - 0.5) ** (2 - 2 * s)) / (2 - 2 * s)
    w = _cell_integral_1d(s, m - 0.5, m + 0.5)
    diff = np.sum(second - m * m * w)
    # per-cell mismatch ~ -(1+4s)/12 m^(-1-2s) for large m
    diff += -(1 + 4 * s) / 12 * (M + 0.5) ** (-2 * s) / (2 * s)
    return 0.5 * (self_cell + 2 * diff)


def weights_1d(s: float, rho: float, mmax: int) -> np.ndarray:
    """Operator weights for offsets 0..mmax (unit spacing), correction included."""
    w = cell_weights_1d(s, rho, mmax)
    if mmax >= 1:
        w[1] += moment_correction_1d(s, rho)
    return w


@lru_cache(maxsize=64)
def _periodic_weights_1d_cached(s: float, rho: float, N: int) -> tuple:
    r = np.arange(N)
    out = np.zeros(N)
    if math.isfinite(rho):
        mmax = int(math.ceil(rho + 0.5))
        w = cell_weights_1d(s, rho, mmax)
        for m in range(1, mmax + 1):
            out[m % N] += w[m]
            out[(-m) % N] += w[m]
    else:
        out[1:] = _image_sum(s, N, r[1:]) + _image_sum(s, N, N - r[1:])
    c = moment_correction_1d(s, rho)
    out[1 % N] += c
    out[(-1) % N] += c
    out[0] = 0.0
    return tuple(out)


def _image_sum(s: float, N: int, r: np.ndarray, Q: int = 32) -> np.ndarray:
    """sum_{q>=0} cell weight at offset qN + r, by direct sum plus Euler-Maclaurin."""
    r = np.asarray(r, dtype=float)[:, None]
    q = np.arange(Q, dtype=float)[None, :]
    a, b = r - 0.5, r + 0.5
    head = _cell_integral_1d(s, q * N + a, q * N + b).sum(axis=1)
    za, zb = Q * N + a[:, 0], Q * N + b[:, 0]
    if abs(2 * s - 1) < 1e-15:
        integral = np.log(zb / za) / N
    else:
        integral = (zb ** (1 - 2 * s) - za ** (1 - 2 * s)) / ((1 - 2 * s) * 2 * s * N)
    g0 = _cell_integral_1d(s, za, zb)
    dg0 = N * (-(za ** (-1 - 2 * s)) + zb ** (-1 - 2 * s))
    return head + integral + g0 / 2 - dg0 / 12


def periodic_weights_1d(s: float, rho: float, N: int) -> np.ndarray:
    """Weights folded onto a periodic grid of N nodes (unit spacing)."""
    return np.array(_periodic_weights_1d_cached(float(s), float(rho), int(N)))


def tail_coefficient_1d(s: float, d, R: float = math.inf):
    """int_{|z| > d} one-sided K(z) dz (physical units), truncated at R."""
    d = np.asarray(d, dtype=float)
    val = np.power(d, -2 * s) / (2 * s)
    if math.isfinite(R):
        val = np.where(d < R, val - R ** (-2 * s) / (2 * s), 0.0)
    return val


# --------------------------------------------------------------------------
# 2D weight tables (units of h^-2s)

_GL4 = np.polynomial.legendre.leggauss(4)
_GL8 = np.polynomial.legendre.leggauss(8)


def _cell_quad_2d(f, cx, cy, rule):
    x, w = rule
    x = 0.5 * x
    w = 0.5 * w
    X = cx[..., None, None] + x[:, None]
    Y = cy[..., None, None] + x[None, :]
    W = w[:, None] * w[None, :]
    return np.sum(f(X, Y) * W, axis=(-1, -2))


def _subsampled_weight(s: float, rho: float, m1: int, m2: int, sub: int = 4) -> float:
    off = (np.arange(sub) + 0.5) / sub - 0.5
    X = m1 + off[:, None]
    Y = m2 + off[None, :]
    r = np.hypot(X, Y)
    K = np.where(r <= rho, r ** (-2 - 2 * s), 0.0)
    return float(K.sum() / sub**2)


@lru_cache(maxsize=128)
def moment_correction_2d(s: float, rho: float) -> float:
    """Weight added to the 4 nearest neighbours (second-moment matching)."""
    # self cell: int over [-1/2,1/2]^2 of |z|^-2s
    def radial(th):
        rmax = 0.5 / math.cos(th)
        if math.isfinite(rho):
            rmax = min(rmax, rho)
        return rmax ** (2 - 2 * s) / (2 - 2 * s)

    self_cell = 8 * integrate.quad(radial, 0, math.pi / 4, epsabs=1e-13, epsrel=1e-12)[0]
    Mmax = int(min(math.ceil(rho) + 1, 160)) if math.isfinite(rho) else 160
    rng = np.arange(-Mmax, Mmax + 1)
    C1, C2 = np.meshgrid(rng, rng, indexing="ij")
    keep = ~((C1 == 0) & (C2 == 0))
    c1 = C1[keep].astype(float)
    c2 = C2[keep].astype(float)

    def f(X, Y):
        r = np.hypot(X, Y)
        val = r ** (-2 * s)
        if math.isfinite(rho):
            val = np.where(r <= rho, val, 0.0)
        return val

    near = (np.abs(c1) <= 1) & (np.abs(c2) <= 1)
    second = np.empty_like(c1)
    second[near] = _cell_quad_2d(f, c1[near], c2[near], _GL8)
    second[~near] = _cell_quad_2d(f, c1[~near], c2[~near], _GL4)
    wts = np.empty_like(c1)
    for i in np.nonzero(near)[0]:
        wts[i] = _subsampled_weight(s, rho, int(c1[i]), int(c2[i]))
    r = np.hypot(c1[~near], c2[~near])
    wfar = r ** (-2 - 2 * s)
    if math.isfinite(rho):
        wfar = np.where(r <= rho, wfar, 0.0)
    wts[~near] = wfar
    D = self_cell + np.sum(second - (c1 * c1 + c2 * c2) * wts)
    if not math.isfinite(rho):
        # midpoint mismatch ~ (s^2/6) r^(-2-2s) outside the summed square
        reff = (2 * Mmax + 1) / math.sqrt(math.pi)
        D += math.pi * s * reff ** (-2 * s) / 6
    return D / 4


def cell_weights_2d(s: float, rho: float, m1: np.ndarray, m2: np.ndarray, corrected: bool = True) -> np.ndarray:
    """Weights on the outer product of integer offsets ``m1 x m2`` (unit spacing).

    Midpoint values except on the 8 cells around the singularity (4x4
    subsampling).  ``corrected`` adds the moment correction at the 4 nearest
    neighbours.  The zero offset carries weight 0.
    """
    M1, M2 = np.meshgrid(np.asarray(m1, float), np.asarray(m2, float), indexing="ij")
    r = np.hypot(M1, M2)
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r ** (-2 - 2 * s), 0.0)
    if math.isfinite(rho):
        w = np.where(r <= rho, w, 0.0)
    near = (np.abs(M1) <= 1) & (np.abs(M2) <= 1) & (r > 0)
    corr = moment_correction_2d(s, rho) if corrected else 0.0
    for idx in zip(*np.nonzero(near)):
        a, b = int(M1[idx]), int(M2[idx])
        w[idx] = _subsampled_weight(s, rho, a, b)
        if abs(a) + abs(b) == 1:
            w[idx] += corr
    return w


def _far_line_remainder(s: float, m1: np.ndarray, start: float) -> np.ndarray:
    """2 * int_start^inf (m1^2 + t^2)^(-1-s) dt (unit spacing)."""
    return 2.0 * line_integral(np.abs(m1), start, s)


def tail_coefficient_2d(s: float, d, R: float = math.inf):
    """Kernel mass of the half-plane at distance ``d`` (physical units)."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if not math.isfinite(R):
        return reduced_constant(s) * d ** (-2 * s) / (2 * s)
    out = np.zeros_like(d)
    for i, di in enumerate(d):
        if di >= R:
            continue

        def strip(t):
            top = math.sqrt(max(R * R - t * t, 0.0)) / t
            return 2 * t ** (-1 - 2 * s) * (0.5 * special.beta(s + 0.5, 0.5) - _ibeta_tail(top, s))

        out[i] = integrate.quad(strip, di, R, limit=200, epsabs=1e-14, epsrel=1e-11)[0]
    return out


def reduced_kernel_2d(s: float, tau: float, R: float = math.inf, width: float = math.inf) -> float:
    """int over sigma of K(tau, sigma), optionally restricted to |sigma| <= width."""
    lim = width
    if math.isfinite(R):
        if tau >= R:
            return 0.0
        lim = min(lim, math.sqrt(R * R - tau * tau))
    full = 0.5 * special.beta(s + 0.5, 0.5)
    if math.isfinite(lim):
        full = full - _ibeta_tail(lim / tau, s)
    return 2 * tau ** (-1 - 2 * s) * full


# --------------------------------------------------------------------------
# the operator


@dataclass
class NonlocalOperator:
    """Discrete interaction weights of a kernel on a grid.

    ``raw_apply`` evaluates ``sum_j w_ij (u_i - u_j) + tails`` (kernel
    normalization 1, the convention shared with the energy); ``apply_operator``
    rescales by :func:`normalizing_constant` so the symbol is |xi|^{2s}.
    """

    kernel: KernelSpec
    grid: Grid
    weights: np.ndarray
    tails: list
    constant: float
    tail_pair_constant: float = 0.0
    base_weights: np.ndarray | None = None
    info: dict = dc_field(default_factory=dict)
    _fft_shape: tuple = ()
    _kernel_hat: np.ndarray | None = None
    _row_sum: np.ndarray | None = None

    def __post_init__(self):
        g = self.grid
        fshape = []
        karr = self.weights
        for a in range(g.dim):
            n = g.shape[a]
            if g.periodic[a]:
                fshape.append(n)
            else:
                fshape.append(sfft.next_fast_len(2 * n - 1, real=True))
        # circular layout of offsets
        layout = np.zeros(fshape)
        idx = []
        for a in range(g.dim):
            n = g.shape[a]
            if g.periodic[a]:
                idx.append(np.arange(n))
            else:
                m = np.arange(-(n - 1), n)
                idx.append(m % fshape[a])
        layout[np.ix_(*idx)] = karr
        self._fft_shape = tuple(fshape)
        self._kernel_hat = sfft.rfftn(layout)
        self._row_sum = self.convolve(np.ones(g.shape))

    def convolve(self, arr: np.ndarray) -> np.ndarray:
        """sum_j w_{i-j} arr_j over the stored nodes."""
        g = self.grid
        out = sfft.irfftn(sfft.rfftn(arr, s=self._fft_shape) * self._kernel_hat, s=self._fft_shape)
        return out[tuple(slice(0, n) for n in g.shape)]

    @property
    def row_sum(self) -> np.ndarray:
        return self._row_sum

    def tail_sum(self) -> np.ndarray:
        """sum over tails of the per-node tail coefficient."""
        out = np.zeros(self.grid.shape)
        for T in self.tails:
            if T is not None:
                out = out + T[0] + T[1]
        return out

    def tail_terms(self, values: np.ndarray, tail_values) -> tuple[np.ndarray, np.ndarray]:
        """(sum_t T_t (u - c_t), sum_t T_t (u - c_t)^2) per node."""
        lin = np.zeros(self.grid.shape)
        quad = np.zeros(self.grid.shape)
        for T, c in zip(self.tails, tail_values):
            if T is None:
                continue
            for Tside, cside in zip(T, c):
                d = values - cside
                lin = lin + Tside * d
                quad = quad + Tside * d * d
        return lin, quad

    def raw_apply(self, field: Field) -> np.ndarray:
        if not self.grid.same_as(field.grid):
            raise KernelError("field and operator live on different grids")
        u = field.values
        lin, _ = self.tail_terms(u, field.tails)
        return self._row_sum * u - self.convolve(u) + lin

    def export_weights_csv(self, path) -> None:
        """Write ``offset, weight`` rows (1D) or ``offset0, offset1, weight`` (2D)."""
        g = self.grid
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            if g.dim == 1:
                wr.writerow(["offset", "weight"])
                n = g.shape[0]
                offs = np.arange(n) if g.periodic[0] else np.arange(-(n - 1), n)
                for o, w in zip(offs, self.weights):
                    wr.writerow([int(o), repr(float(w))])
            else:
                wr.writerow(["offset0", "offset1", "weight"])
                n0, n1 = g.shape
                o0 = np.arange(n0) if g.periodic[0] else np.arange(-(n0 - 1), n0)
                o1 = np.arange(n1) if g.periodic[1] else np.arange(-(n1 - 1), n1)
                for i, a in enumerate(o0):
                    for j, b in enumerate(o1):
                        wr.writerow([int(a), int(b), repr(float(self.weights[i, j]))])


def _check_truncation(spec: KernelSpec, grid: Grid):
    if spec.truncated and spec.R < 10 * grid.h - 1e-12:
        raise KernelError(f"truncation radius R = {spec.R} is below 10 h = {10 * grid.h}")
    if spec.n != grid.dim:
        raise KernelError(f"kernel dimension {spec.n} does not match grid dimension {grid.dim}")


def _assemble_1d(spec: KernelSpec, grid: Grid) -> NonlocalOperator:
    s, h = spec.s, grid.h
    rho = spec.R / h
    scale = h ** (-2 * s)
    n = grid.shape[0]
    if grid.periodic[0]:
        w = periodic_weights_1d(s, rho, n) * scale
        return NonlocalOperator(spec, grid, w, [None], normalizing_constant(1, s))
    half = weights_1d(s, rho, n - 1) * scale
    w = np.concatenate([half[:0:-1], half])
    x = grid.axis_coords(0)
    d_lo = (x - x[0]) + h / 2
    d_hi = (x[-1] - x) + h / 2
    T = (tail_coefficient_1d(s, d_lo, spec.R), tail_coefficient_1d(s, d_hi, spec.R))
    return NonlocalOperator(spec, grid, w, [T], normalizing_constant(1, s))


def image_count(spec: KernelSpec, period: float) -> int:
    """Number of periodic images summed on each side: max(R, 20 periods)."""
    reach = max(spec.R if spec.truncated else 0.0, 20 * period)
    return int(math.ceil(reach / period))


def _assemble_2d(spec: KernelSpec, grid: Grid) -> NonlocalOperator:
    s, h = spec.s, grid.h
    rho = spec.R / h
    scale = h ** (-2 * s)
    n0, n1 = grid.shape
    if grid.periodic[0] or not grid.periodic[1]:
        if not (not grid.periodic[0] and not grid.periodic[1] and spec.truncated and spec.R <= grid.collar + 1e-12):
            raise KernelError(
                "2D operators need axis 0 non-periodic and axis 1 periodic, "
                "or a kernel truncated within the collar"
            )
        m0 = np.arange(-(n0 - 1), n0)
        m1 = np.arange(-(n1 - 1), n1)
        w = cell_weights_2d(s, rho, m0, m1) * scale
        return NonlocalOperator(spec, grid, w, [None, None], normalizing_constant(2, s), base_weights=w)
    P = grid.period(1)
    Q = image_count(spec, P)
    m0 = np.arange(-(n0 - 1), n0)
    m1 = np.arange(-(Q * n1 + n1 - 1), Q * n1 + n1)
    full = cell_weights_2d(s, rho, m0, m1)
    # fold images onto one period
    folded = np.zeros((2 * n0 - 1, n1))
    for j, off in enumerate(m1):
        folded[:, off % n1] += full[:, j]
    # kernel mass beyond the summed images, spread evenly over the period
    if not spec.truncated:
        rem = _far_line_remainder(s, m0, (Q + 1) * n1 - 0.5)
        folded += (rem / n1)[:, None]
    centre = Q * n1 + n1 - 1
    base = full[:, centre - (n1 - 1): centre + n1]
    x = grid.axis_coords(0)
    d_lo = (x - x[0]) + h / 2
    d_hi = (x[-1] - x) + h / 2
    Tlo = tail_coefficient_2d(s, d_lo, spec.R)[:, None] * np.ones((1, n1))
    Thi = tail_coefficient_2d(s, d_hi, spec.R)[:, None] * np.ones((1, n1))
    op = NonlocalOperator(
        spec,
        grid,
        folded * scale,
        [(Tlo, Thi), None],
        normalizing_constant(2, s),
        tail_pair_constant=_tail_pair_constant_2d(spec, n0 * h, P),
        base_weights=base * scale,
        info={"images": Q},
    )
    return op


def _tail_pair_constant_2d(spec: KernelSpec, gap: float, period: float) -> float:
    """int over (left tail in one period) x (right tail, all sigma) of K, per unit squared jump."""
    s = spec.s
    if not spec.truncated:
        if s <= 0.5:
            return math.inf
        return period * reduced_constant(s) * gap ** (1 - 2 * s) / ((2 * s - 1) * 2 * s)
    if gap >= spec.R:
        return 0.0
    val = integrate.quad(lambda t: (t - gap) * reduced_kernel_2d(s, t, spec.R), gap, spec.R, limit=200)[0]
    return period * val


def assemble_operator(spec: KernelSpec, grid: Grid) -> NonlocalOperator:
    """Build the discrete operator of ``spec`` on ``grid``."""
    _check_truncation(spec, grid)
    if grid.dim == 1:
        return _assemble_1d(spec, grid)
    return _assemble_2d(spec, grid)


def apply_operator(op: NonlocalOperator, field: Field) -> Field:
    """(-Delta)^s u at every stored node, tails included, symbol |xi|^{2s}."""
    vals = op.constant * op.raw_apply(field)
    return Field(field.grid, vals, tuple(None if t is None else (0.0, 0.0) for t in field.tails), "derived")


def spectral_apply(field: Field, s: float) -> Field:
    """Fourier multiplier |2 pi k / L|^{2s} on a periodic 1D field."""
    g = field.grid
    if g.dim != 1 or not g.periodic[0]:
        raise KernelError("spectral_apply needs a periodic 1D field")
    if not (0 < s < 1):
        raise KernelError(f"fractional order s must lie in (0, 1), got {s}")
    n = g.shape[0]
    L = g.period(0)
    k = sfft.fftfreq(n, d=1.0 / n)
    mult = np.abs(2 * np.pi * k / L) ** (2 * s)
    vals = sfft.ifft(sfft.fft(field.values) * mult).real
    return Field(g, vals, (None,), "derived")


def discrete_symbol(op: NonlocalOperator) -> np.ndarray:
    """Normalized symbol of a periodic 1D operator at the discrete frequencies."""
    g = op.grid
    if g.dim != 1 or not g.periodic[0]:
        raise KernelError("the discrete symbol is defined for periodic 1D operators")
    return op.constant * np.real(op.row_sum[0] - sfft.fft(op.weights))
