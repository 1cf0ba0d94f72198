"""Plane-like minimizers in a periodic two-dimensional medium.

Space is quotiented by the lattice vector ``k0 = tau (-p2, p1)`` orthogonal to
the rational direction ``omega ~ p``.  The quotient is a cylinder with
coordinates ``t = omega . x / |omega|`` (non-periodic, axis 0) and a transverse
coordinate of period ``tau |p|`` (axis 1).  The spacing is ``tau |p| / N`` with
``N`` a multiple of ``|p|^2``; then every lattice translation moves nodes onto
nodes and the checkerboard is evaluated in exact integer arithmetic.

Admissible functions satisfy ``u >= 9/10`` for ``t <= 0`` and ``u <= -9/10``
for ``t >= M``.  The stored band covers ``[-pad, M + pad]`` and the field is
exactly +1 below and -1 above it.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .energy import EnergyBreakdown, EnergyError, EnergyProblem, Modulation, Potential, double_well, operator_for
from .grid import Field, build_grid, field_to_csv, shift_values
from .kernels import KernelSpec, line_integral, normalizing_constant
from .minimize import MinimizeError, MinimizeOptions, minimize, pointwise_min_of_runs

log = logging.getLogger(__name__)

THRESHOLD = 0.9


class PlanelikeError(ValueError):
    pass


# --------------------------------------------------------------------------
# directions and geometry


@dataclass(frozen=True)
class DirectionSpec:
    """A direction omega; rational ones carry the primitive integer vector ``p``."""

    omega: tuple
    tau: float = 1.0
    p: tuple | None = None

    def __post_init__(self):
        if len(self.omega) != 2 or math.hypot(*self.omega) == 0:
            raise PlanelikeError("omega must be a nonzero 2-vector")
        if self.tau < 1:
            raise PlanelikeError("tau must be at least 1")
        if self.p is not None and math.gcd(*self.p) != 1:
            raise PlanelikeError(f"{self.p} is not primitive")

    @property
    def rational(self) -> bool:
        return self.p is not None

    @classmethod
    def of(cls, omega, tau: float = 1.0) -> "DirectionSpec":
        """Rational if both components are integers (reduced to a primitive vector)."""
        omega = tuple(float(c) for c in omega)
        if all(float(c).is_integer() for c in omega):
            a, b = (int(c) for c in omega)
            g = math.gcd(a, b)
            return cls(omega, tau, (a // g, b // g))
        return cls(omega, tau, None)


@dataclass(frozen=True)
class QuotientGeometry:
    direction: DirectionSpec
    M: float
    pad: float
    n_sigma: int
    i_lo: int  # t index of the first stored row (t = i * h)
    i_hi: int
    cells: int = 1

    @property
    def p(self) -> tuple:
        return self.direction.p

    @property
    def tau(self) -> float:
        return self.direction.tau

    @property
    def norm2(self) -> int:
        return self.p[0] ** 2 + self.p[1] ** 2

    @property
    def k0(self) -> tuple:
        """Primitive lattice period (times ``cells``) orthogonal to omega."""
        return (-self.cells * self.tau * self.p[1], self.cells * self.tau * self.p[0])

    @property
    def period(self) -> float:
        return self.cells * self.tau * math.sqrt(self.norm2)

    @property
    def h(self) -> float:
        return self.period / self.n_sigma

    @property
    def e_par(self) -> np.ndarray:
        return np.array(self.p, float) / math.sqrt(self.norm2)

    @property
    def e_perp(self) -> np.ndarray:
        return np.array([-self.p[1], self.p[0]], float) / math.sqrt(self.norm2)

    @property
    def grid(self):
        return build_grid(2, [(self.i_lo * self.h, self.i_hi * self.h), (0.0, self.period)], self.h,
                          periodicity=(False, True))

    @property
    def cell_area(self) -> float:
        return self.period * (self.M + 2 * self.pad)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.i_lo, self.i_hi + 1) * self.h

    def row_index(self) -> np.ndarray:
        return np.arange(self.i_lo, self.i_hi + 1)

    def plane_coords(self) -> tuple[np.ndarray, np.ndarray]:
        T, S = np.meshgrid(self.t, np.arange(self.n_sigma) * self.h, indexing="ij")
        return T * self.e_par[0] + S * self.e_perp[0], T * self.e_par[1] + S * self.e_perp[1]

    def lattice_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer indices of the half-period square containing each node (exact)."""
        I, J = np.meshgrid(self.row_index(), np.arange(self.n_sigma), indexing="ij")
        # x / tau = (I p1 - J p2, I p2 + J p1) / (n_sigma / cells)
        den = self.n_sigma // self.cells
        p1, p2 = self.p
        return np.floor_divide(2 * (I * p1 - J * p2), den), np.floor_divide(2 * (I * p2 + J * p1), den)

    def q_values(self, modulation: Modulation | None) -> np.ndarray:
        shape = (self.i_hi - self.i_lo + 1, self.n_sigma)
        if modulation is None:
            return np.ones(shape)
        if modulation.kind == "constant":
            return np.full(shape, modulation.value)
        if modulation.kind == "lattice_periodic" and modulation.fn is None:
            if not math.isclose(modulation.tau, self.tau):
                raise PlanelikeError("the medium and the geometry use different lattice scales")
            c1, c2 = self.lattice_cells()
            return modulation.from_cells(c1 + c2)
        return np.asarray(modulation(*self.plane_coords()), float)

    def node_shift(self, k: Sequence[int]) -> tuple[int, int]:
        """Node offsets of the translation by tau * k (k integer)."""
        a, b = k
        p1, p2 = self.p
        den = self.norm2 * self.cells
        di, rem_i = divmod((a * p1 + b * p2) * self.n_sigma, den)
        dj, rem_j = divmod((-a * p2 + b * p1) * self.n_sigma, den)
        if rem_i or rem_j:
            raise PlanelikeError(f"translation {k} does not map nodes to nodes")
        return int(di), int(dj) % self.n_sigma

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        t = self.t[:, None] * np.ones((1, self.n_sigma))
        lo = np.where(self.row_index()[:, None] <= 0, THRESHOLD, -1.0) * np.ones_like(t)
        hi = np.where(t >= self.M - 1e-12, -THRESHOLD, 1.0) * np.ones_like(t)
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "p": list(self.p),
            "tau": self.tau,
            "M": self.M,
            "pad": self.pad,
            "h": self.h,
            "n_sigma": self.n_sigma,
            "rows": self.i_hi - self.i_lo + 1,
            "k0": list(self.k0),
            "period": self.period,
            "cells": self.cells,
        }


def build_quotient(direction: DirectionSpec, M: float, pad: float | None = None, h: float = 0.1,
                   cells: int = 1) -> QuotientGeometry:
    """Quotient cylinder for a rational direction with spacing at most ``h``."""
    if not direction.rational:
        raise PlanelikeError("irrational direction: use irrational_limit")
    if not M > 0:
        raise PlanelikeError("M must be positive")
    tau = direction.tau
    pad = 2 * tau if pad is None else pad
    n2 = direction.p[0] ** 2 + direction.p[1] ** 2
    P = tau * math.sqrt(n2)
    per = math.ceil(P / h / n2 - 1e-9) * n2  # nodes per primitive period
    hh = P / per
    i_lo = -math.ceil(pad / hh - 1e-9)
    i_hi = math.ceil((M + pad) / hh - 1e-9)
    return QuotientGeometry(direction, float(M), float(pad), per * cells, i_lo, i_hi, cells)


def admissible_project(field: Field, geom: QuotientGeometry) -> Field:
    """Clamp to u >= 9/10 where t <= 0 and u <= -9/10 where t >= M."""
    v = np.array(field.values)
    rows = geom.row_index()
    low = rows <= 0
    high = geom.t >= geom.M - 1e-12
    v[low] = np.maximum(v[low], THRESHOLD)
    v[high] = np.minimum(v[high], -THRESHOLD)
    return field.with_values(v)


def lowest_admissible(geom: QuotientGeometry) -> Field:
    """The smallest admissible function with values in [-1, 1]."""
    lo, _ = geom.bounds()
    return Field(geom.grid, lo, ((1.0, -1.0), None), "constant")


def centred_admissible(geom: QuotientGeometry, width: float = 1.0) -> Field:
    """Admissible profile -tanh((t - M/2) / width), clipped to the bounds."""
    lo, hi = geom.bounds()
    prof = -np.tanh((geom.t - geom.M / 2) / width)[:, None] * np.ones((1, geom.n_sigma))
    return Field(geom.grid, np.clip(prof, lo, hi), ((1.0, -1.0), None), "constant")


def _check_kernel(kernel: KernelSpec, geom: QuotientGeometry):
    if kernel.n != 2:
        raise PlanelikeError("plane-like minimizers use a 2D kernel")
    if not kernel.truncated and kernel.s <= 0.5:
        raise PlanelikeError("the auxiliary functional needs s > 1/2 or a truncated kernel")


def F_problem(geom: QuotientGeometry, kernel: KernelSpec, potential: Potential, modulation: Modulation | None,
              base: Field | None = None, normalized: bool = True) -> EnergyProblem:
    """F over the admissible class.

    With ``normalized`` the interaction carries the weight c_{2,s}/2, so the
    nodal residual is that of (-Delta)^s u + Q W'(u) = 0 with the standard
    fractional Laplacian; otherwise F itself (kernel constant 1) is minimized.
    """
    _check_kernel(kernel, geom)
    g = geom.grid
    base = base or lowest_admissible(geom)
    lo, hi = geom.bounds()
    op = operator_for(kernel, g)
    return EnergyProblem(op, potential, base, q_values=geom.q_values(modulation), mu=np.ones(g.shape),
                         free=np.ones(g.shape, bool), lower=lo, upper=hi, tail_pairs=True,
                         kin_coef=0.5 * normalizing_constant(2, kernel.s) if normalized else 1.0)


# --------------------------------------------------------------------------
# results and checks


@dataclass
class PlanelikeResult:
    field: Field
    geometry: QuotientGeometry
    energy: EnergyBreakdown
    restart_energies: list
    residual: float
    converged: bool
    interface_t: tuple  # (min t, max t) of {|u| < 9/10}
    unconstrained: bool
    birkhoff: dict | None = None
    doubling: dict | None = None
    dominance: float = 0.0
    excluded_runs: int = 0
    kernel: KernelSpec | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.interface_t[1] - self.interface_t[0]

    def to_dict(self) -> dict:
        d = {
            "geometry": self.geometry.to_dict(),
            "F": self.energy.total,
            "energy": self.energy.to_dict(),
            "restart_energies": list(self.restart_energies),
            "residual": self.residual,
            "converged": self.converged,
            "interface_t": list(self.interface_t),
            "width": self.width,
            "unconstrained": self.unconstrained,
            "dominance_violation": self.dominance,
            "excluded_runs": self.excluded_runs,
        }
        if self.birkhoff is not None:
            d["birkhoff"] = self.birkhoff
        if self.doubling is not None:
            d["doubling"] = self.doubling
        d.update(self.meta)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def interface_extent(field: Field, geom: QuotientGeometry) -> tuple[float, float]:
    mask = np.abs(field.values) < THRESHOLD
    if not mask.any():
        return (0.0, 0.0)
    rows = np.nonzero(mask.any(axis=1))[0]
    t = geom.t
    return float(t[rows[0]]), float(t[rows[-1]])


def is_unconstrained(field: Field, geom: QuotientGeometry) -> bool:
    """Does u reach -9/10 somewhere with t < M - 2 tau?"""
    rows = geom.t < geom.M - 2 * geom.tau
    return bool(np.any(field.values[rows] <= -THRESHOLD))


def minimize_F(
    geom: QuotientGeometry,
    modulation: Modulation | None,
    kernel: KernelSpec,
    potential: Potential | None = None,
    options: MinimizeOptions | None = None,
    birkhoff: bool = True,
    start: str = "centred",
) -> PlanelikeResult:
    """Minimal-minimizer surrogate of F over the admissible class.

    Restarts begin at ``start`` (a centred tanh profile or the lowest
    admissible function) and at seeded perturbations of it; the runs whose
    energy clusters around the best are combined by a pointwise minimum and
    minimized once more.
    """
    potential = potential or double_well()
    opts = options or MinimizeOptions(max_iterations=20000, restarts=4)
    prob = F_problem(geom, kernel, potential, modulation)
    if start not in ("centred", "lowest"):
        raise PlanelikeError(f"unknown start {start!r}")
    start = centred_admissible(geom) if start == "centred" else lowest_admissible(geom)
    rep = minimize(start, prob, MinimizeOptions(
        max_iterations=opts.max_iterations, gradient_tolerance=opts.gradient_tolerance,
        restarts=opts.restarts, seed=opts.seed, perturbation=opts.perturbation, workers=opts.workers))
    runs = [r for r in rep.runs if r.converged] or [rep]
    best = min(r.energy for r in runs)
    tol = 1e-6 * max(abs(best), 1.0)
    cluster = [r for r in runs if r.energy - best <= tol]
    low = pointwise_min_of_runs(cluster) if all(r.converged for r in cluster) else rep.field
    final = minimize(low, prob, MinimizeOptions(max_iterations=opts.max_iterations,
                                                gradient_tolerance=opts.gradient_tolerance))
    u = final.field
    dominance = max(float(np.max(u.values - r.field.values)) for r in cluster)
    res = PlanelikeResult(
        field=u,
        geometry=geom,
        energy=prob.breakdown_full(u.values),
        restart_energies=[r.energy for r in rep.runs],
        residual=final.residual,
        converged=final.converged,
        interface_t=interface_extent(u, geom),
        unconstrained=is_unconstrained(u, geom),
        dominance=dominance,
        excluded_runs=len(rep.runs) - len(cluster),
        kernel=kernel,
    )
    if birkhoff:
        res.birkhoff = check_birkhoff(res, geom)
    return res


def check_birkhoff(result: PlanelikeResult, geom: QuotientGeometry, radius: float = 3.0, tol: float = 1e-7) -> dict:
    """Ordering of u against its lattice translates tau k with |k| <= radius.

    The profile decreases in t, so for omega . k > 0 the translate u(. - tau k)
    must lie above u, and below it for omega . k < 0.
    """
    u = result.field
    rows = []
    worst = 0.0
    r = int(math.floor(radius))
    p1, p2 = geom.p
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            if (a, b) == (0, 0) or a * a + b * b > radius * radius + 1e-12:
                continue
            di, dj = geom.node_shift((a, b))
            tv = shift_values(u, (di, dj))
            dot = a * p1 + b * p2
            if dot > 0:
                viol = float(np.max(u.values - tv))
            elif dot < 0:
                viol = float(np.max(tv - u.values))
            else:
                viol = float(np.max(np.abs(tv - u.values)))
            viol = max(viol, 0.0)
            worst = max(worst, viol)
            rows.append({"k": [a, b], "omega_dot_k": dot, "violation": viol, "ok": viol <= tol})
    return {"worst": worst, "tolerance": tol, "ok": worst <= tol, "translates": rows}


def check_doubling(result: PlanelikeResult, geom: QuotientGeometry, m: int, modulation: Modulation | None,
                   potential: Potential | None = None, options: MinimizeOptions | None = None) -> dict:
    """Re-minimize on the m-fold transverse cell starting from the m-fold tiling."""
    if m not in (1, 2, 3):
        raise PlanelikeError("doubling multiple must be 1, 2 or 3")
    potential = potential or double_well()
    if m == 1:
        return {"m": 1, "energy_difference_per_cell": 0.0, "sup_distance": 0.0}
    big = build_quotient(geom.direction, geom.M, geom.pad, geom.h * (1 + 1e-12), cells=m)
    if big.n_sigma != m * geom.n_sigma or big.i_lo != geom.i_lo:
        raise PlanelikeError("m-fold geometry does not tile the base cell")
    tiled = Field(big.grid, np.tile(result.field.values, (1, m)), ((1.0, -1.0), None), "constant")
    prob = F_problem(big, result.kernel, potential, modulation, base=tiled)
    e_tiled = prob.breakdown_full(tiled.values).total
    rep = minimize(tiled, prob, options or MinimizeOptions(max_iterations=20000))
    e_new = rep.energy
    out = {
        "m": m,
        "energy_difference_per_cell": float((e_new - e_tiled) / m),
        "tiling_vs_cell": float(e_tiled / m - result.energy.total),
        "sup_distance": float(np.max(np.abs(rep.field.values - tiled.values))),
        "converged": rep.converged,
    }
    result.doubling = out
    return out


# --------------------------------------------------------------------------
# the energy identity


def _own_conv(arr: np.ndarray, base: np.ndarray) -> np.ndarray:
    return fftconvolve(arr, base, mode="same")


def _own_tail(geom: QuotientGeometry, kernel: KernelSpec, d: np.ndarray, npts: int = 8) -> np.ndarray:
    """Kernel mass of a half-cylinder tail restricted to the own period, per node."""
    s, R = kernel.s, kernel.R
    n1, h = geom.n_sigma, geom.h
    xg, wg = np.polynomial.legendre.leggauss(npts)
    # quadrature nodes over sigma' in [0, P)
    sp = ((np.arange(n1)[:, None] + 0.5 * (xg[None, :] + 1)) * h).ravel()
    ws = np.tile(0.5 * h * wg, n1)
    sig = np.arange(n1) * h
    a = np.abs(sig[:, None] - sp[None, :])  # (n1, nq)
    out = np.empty((d.size, n1))
    for i, di in enumerate(d):
        vals = line_integral(a, di, s)
        if kernel.truncated:
            top2 = R * R - a * a
            top = np.sqrt(np.maximum(top2, 0.0))
            cut = top > di
            vals = np.where(cut, vals - line_integral(a, np.where(cut, top, di), s), 0.0)
        out[i] = vals @ ws
    return out


def _own_tail_pairs(geom: QuotientGeometry, kernel: KernelSpec) -> float:
    """int over (lower tail x upper tail), both within one period, of K, per unit squared jump."""
    s, R, P = kernel.s, kernel.R, geom.period
    g = (geom.i_hi - geom.i_lo + 1) * geom.h
    if kernel.truncated and g >= R:
        return 0.0

    def F(delta):
        a = abs(delta)
        if kernel.truncated:
            if g * g + a * a >= R * R:
                return 0.0
            D = math.sqrt(R * R - a * a)
            return ((g * g + a * a) ** -s - R ** (-2 * s)) / (2 * s) - g * float(
                line_integral(a, g, s) - line_integral(a, D, s))
        return (g * g + a * a) ** -s / (2 * s) - g * float(line_integral(a, g, s))

    return integrate.quad(lambda dl: (P - dl) * F(dl), 0.0, P, limit=200)[0] * 2


def quotient_energy(v: np.ndarray, u: Field, geom: QuotientGeometry, kernel: KernelSpec,
                    potential: Potential, modulation: Modulation | None) -> float:
    """E(v; one period) with v on the own period and the periodic u everywhere else."""
    g = u.grid
    op = operator_for(kernel, g)
    hn = g.cell_volume
    B = op.base_weights
    conv_own = lambda a: _own_conv(a, B)
    conv_img = lambda a: op.convolve(a) - conv_own(a)
    ones = np.ones(g.shape)
    rs_own = conv_own(ones)
    own = np.sum(v * v * rs_own - v * conv_own(v))  # 1/2 sum B (v_i - v_j)^2
    uu = u.values
    img = np.sum(v * v * conv_img(ones) - 2 * v * conv_img(uu) + conv_img(uu * uu))
    _, quad_v = op.tail_terms(v, u.tails)
    _, quad_u = op.tail_terms(uu, u.tails)
    x = g.axis_coords(0)
    T_own_lo = _own_tail(geom, kernel, (x - x[0]) + g.h / 2)
    T_own_hi = _own_tail(geom, kernel, (x[-1] - x) + g.h / 2)
    (Tlo, Thi), _ = op.tails
    (clo, chi), _ = u.tails
    other = (Tlo - T_own_lo) * (uu - clo) ** 2 + (Thi - T_own_hi) * (uu - chi) ** 2
    I_all = op.tail_pair_constant
    I_own = _own_tail_pairs(geom, kernel)
    # own-period tail pairs count once, pairs with other periods twice
    const = (clo - chi) ** 2 * (I_own + 2 * (I_all - I_own))
    pot = np.sum(geom.q_values(modulation) * potential.value(v))
    return float(hn * (own + img + np.sum(quad_v) + np.sum(other) + pot) + const)


def auxiliary_F(w: np.ndarray, u: Field, geom: QuotientGeometry, kernel: KernelSpec, potential: Potential,
                modulation: Modulation | None) -> float:
    prob = F_problem(geom, kernel, potential, modulation, base=u, normalized=False)
    return prob.breakdown_full(w).total


def verify_energy_identity(u: Field, phi: np.ndarray, geom: QuotientGeometry, kernel: KernelSpec,
                           potential: Potential | None = None, modulation: Modulation | None = None):
    """Both sides of the perturbation identity relating E(.; one period) and F."""
    potential = potential or double_well()
    phi = np.asarray(phi, float)
    rows = np.nonzero(np.any(phi != 0, axis=1))[0]
    if rows.size:
        t = geom.t
        if t[rows[0]] <= 0 or t[rows[-1]] >= geom.M:
            raise PlanelikeError("phi must be supported strictly inside the strip 0 < t < M")
    uu = u.values
    E1 = quotient_energy(uu + phi, u, geom, kernel, potential, modulation)
    F1 = auxiliary_F(uu + phi, u, geom, kernel, potential, modulation)
    E0 = quotient_energy(uu, u, geom, kernel, potential, modulation)
    F0 = auxiliary_F(uu, u, geom, kernel, potential, modulation)
    lhs = (E1 - F1) - (E0 - F0)
    op = operator_for(kernel, u.grid)
    cross = op.convolve(phi) - _own_conv(phi, op.base_weights)
    rhs = float(u.grid.cell_volume * np.sum(phi * cross))
    return lhs, rhs


# --------------------------------------------------------------------------
# scans


@dataclass
class M0Report:
    M0: float | None
    per_direction: dict
    schedule: list
    results: dict

    @property
    def spread_steps(self) -> int | None:
        idx = [self.schedule.index(m) for m in self.per_direction.values() if m is not None]
        if len(idx) < len(self.per_direction):
            return None
        return max(idx) - min(idx)

    def to_dict(self) -> dict:
        return {
            "M0": self.M0 if self.M0 is not None else "exceeds schedule",
            "per_direction": {k: v for k, v in self.per_direction.items()},
            "schedule": self.schedule,
            "spread_steps": self.spread_steps,
        }


def estimate_M0(directions: Sequence[DirectionSpec], schedule: Sequence[float], modulation: Modulation | None,
                kernel: KernelSpec, h: float = 0.1, potential: Potential | None = None,
                options: MinimizeOptions | None = None) -> M0Report:
    """Smallest M / tau in the schedule at which every direction is unconstrained."""
    schedule = [float(m) for m in schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise PlanelikeError("M schedule must increase")
    per = {}
    results = {}
    for d in directions:
        key = f"{d.p[0]},{d.p[1]}"
        per[key] = None
        for M in schedule:
            geom = build_quotient(d, M * d.tau, h=h)
            res = minimize_F(geom, modulation, kernel, potential, options)
            results[(key, M)] = res
            if res.unconstrained:
                per[key] = M
                break
    found = [m for m in per.values() if m is not None]
    M0 = max(found) if len(found) == len(per) else None
    return M0Report(M0, per, schedule, results)


def continued_fraction(x: float, depth: int) -> list[int]:
    out = []
    for _ in range(depth):
        a = math.floor(x)
        out.append(a)
        frac = x - a
        if frac < 1e-12:
            break
        x = 1.0 / frac
    return out


def convergents(cf: Sequence[int]) -> list[Fraction]:
    hm, hp = 1, cf[0]
    km, kp = 0, 1
    out = [Fraction(hp, kp)]
    for a in cf[1:]:
        hm, hp = hp, a * hp + hm
        km, kp = kp, a * kp + km
        out.append(Fraction(hp, kp))
    return out


def sample_plane(field: Field, geom: QuotientGeometry, pts: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a quotient field at plane points (N, 2)."""
    t = pts @ geom.e_par
    sig = np.mod(pts @ geom.e_perp, geom.period)
    fi = (t - geom.i_lo * geom.h) / geom.h
    fj = sig / geom.h
    n0, n1 = field.values.shape
    i0 = np.clip(np.floor(fi).astype(int), 0, n0 - 2)
    j0 = np.floor(fj).astype(int) % n1
    j1 = (j0 + 1) % n1
    a = np.clip(fi - i0, 0, 1)
    b = fj - np.floor(fj)
    v = field.values
    return ((1 - a) * (1 - b) * v[i0, j0] + (1 - a) * b * v[i0, j1] + a * (1 - b) * v[i0 + 1, j0]
            + a * b * v[i0 + 1, j1])


def irrational_limit(omega, tau: float, depth: int, M: float, modulation: Modulation | None, kernel: KernelSpec,
                     h: float = 0.1, budget: int = 40, window: float = 1.0, potential: Potential | None = None,
                     options: MinimizeOptions | None = None) -> dict:
    """Plane-like minimizers along the continued-fraction convergents of the slope."""
    d = DirectionSpec.of(omega, tau)
    if d.rational:
        raise PlanelikeError("rational direction: use build_quotient and minimize_F")
    if depth < 2:
        raise PlanelikeError("depth must be at least 2")
    w1, w2 = d.omega
    if w1 <= 0:
        raise PlanelikeError("irrational_limit expects omega with a positive first component")
    slope = w2 / w1
    convs = convergents(continued_fraction(slope, depth))
    results = []
    dist = []
    prev = None
    # points of a fixed window around the plane point at the middle of the strip
    g1 = np.linspace(-window, window, 9)
    base = np.stack(np.meshgrid(g1, g1, indexing="ij"), -1).reshape(-1, 2)
    reached = 0
    for c in convs:
        p = (c.denominator, c.numerator)
        if p[0] ** 2 + p[1] ** 2 > budget:
            log.info("convergent %s exceeds the size budget; stopping", c)
            break
        geom = build_quotient(DirectionSpec.of(p, tau), M, h=h)
        res = minimize_F(geom, modulation, kernel, potential, options, birkhoff=False)
        centre = np.array(d.omega) / math.hypot(*d.omega) * (M / 2)
        vals = sample_plane(res.field, geom, base + centre)
        if prev is not None:
            dist.append(float(np.max(np.abs(vals - prev))))
        prev = vals
        results.append((p, res))
        reached += 1
    return {
        "convergents": [f"{c.numerator}/{c.denominator}" for c in convs],
        "depth_reached": reached,
        "results": results,
        "window_distances": dist,
        "widths": [r.width for _, r in results],
    }


# --------------------------------------------------------------------------
# export


def interface_polyline(field: Field, geom: QuotientGeometry, level: float = 0.0) -> np.ndarray:
    """(t, transverse) points where each transverse column first crosses ``level``."""
    v = field.values - level
    t = geom.t
    pts = []
    for j in range(v.shape[1]):
        col = v[:, j]
        idx = np.nonzero((col[:-1] > 0) & (col[1:] <= 0))[0]
        if idx.size == 0:
            continue
        i = idx[0]
        frac = col[i] / (col[i] - col[i + 1])
        pts.append((t[i] + frac * geom.h, j * geom.h))
    return np.array(pts)


def write_polyline_csv(field: Field, geom: QuotientGeometry, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "transverse"])
        for a, b in interface_polyline(field, geom):
            w.writerow([repr(float(a)), repr(float(b))])


def write_result(result: PlanelikeResult, stem) -> list[str]:
    """Write ``stem.json``, ``stem_field.csv`` and ``stem_interface.csv``; return their paths."""
    paths = [f"{stem}.json", f"{stem}_field.csv", f"{stem}_interface.csv"]
    with open(paths[0], "w") as fh:
        fh.write(result.to_json())
    field_to_csv(result.field, paths[1])
    write_polyline_csv(result.field, result.geometry, paths[2])
    return paths
