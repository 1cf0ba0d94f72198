"""Potentials, modulations and the discrete energies built on the kernel weights.

All energies share the operator's pair weights ``P = h^n w``.  The container is
a per-node weight ``mu`` (fraction of the node's cell inside the container),
and a pair of nodes counts with factor ``1 - (1 - mu_i)(1 - mu_j)``: the
discrete form of removing the pairs with both points outside the container.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Field, Grid, GridError
from .kernels import KernelSpec, NonlocalOperator, assemble_operator


class EnergyError(ValueError):
    pass


# --------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    kind: str
    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    wells: tuple
    max_curvature: float
    increment: Callable | None = None

    def __call__(self, u):
        return self.value(u)

    def diff(self, u, d):
        """W(u + d) - W(u) without cancellation when d is small."""
        if self.increment is not None:
            return self.increment(u, d)
        return self.value(u + d) - self.value(u)


def double_well() -> Potential:
    """W(u) = (1 - u^2)^2 / 4."""
    return Potential(
        "double_well",
        lambda u: 0.25 * (1.0 - u * u) ** 2,
        lambda u: u * (u * u - 1.0),
        lambda u: 3.0 * u * u - 1.0,
        (-1.0, 1.0),
        2.0,
        lambda u, d: -0.25 * d * (2 * u + d) * (2.0 - u * u - (u + d) ** 2),
    )


def multiwell_periodic() -> Potential:
    """V(r) = (1 - cos 2 pi r) / (4 pi^2), wells at the integers, V''(0) = 1."""
    tp = 2 * math.pi
    return Potential(
        "multiwell_periodic",
        lambda u: (1.0 - np.cos(tp * u)) / tp**2,
        lambda u: np.sin(tp * u) / tp,
        lambda u: np.cos(tp * u),
        (0.0, 1.0),
        1.0,
        lambda u, d: 2.0 * np.sin(math.pi * (2 * u + d)) * np.sin(math.pi * d) / tp**2,
    )


def user_table(u: Sequence[float], W: Sequence[float]) -> Potential:
    """Potential interpolated by a cubic spline through tabulated values."""
    u = np.asarray(u, dtype=float)
    W = np.asarray(W, dtype=float)
    if np.any(W < -1e-14):
        raise EnergyError("tabulated potential must be nonnegative")
    cs = CubicSpline(u, W)
    d1, d2 = cs.derivative(1), cs.derivative(2)
    wells = tuple(float(x) for x in u[np.isclose(W, 0.0)])
    d3 = cs.derivative(3)
    fine = np.linspace(u[0], u[-1], 2001)

    def increment(x, d):
        # the spline is cubic between knots, so the Taylor form is exact there
        taylor = d * (d1(x) + d * (0.5 * d2(x) + d * d3(x) / 6.0))
        return np.where(np.abs(d) < 1e-3, taylor, cs(x + d) - cs(x))

    return Potential("user_table", cs, d1, d2, wells, float(np.abs(d2(fine)).max()), increment)


# --------------------------------------------------------------------------
# modulations


@dataclass(frozen=True)
class Modulation:
    """Q(x) or a(x).

    kinds: ``constant`` (``value``), ``lattice_periodic`` (a checkerboard with
    values ``q_lo``/``q_hi`` on squares of side tau/2, or ``fn`` if given),
    ``cosine`` (``a1 + a2 cos(eps_mod x)``, 1D).
    """

    kind: str = "constant"
    value: float = 1.0
    q_lo: float = 1.0
    q_hi: float = 1.0
    tau: float = 1.0
    a1: float = 1.0
    a2: float = 0.0
    eps_mod: float = 0.1
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind == "constant" and not self.value > 0:
            raise EnergyError("constant modulation must be positive")
        if self.kind == "lattice_periodic" and not (self.q_hi >= self.q_lo > 0 and self.tau >= 1):
            raise EnergyError("lattice modulation needs Q* >= Q_* > 0 and tau >= 1")
        if self.kind == "cosine" and not (self.a1 > self.a2 >= 0 and self.eps_mod > 0):
            raise EnergyError("cosine modulation needs a1 > a2 >= 0 and eps_mod > 0")

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "constant":
            return (self.value, self.value)
        if self.kind == "lattice_periodic":
            return (self.q_lo, self.q_hi)
        return (self.a1 - self.a2, self.a1 + self.a2)

    @property
    def period(self) -> float:
        if self.kind == "cosine":
            return 2 * math.pi / self.eps_mod
        return self.tau

    def __call__(self, *coords) -> np.ndarray:
        x0 = np.asarray(coords[0], dtype=float)
        if self.kind == "constant":
            return np.full(x0.shape, self.value)
        if self.kind == "cosine":
            return self.a1 + self.a2 * np.cos(self.eps_mod * x0)
        if self.fn is not None:
            return np.asarray(self.fn(*coords), dtype=float)
        cells = sum(np.floor(2 * np.asarray(c, dtype=float) / self.tau).astype(np.int64) for c in coords)
        return self.from_cells(cells)

    def from_cells(self, cell_sum) -> np.ndarray:
        """Checkerboard value from the sum of integer half-cell indices.

        The squares have side tau/2, so the pattern is tau-periodic in every
        axis direction.
        """
        cell_sum = np.asarray(cell_sum)
        return np.where(cell_sum % 2 == 0, self.q_lo, self.q_hi).astype(float)


def constant_modulation(value: float = 1.0) -> Modulation:
    return Modulation("constant", value=value)


def checkerboard(q_lo: float = 1.0, q_hi: float = 2.0, tau: float = 1.0) -> Modulation:
    return Modulation("lattice_periodic", q_lo=q_lo, q_hi=q_hi, tau=tau)


def cosine_modulation(a1: float, a2: float, eps_mod: float) -> Modulation:
    return Modulation("cosine", a1=a1, a2=a2, eps_mod=eps_mod)


# --------------------------------------------------------------------------
# breakdowns


@dataclass
class EnergyBreakdown:
    interaction: float
    potential: float
    total: float
    epsilon: float | None = None
    regime: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def rescaling_coefficients(s: float, eps: float) -> tuple[float, float, str]:
    """Coefficients (of K, of W) of the epsilon-rescaled energy and the regime name."""
    if not (0.0 < eps < 1.0):
        raise EnergyError(f"epsilon must lie in (0, 1), got {eps}")
    if s < 0.5:
        return 1.0, eps ** (-2 * s), "s<1/2"
    if s == 0.5:
        L = abs(math.log(eps))
        return 1.0 / L, 1.0 / (eps * L), "s=1/2"
    return eps ** (2 * s - 1), 1.0 / eps, "s>1/2"


# --------------------------------------------------------------------------
# the discrete energy


@lru_cache(maxsize=32)
def operator_for(spec: KernelSpec, grid: Grid) -> NonlocalOperator:
    return assemble_operator(spec, grid)


def _pair_factor(mu_i, mu_j):
    return mu_i + mu_j - mu_i * mu_j


def direct_pair_energy(op: NonlocalOperator, u: np.ndarray, mu: np.ndarray) -> float:
    """1/2 sum_ij chi_ij P_ij (u_i - u_j)^2, summed offset by offset (no cancellation)."""
    g = op.grid
    hn = g.cell_volume
    w = op.weights
    total = 0.0
    if g.dim == 1:
        n = g.shape[0]
        if g.periodic[0]:
            for r in range(1, n):
                if w[r] == 0.0:
                    continue
                j = np.roll(u, -r)
                mj = np.roll(mu, -r)
                total += 0.5 * w[r] * np.sum(_pair_factor(mu, mj) * (u - j) ** 2)
        else:
            centre = n - 1
            for m in range(1, n):
                wm = w[centre + m]
                if wm == 0.0:
                    continue
                d = u[:-m] - u[m:]
                total += wm * np.sum(_pair_factor(mu[:-m], mu[m:]) * d * d)
        return hn * total
    n0, n1 = g.shape
    periodic1 = g.periodic[1]
    if periodic1:
        # stack all transverse shifts once
        shifts_u = np.stack([np.roll(u, -r, axis=1) for r in range(n1)], axis=-1)
        shifts_mu = np.stack([np.roll(mu, -r, axis=1) for r in range(n1)], axis=-1)
        centre = n0 - 1
        for m in range(0, n0):
            wrow = w[centre + m]
            if not np.any(wrow):
                continue
            a = u[: n0 - m, :, None]
            ma = mu[: n0 - m, :, None]
            b = shifts_u[m:]
            mb = shifts_mu[m:]
            contrib = np.sum(_pair_factor(ma, mb) * (a - b) ** 2 * wrow[None, None, :])
            total += contrib if m > 0 else 0.5 * contrib
        return hn * total
    # both axes non-periodic (kernel truncated inside the collar)
    c0, c1 = n0 - 1, n1 - 1
    for m0 in range(-(n0 - 1), n0):
        for m1 in range(-(n1 - 1), n1):
            wm = w[c0 + m0, c1 + m1]
            if wm == 0.0 or (m0, m1) <= (0, 0):
                continue
            s0 = slice(max(0, -m0), n0 - max(0, m0))
            s1 = slice(max(0, -m1), n1 - max(0, m1))
            t0 = slice(max(0, m0), n0 - max(0, -m0))
            t1 = slice(max(0, m1), n1 - max(0, -m1))
            d = u[s0, s1] - u[t0, t1]
            total += wm * np.sum(_pair_factor(mu[s0, s1], mu[t0, t1]) * d * d)
    return hn * total


class EnergyProblem:
    """kin_coef * K(u) + pot_coef * W_Q(u) over a container, exterior fixed.

    ``free`` selects the unknowns; everything else (collar, tails) stays at the
    values of ``base``.  ``lower``/``upper`` are per-node box bounds on the
    free nodes.  ``tail_pairs`` adds the constant tail-tail interaction (used by
    the auxiliary functional on a cylinder).
    """

    def __init__(
        self,
        op: NonlocalOperator,
        potential: Potential,
        base: Field,
        q_values: np.ndarray | None = None,
        mu: np.ndarray | None = None,
        free: np.ndarray | None = None,
        lower=None,
        upper=None,
        kin_coef: float = 1.0,
        pot_coef: float = 1.0,
        tail_pairs: bool = False,
    ):
        g = op.grid
        if not g.same_as(base.grid):
            raise EnergyError("base field and operator live on different grids")
        self.op = op
        self.grid = g
        self.potential = potential
        self.base = base
        self.q = np.ones(g.shape) if q_values is None else np.broadcast_to(np.asarray(q_values, float), g.shape)
        self.mu = g.container_weights() if mu is None else np.asarray(mu, float)
        self.free = g.interior_mask() if free is None else np.asarray(free, bool)
        nfree = int(self.free.sum())
        lo = -np.inf if lower is None else lower
        hi = np.inf if upper is None else upper
        self.lower = np.broadcast_to(np.asarray(lo, float), g.shape)[self.free].copy() if np.ndim(lo) else np.full(nfree, float(lo))
        self.upper = np.broadcast_to(np.asarray(hi, float), g.shape)[self.free].copy() if np.ndim(hi) else np.full(nfree, float(hi))
        self.kin_coef = kin_coef
        self.pot_coef = pot_coef
        self.tail_pairs = tail_pairs
        self.hn = g.cell_volume
        self._c_mu = op.convolve(self.mu)
        self._binary = bool(np.all((self.mu == 0) | (self.mu == 1)))
        self._cache = None

    # ---- helpers
    def full(self, x: np.ndarray) -> np.ndarray:
        u = np.array(self.base.values)
        u[self.free] = x
        return u

    def x0(self) -> np.ndarray:
        return np.array(self.base.values[self.free])

    def field(self, x: np.ndarray) -> Field:
        return self.base.with_values(self.full(x))

    @property
    def size(self) -> int:
        return int(self.free.sum())

    def _kin_grad_full(self, u: np.ndarray) -> np.ndarray:
        op, mu = self.op, self.mu
        cu = op.convolve(u)
        lin, _ = op.tail_terms(u, self.base.tails)
        own = u * op.row_sum - cu
        if self._binary and np.all(mu[self.free] == 1):
            cross = 0.0
        else:
            cmu_u = op.convolve(mu * u)
            cross = (u * self._c_mu - cmu_u) * (1 - mu)
        g = 2 * self.hn * (mu * own + cross + mu * lin)
        return g

    def _kin_quadratic(self, d: np.ndarray) -> float:
        """Interaction energy of an increment d (zero exterior, zero tails)."""
        op, mu = self.op, self.mu
        zero_tails = tuple(None if t is None else (0.0, 0.0) for t in self.base.tails)
        cd = op.convolve(d)
        cd2 = op.convolve(d * d)
        A = np.sum(mu * (d * d * op.row_sum - 2 * d * cd + cd2))
        B = 2 * np.sum(mu * d * d * self._c_mu) - 2 * np.sum(mu * d * op.convolve(mu * d))
        _, quad = op.tail_terms(d, zero_tails)
        return self.hn * (A - 0.5 * B) + self.hn * np.sum(mu * quad)

    # ---- public interface used by the minimizer
    def _kin_grad_cached(self, x: np.ndarray) -> np.ndarray:
        c = self._cache
        if c is not None and c[0].shape == x.shape and np.array_equal(c[0], x):
            return c[1]
        gk = self._kin_grad_full(self.full(x))
        self._cache = (x.copy(), gk)
        return gk

    def gradient(self, x: np.ndarray) -> np.ndarray:
        u = self.full(x)
        g = self.kin_coef * self._kin_grad_cached(x)
        g = g + self.pot_coef * self.hn * self.mu * self.q * self.potential.d1(u)
        return g[self.free]

    def delta(self, x: np.ndarray, d: np.ndarray) -> float:
        """E(x + d) - E(x), computed without forming either energy."""
        dfull = np.zeros(self.grid.shape)
        dfull[self.free] = d
        gk = self._kin_grad_cached(x)
        kin = np.sum(gk * dfull) + self._kin_quadratic(dfull)
        pot = self.hn * np.sum((self.mu * self.q)[self.free] * self.potential.diff(x, d))
        return self.kin_coef * kin + self.pot_coef * pot

    def breakdown(self, x: np.ndarray | None = None) -> EnergyBreakdown:
        u = self.base.values if x is None else self.full(x)
        return self.breakdown_full(u)

    def breakdown_full(self, u: np.ndarray) -> EnergyBreakdown:
        pairs = direct_pair_energy(self.op, u, self.mu)
        _, quad = self.op.tail_terms(u, self.base.tails)
        kin = pairs + self.hn * np.sum(self.mu * quad)
        if self.tail_pairs:
            lo, hi = self.base.tails[0]
            if lo != hi:
                kin += self.op.tail_pair_constant * (lo - hi) ** 2
        pot = self.hn * np.sum(self.mu * self.q * self.potential.value(u))
        kin *= self.kin_coef
        pot *= self.pot_coef
        return EnergyBreakdown(float(kin), float(pot), float(kin + pot))

    def energy(self, x: np.ndarray) -> float:
        return self.breakdown(x).total

    def lipschitz_bound(self) -> float:
        """Upper bound of the Hessian's row sums over the box (monotone iteration)."""
        op = self.op
        rs = np.max(op.row_sum + op.tail_sum())
        qmax = float(np.max(self.q))
        return self.hn * (self.kin_coef * 4 * rs + self.pot_coef * qmax * self.potential.max_curvature)


# --------------------------------------------------------------------------
# functional API


def _q_values(grid: Grid, modulation: Modulation | None) -> np.ndarray:
    if modulation is None:
        return np.ones(grid.shape)
    return np.asarray(modulation(*grid.coords()), dtype=float)


def _mu(grid: Grid, container) -> np.ndarray:
    if container is None:
        return grid.container_weights()
    if grid.dim == 1 and len(container) == 2 and not isinstance(container[0], (tuple, list)):
        container = [tuple(container)]
    try:
        return grid.container_weights(container)
    except GridError as exc:
        raise EnergyError(str(exc)) from None


def problem_for(field: Field, container, kernel: KernelSpec, potential: Potential | None = None,
                modulation: Modulation | None = None, **kw) -> EnergyProblem:
    op = operator_for(kernel, field.grid)
    return EnergyProblem(
        op,
        potential or double_well(),
        field,
        q_values=_q_values(field.grid, modulation),
        mu=_mu(field.grid, container),
        **kw,
    )


def interaction_energy(field: Field, container, kernel: KernelSpec) -> float:
    """K(u; container): half the kernel-weighted squared differences over Q_container."""
    prob = problem_for(field, container, kernel)
    return prob.breakdown().interaction


def potential_energy(field: Field, container, potential: Potential, modulation: Modulation | None = None) -> float:
    """Midpoint rule for int_container Q W(u)."""
    g = field.grid
    mu = _mu(g, container)
    q = _q_values(g, modulation)
    return float(g.cell_volume * np.sum(mu * q * potential.value(field.values)))


def total_energy(field: Field, container, kernel: KernelSpec, potential: Potential,
                 modulation: Modulation | None = None) -> EnergyBreakdown:
    return problem_for(field, container, kernel, potential, modulation).breakdown()


def rescaled_energy(field: Field, container, eps: float, kernel: KernelSpec, potential: Potential,
                    modulation: Modulation | None = None) -> EnergyBreakdown:
    """E_eps: regime chosen by comparing s with 1/2 exactly."""
    kc, pc, regime = rescaling_coefficients(kernel.s, eps)
    b = total_energy(field, container, kernel, potential, modulation)
    out = EnergyBreakdown(kc * b.interaction, pc * b.potential, kc * b.interaction + pc * b.potential, eps, regime)
    return out


def energy_gradient(field: Field, container, kernel: KernelSpec, potential: Potential,
                    modulation: Modulation | None = None) -> Field:
    """Exact gradient of the discrete total energy w.r.t. the interior values."""
    prob = problem_for(field, container, kernel, potential, modulation)
    g = np.zeros(field.grid.shape)
    g[prob.free] = prob.gradient(prob.x0())
    return Field(field.grid, g, tuple(None if t is None else (0.0, 0.0) for t in field.tails), "derived")


def auxiliary_energy_F(field: Field, kernel: KernelSpec, potential: Potential,
                       q_values: np.ndarray | None = None) -> EnergyBreakdown:
    """F(u) on a cylinder: x over one period (all t), y over the whole plane."""
    g = field.grid
    if g.dim != 2 or not g.periodic[1] or g.periodic[0]:
        raise EnergyError("the auxiliary functional needs a field periodic along axis 1 only")
    op = operator_for(kernel, g)
    prob = EnergyProblem(op, potential, field, q_values=q_values, mu=np.ones(g.shape),
                         free=np.ones(g.shape, bool), tail_pairs=True)
    return prob.breakdown()


def min_max_split(u: Field, w: Field, container, kernel: KernelSpec, potential: Potential,
                  modulation: Modulation | None = None):
    """(max(u, w), min(u, w)) together with their energy breakdowns."""
    if not u.grid.same_as(w.grid):
        raise EnergyError("fields live on different grids")
    tails_hi = tuple(None if a is None else (max(a[0], b[0]), max(a[1], b[1])) for a, b in zip(u.tails, w.tails))
    tails_lo = tuple(None if a is None else (min(a[0], b[0]), min(a[1], b[1])) for a, b in zip(u.tails, w.tails))
    v1 = Field(u.grid, np.maximum(u.values, w.values), tails_hi, u.exterior_rule, u.box)
    v2 = Field(u.grid, np.minimum(u.values, w.values), tails_lo, u.exterior_rule, u.box)
    b1 = total_energy(v1, container, kernel, potential, modulation)
    b2 = total_energy(v2, container, kernel, potential, modulation)
    return v1, v2, b1, b2


def limit_energy_indicator(field: Field, container, s: float) -> float:
    """K(chi_E - chi_E^c; container), the s < 1/2 limit energy."""
    if s >= 0.5:
        raise EnergyError("the indicator limit energy is defined for s < 1/2 only")
    vals = np.concatenate([field.values.ravel(), [v for t in field.tails if t for v in t]])
    if not np.all(np.isclose(np.abs(vals), 1.0)):
        raise EnergyError("limit energy needs a field with values +-1")
    return interaction_energy(field, container, KernelSpec(s, field.grid.dim))
