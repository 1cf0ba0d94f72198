"""Invariant suite: independent oracles for the discrete operators and energies.

Each check draws its random inputs from ``numpy.random.default_rng(seed)``
and returns a :class:`CheckResult` with the worst observed value and the
bound it is compared against, so repeated runs with one seed agree bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .energy import (
    checkerboard,
    constant_modulation,
    cosine_modulation,
    double_well,
    min_max_split,
    multiwell_periodic,
    problem_for,
    rescaled_energy,
    total_energy,
)
from .grid import Field, build_grid, sample_field
from .kernels import KernelSpec, apply_operator, assemble_operator
from .multibump import action, truncate_orbit
from .planelike import DirectionSpec, build_quotient, centred_admissible, verify_energy_identity


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    bound: float
    cases: int
    seconds: float = 0.0
    details: list = dc_field(default_factory=list)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "bound": self.bound,
            "cases": self.cases,
            "details": self.details,
        }
        if timing:
            d["seconds"] = self.seconds
        return d


def _timed(fn):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def spectral_oracle(s_values=(0.3, 0.5, 0.7), modes=(1, 3, 7), N: int = 1024, tol: float = 1e-3) -> CheckResult:
    """Operator on sin(2 pi k x) over a unit periodic grid vs |2 pi k|^{2s} sin(2 pi k x)."""
    g = build_grid(1, [(0.0, 1.0)], 1.0 / N, periodicity=[True])
    x = g.axis_coords(0)
    worst, details = 0.0, []
    for s in s_values:
        op = assemble_operator(KernelSpec(s, 1), g)
        for k in modes:
            f = sample_field(g, lambda y: np.sin(2 * np.pi * k * y))
            got = apply_operator(op, f).values
            want = (2 * np.pi * k) ** (2 * s) * np.sin(2 * np.pi * k * x)
            err = float(np.max(np.abs(got - want)) / np.max(np.abs(want)))
            details.append({"s": s, "k": k, "error": err})
            worst = max(worst, err)
    return CheckResult("spectral_oracle", worst < tol, worst, tol, len(details), details=details)


def _gradient_configs():
    """(label, grid, container, kernel, modulation) for the gradient and submodularity checks."""
    g1 = build_grid(1, [(-2.0, 2.0)], 0.1, collar=0.5)
    g2 = build_grid(2, [(-1.0, 1.0), (0.0, 1.0)], 0.125, collar=0.5, periodicity=[False, True])
    return [
        ("1d_s0.3", g1, [(-1.5, 1.5)], KernelSpec(0.3, 1), None),
        ("1d_s0.7", g1, [(-1.5, 1.5)], KernelSpec(0.7, 1), cosine_modulation(1.0, 0.5, 1.0)),
        ("2d_cyl_s0.6", g2, None, KernelSpec(0.6, 2), checkerboard(1.0, 2.0, 1.0)),
    ]


def _random_field(g, rng, lo=-1.2, hi=1.2) -> Field:
    vals = rng.uniform(lo, hi, g.shape)
    tails = [None if p else (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi))) for p in g.periodic]
    return Field(g, vals, tails, "sampled")


def _nearby_field(u: Field, rng, scale: float) -> Field:
    """u plus a small perturbation of random sign, so max/min mix both fields."""
    vals = u.values + scale * rng.standard_normal(u.values.shape)
    tails = [None if t is None else tuple(v + scale * rng.standard_normal() for v in t) for t in u.tails]
    return Field(u.grid, vals, tails, u.exterior_rule)


@_timed
def gradient_check(seed: int = 0, n_fields: int = 20, step: float = 1e-4, tol: float = 1e-5) -> CheckResult:
    """Exact discrete gradient vs central differences of the directly summed energy.

    The error of a component is measured relative to the sup norm of the gradient.
    """
    rng = np.random.default_rng(seed)
    worst, details = 0.0, []
    for label, g, box, kernel, mod in _gradient_configs():
        cw = 0.0
        for _ in range(n_fields):
            u = _random_field(g, rng)
            prob = problem_for(u, box, kernel, double_well(), mod)
            x = prob.x0()
            grad = prob.gradient(x)
            fd = np.empty_like(grad)
            for i in range(x.size):
                xp, xm = x.copy(), x.copy()
                xp[i] += step
                xm[i] -= step
                fd[i] = (prob.energy(xp) - prob.energy(xm)) / (2 * step)
            cw = max(cw, float(np.max(np.abs(grad - fd)) / np.max(np.abs(grad))))
        details.append({"config": label, "error": cw})
        worst = max(worst, cw)
    return CheckResult("gradient_check", worst < tol, worst, tol, n_fields * len(details), details=details)


@_timed
def submodularity_check(seed: int = 0, n_pairs: int = 100, tol: float = 1e-9) -> CheckResult:
    """E(max) + E(min) <= E(u) + E(w); the value is the smallest slack."""
    rng = np.random.default_rng(seed + 1)
    configs = _gradient_configs()
    worst, details = math.inf, []
    for i in range(n_pairs):
        label, g, box, kernel, mod = configs[i % len(configs)]
        u = _random_field(g, rng)
        # alternate rough pairs with nearly equal pairs, whose slack is close to zero
        w = _random_field(g, rng) if i % 2 == 0 else _nearby_field(u, rng, 10.0 ** rng.uniform(-6, -1))
        _, _, b1, b2 = min_max_split(u, w, box, kernel, double_well(), mod)
        eu = total_energy(u, box, kernel, double_well(), mod).total
        ew = total_energy(w, box, kernel, double_well(), mod).total
        slack = eu + ew - b1.total - b2.total
        worst = min(worst, slack)
    details.append({"configs": [c[0] for c in configs]})
    return CheckResult("submodularity", worst >= -tol, worst, -tol, n_pairs, details=details)


@_timed
def identity_check(seed: int = 0, n_pairs: int = 20, tol: float = 1e-6) -> CheckResult:
    """Quotient energy identity E(u + phi) - F(u + phi) - (E(u) - F(u)) vs the cross-image sum of phi."""
    rng = np.random.default_rng(seed + 2)
    cases = [
        (KernelSpec(0.7, 2), (0, 1)),
        (KernelSpec(0.7, 2), (1, 2)),
        (KernelSpec(0.4, 2, R=2.0), (1, 1)),
        (KernelSpec(0.6, 2, R=1.5), (1, 2)),
    ]
    worst, details = 0.0, []
    for i in range(n_pairs):
        kernel, omega = cases[i % len(cases)]
        geom = build_quotient(DirectionSpec.of(omega), 4)
        T = geom.t[:, None]
        S = (np.arange(geom.n_sigma) * geom.h)[None, :]
        u = centred_admissible(geom)
        wob = rng.uniform(0.0, 0.1) * np.sin(2 * np.pi * S / geom.period + rng.uniform(0, 2 * np.pi))
        u = u.with_values(np.clip(u.values + wob * np.exp(-((T - 2.0) ** 2)), *geom.bounds()))
        centre, width = rng.uniform(1.5, 2.5), rng.uniform(0.3, 0.6)
        phase = rng.uniform(0, 2 * np.pi)
        phi = np.exp(-(((T - centre) / width) ** 2)) * (1 + 0.5 * np.cos(2 * np.pi * S / geom.period + phase))
        phi *= rng.uniform(-0.3, 0.3)
        phi[(T[:, 0] <= 0.3) | (T[:, 0] >= 3.7)] = 0.0
        lhs, rhs = verify_energy_identity(u, phi, geom, kernel, double_well(), checkerboard(1.0, 2.0, 1.0))
        err = abs(lhs - rhs) / (1 + abs(rhs))
        details.append({"s": kernel.s, "R": kernel.R if math.isfinite(kernel.R) else "inf",
                        "omega": list(omega), "error": err})
        worst = max(worst, err)
    return CheckResult("energy_identity", worst <= tol, worst, tol, n_pairs, details=details)


@_timed
def truncation_check(seed: int = 0, n_fields: int = 100, tol: float = 1e-10) -> CheckResult:
    """action(min{u, zeta + 1}) <= action(u); the value is the smallest slack."""
    rng = np.random.default_rng(seed + 3)
    g = build_grid(1, [(-5.0, 5.0)], 0.1)
    worst = math.inf
    for i in range(n_fields):
        zeta = int(rng.integers(-1, 2))
        s = float(rng.choice([0.3, 0.5, 0.7]))
        mod = cosine_modulation(1.0, float(rng.uniform(0, 0.9)), float(rng.uniform(0.05, 1.0)))
        # a smooth profile around zeta + 1 with noise of random size: the cap is
        # crossed many times and the slack ranges down to exactly zero
        x = g.axis_coords(0)
        amp = 10.0 ** rng.uniform(-4, 0)
        vals = zeta + 1 + amp * np.sin(rng.uniform(0.5, 3) * x + rng.uniform(0, 2 * np.pi))
        vals += amp * rng.uniform(0, 0.5) * rng.standard_normal(g.shape)
        if i % 10 == 0:
            vals = np.minimum(vals, zeta + 1)
        tails = [(float(vals[0]), float(vals[-1]))]
        u = Field(g, vals, tails, "constant")
        a0 = action(u, s, mod, multiwell_periodic())
        a1 = action(truncate_orbit(u, zeta), s, mod, multiwell_periodic())
        worst = min(worst, a0 - a1)
    return CheckResult("truncation", worst >= -tol, worst, -tol, n_fields)


@_timed
def scaling_check(s_values=(0.3, 0.7), eps_values=(0.5, 0.25), h: float = 0.01, tol: float = 1e-3) -> CheckResult:
    """E_eps(u(./eps); eps Omega) vs eps^(n - min(2s, 1)) E(u; Omega) in 1D.

    Both sides are discretized independently with the same spacing ``h``, so
    the comparison includes the discretization error of the scaled profile.
    """
    worst, details = 0.0, []
    profile = lambda x: np.tanh(2 * x) + 0.2 * np.sin(3 * x)
    for s in s_values:
        kernel = KernelSpec(s, 1)
        base = build_grid(1, [(-2.0, 2.0)], h)
        u = sample_field(base, profile, tails=[(-1.0, 1.0)], exterior_rule="constant")
        ref = total_energy(u, [(-1.0, 1.0)], kernel, double_well(), constant_modulation()).total
        for eps in eps_values:
            g = build_grid(1, [(-2.0 * eps, 2.0 * eps)], h)
            v = sample_field(g, lambda x: profile(x / eps), tails=[(-1.0, 1.0)], exterior_rule="constant")
            got = rescaled_energy(v, [(-eps, eps)], eps, kernel, double_well()).total
            want = eps ** (1 - min(2 * s, 1.0)) * ref
            err = abs(got - want) / abs(want)
            details.append({"s": s, "eps": eps, "error": err})
            worst = max(worst, err)
    return CheckResult("scaling_identity", worst < tol, worst, tol, len(details), details=details)


SUITE = {
    "spectral_oracle": lambda seed: spectral_oracle(),
    "gradient_check": lambda seed: gradient_check(seed),
    "submodularity": lambda seed: submodularity_check(seed),
    "energy_identity": lambda seed: identity_check(seed),
    "truncation": lambda seed: truncation_check(seed),
    "scaling_identity": lambda seed: scaling_check(),
}


def run_suite(seed: int = 0, names=None) -> list:
    names = list(SUITE) if names is None else list(names)
    unknown = [n for n in names if n not in SUITE]
    if unknown:
        raise KeyError(f"unknown checks {unknown}; available: {list(SUITE)}")
    return [SUITE[n](seed) for n in names]
