"""Scaling experiments for the rescaled energies.

Every cell minimizes ``E_eps`` on the interval ``B_{1+eps} = (-1-eps, 1+eps)``
with exterior data -1 on the left and +1 on the right.  The data and the
potential are odd, so the minimizer is odd and its transition is pinned at
the origin without any constraint.  The kinetic part carries the factor
``c_{1,s}/2`` so that the interface width is a few eps for every s.

Scans return a :class:`ScanReport` holding per-cell metrics, per-s derived
constants and a list of ratio-band assertions.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .energy import (
    EnergyProblem,
    Modulation,
    Potential,
    double_well,
    limit_energy_indicator,
    operator_for,
    rescaling_coefficients,
)
from .grid import Field, build_grid, sample_field
from .kernels import KernelSpec, normalizing_constant
from .minimize import MinimizeOptions, minimize

THETA = 0.9
BAND = 10.0


class ScanError(ValueError):
    pass


@dataclass
class ScanCell:
    s: float
    eps: float
    energy: float
    interaction: float
    potential: float
    measure: float
    location: float
    interface_fraction: float
    u_origin: float
    converged: bool
    valid: bool
    residual: float
    iterations: int
    regime: str
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScanReport:
    kind: str
    s_values: list
    eps_values: list
    cells: list
    derived: dict = dc_field(default_factory=dict)
    assertions: list = dc_field(default_factory=list)
    meta: dict = dc_field(default_factory=dict)

    METRICS = ("energy", "measure", "location", "interface_fraction", "u_origin", "residual")

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def cell(self, s: float, eps: float) -> ScanCell:
        for c in self.cells:
            if c.s == s and c.eps == eps:
                return c
        raise KeyError((s, eps))

    def matrix(self, metric: str) -> np.ndarray:
        """Rows follow ``s_values``, columns ``eps_values``."""
        return np.array([[getattr(self.cell(s, e), metric) for e in self.eps_values] for s in self.s_values])

    def plot_data(self, metric: str) -> dict:
        return {s: [(e, getattr(self.cell(s, e), metric)) for e in self.eps_values] for s in self.s_values}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "s_values": list(self.s_values),
            "eps_values": list(self.eps_values),
            "cells": [c.to_dict() for c in self.cells],
            "derived": {str(k): v for k, v in self.derived.items()},
            "assertions": list(self.assertions),
            "passed": self.passed,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir, stem: str | None = None) -> list:
        """JSON summary, one CSV matrix per metric and the (eps, metric) series per s.

        Returns the written paths.
        """
        stem = stem or self.kind
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        p = os.path.join(out_dir, f"{stem}.json")
        with open(p, "w") as fh:
            fh.write(self.to_json())
        paths.append(p)
        for metric in self.METRICS:
            p = os.path.join(out_dir, f"{stem}_{metric}.csv")
            m = self.matrix(metric)
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["s"] + [repr(e) for e in self.eps_values])
                for s, row in zip(self.s_values, m):
                    w.writerow([repr(s)] + [repr(float(v)) for v in row])
            paths.append(p)
        p = os.path.join(out_dir, f"{stem}_series.csv")
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "eps", "energy", "measure", "measure_over_eps"])
            for c in self.cells:
                w.writerow([repr(float(v)) for v in (c.s, c.eps, c.energy, c.measure, c.measure / c.eps)])
        paths.append(p)
        return paths


# --------------------------------------------------------------------------
# single cells


def sublevel_measure(x: np.ndarray, u: np.ndarray, theta: float, lo: float, hi: float) -> float:
    """Length of {|u| < theta} within [lo, hi] for the piecewise linear interpolant."""
    total = 0.0
    for i in range(x.size - 1):
        a, b = max(x[i], lo), min(x[i + 1], hi)
        if b <= a:
            continue
        ua = np.interp(a, x[i: i + 2], u[i: i + 2])
        ub = np.interp(b, x[i: i + 2], u[i: i + 2])
        if ua == ub:
            total += (b - a) if abs(ua) < theta else 0.0
            continue
        # parameter range where -theta < ua + (ub - ua) t < theta
        t1, t2 = sorted(((-theta - ua) / (ub - ua), (theta - ua) / (ub - ua)))
        total += (b - a) * max(0.0, min(1.0, t2) - max(0.0, t1))
    return float(total)


def zero_crossing(x: np.ndarray, u: np.ndarray) -> float:
    """Linearly interpolated location of the sign change nearest the centre."""
    idx = np.flatnonzero(np.sign(u[:-1]) != np.sign(u[1:]))
    exact = np.flatnonzero(u == 0)
    if exact.size:
        return float(x[exact[np.argmin(np.abs(x[exact]))]])
    if idx.size == 0:
        return math.nan
    i = idx[np.argmin(np.abs(x[idx]))]
    return float(x[i] - u[i] * (x[i + 1] - x[i]) / (u[i + 1] - u[i]))


def kinetic_factor(s: float, n: int = 1) -> float:
    return 0.5 * normalizing_constant(n, s)


def pinned_minimizer(s: float, eps: float, boundary: str = "antisymmetric", h: float | None = None,
                     potential: Potential | None = None, options: MinimizeOptions | None = None):
    """Minimizer of E_eps in B_{1+eps} with exterior data fixed.

    ``boundary`` is ``antisymmetric`` (data -1 / +1) or ``plus`` (data +1).
    Returns ``(field, report, problem)``.
    """
    if boundary not in ("antisymmetric", "plus"):
        raise ScanError(f"unknown boundary data {boundary!r}")
    potential = potential or double_well()
    R = 1.0 + eps
    h = eps / 16 if h is None else h
    n_half = R / h
    if abs(n_half - round(n_half)) > 1e-9:
        raise ScanError(f"h = {h} does not divide 1 + eps = {R}")
    g = build_grid(1, [(-R, R)], h)
    if boundary == "antisymmetric":
        u0 = sample_field(g, lambda x: np.tanh(x / eps), tails=[(-1.0, 1.0)], exterior_rule="constant")
    else:
        u0 = sample_field(g, lambda x: np.ones_like(x), tails=[(1.0, 1.0)], exterior_rule="constant")
    kc, pc, _ = rescaling_coefficients(s, eps)
    prob = EnergyProblem(
        operator_for(KernelSpec(s, 1), g),
        potential,
        u0,
        mu=g.container_weights([(-R, R)]),
        free=np.ones(g.shape, bool),
        lower=-1.0,
        upper=1.0,
        kin_coef=kc * kinetic_factor(s),
        pot_coef=pc,
    )
    rep = minimize(u0, prob, options or MinimizeOptions(max_iterations=50000))
    return rep.field, rep, prob


def run_cell(s: float, eps: float, theta1: float = THETA, theta2: float = THETA, boundary: str = "antisymmetric",
             h: float | None = None, options: MinimizeOptions | None = None) -> ScanCell:
    u, rep, prob = pinned_minimizer(s, eps, boundary, h, options=options)
    g = u.grid
    x = g.axis_coords(0)
    inner = EnergyProblem(prob.op, prob.potential, u, mu=g.container_weights([(-1.0, 1.0)]),
                          kin_coef=prob.kin_coef, pot_coef=prob.pot_coef)
    b = inner.breakdown()
    u_origin = float(np.interp(0.0, x, u.values))
    in_ball = np.abs(x) <= 1.0
    valid = abs(u_origin) < theta1
    return ScanCell(
        s=s,
        eps=eps,
        energy=b.total,
        interaction=b.interaction,
        potential=b.potential,
        measure=sublevel_measure(x, u.values, theta2, -1.0, 1.0),
        location=zero_crossing(x, u.values),
        interface_fraction=float(np.mean(np.abs(u.values[in_ball]) < theta2)),
        u_origin=u_origin,
        converged=rep.converged,
        valid=valid,
        residual=rep.residual,
        iterations=rep.iterations,
        regime=rescaling_coefficients(s, eps)[2],
        note="" if valid else f"|u(0)| = {abs(u_origin):.3g} >= {theta1}: transition not pinned",
    )


def _check_eps(eps_values, minimum: int = 4) -> list:
    eps_values = [float(e) for e in eps_values]
    if len(eps_values) < minimum:
        raise ScanError(f"need at least {minimum} eps values, got {len(eps_values)}")
    if any(not 0 < e < 1 for e in eps_values):
        raise ScanError("eps values must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ScanError("eps values must be strictly decreasing")
    return eps_values


def _scan(kind, s_values, eps_values, workers, **kw) -> ScanReport:
    jobs = [(float(s), e) for s in s_values for e in eps_values]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            cells = list(ex.map(lambda j: run_cell(j[0], j[1], **kw), jobs))
    else:
        cells = [run_cell(s, e, **kw) for s, e in jobs]
    opts = kw.get("options") or MinimizeOptions(max_iterations=50000)
    meta = {
        "geometry": "interval B_{1+eps}, exterior data -1/+1",
        "h": "eps/16" if kw.get("h") is None else kw["h"],
        "kinetic_factor": "c_{1,s}/2",
        "potential": "double_well",
        "gradient_tolerance": opts.gradient_tolerance,
        "max_iterations": opts.max_iterations,
        "seed": opts.seed,
    }
    return ScanReport(kind, [float(s) for s in s_values], list(eps_values), cells, meta=meta)


def _usable(cells):
    return [c for c in cells if c.converged and c.valid]


def _assertion(name, s, value, bound, passed, **extra) -> dict:
    d = {"name": name, "s": s, "value": value, "bound": bound, "passed": bool(passed)}
    d.update(extra)
    return d


# --------------------------------------------------------------------------
# scans


def energy_bounds_check(s_values: Sequence[float], eps_values: Sequence[float], band: float = BAND,
                        workers: int = 1, **kw) -> ScanReport:
    """E_eps(u_eps; B_1) per cell; per s the ratio max/min must stay within ``band``."""
    eps_values = _check_eps(eps_values)
    rep = _scan("energy_bounds", s_values, eps_values, workers, **kw)
    for s in rep.s_values:
        cells = [c for c in rep.cells if c.s == s]
        good = _usable(cells)
        if len(good) < len(cells) or not good:
            rep.assertions.append(_assertion("cells_valid", s, len(good), len(cells), False))
            continue
        vals = [c.energy for c in good]
        c_lo, c_hi = min(vals), max(vals)
        ratio = c_hi / c_lo if c_lo > 0 else math.inf
        rep.derived[s] = {"c": c_lo, "C": c_hi, "ratio": ratio}
        rep.assertions.append(_assertion("energy_ratio", s, ratio, band, ratio <= band))
    return rep


def density_scan(s_values: Sequence[float], eps_values: Sequence[float], theta1: float = THETA,
                 theta2: float = THETA, band: float = BAND, consecutive=(0.3, 3.0), workers: int = 1,
                 **kw) -> ScanReport:
    """|{|u_eps| < theta2} in B_1| per cell; measure/eps must stay in a band of width ``band``
    and consecutive measures must have ratios within ``consecutive``."""
    eps_values = _check_eps(eps_values)
    rep = _scan("density", s_values, eps_values, workers, theta1=theta1, theta2=theta2, **kw)
    rep.meta.update(theta1=theta1, theta2=theta2)
    for s in rep.s_values:
        cells = [c for c in rep.cells if c.s == s]
        good = _usable(cells)
        if len(good) < len(cells) or not good:
            rep.assertions.append(_assertion("cells_valid", s, len(good), len(cells), False))
            continue
        dens = [c.measure / c.eps for c in good]
        c_lo, c_hi = min(dens), max(dens)
        ratio = c_hi / c_lo if c_lo > 0 else math.inf
        steps = [b.measure / a.measure if a.measure > 0 else math.inf for a, b in zip(good, good[1:])]
        rep.derived[s] = {"c": c_lo, "C": c_hi, "ratio": ratio, "consecutive": steps}
        rep.assertions.append(_assertion("density_band", s, ratio, band, ratio <= band))
        ok = all(consecutive[0] <= r <= consecutive[1] for r in steps)
        rep.assertions.append(_assertion("consecutive_ratio", s, steps, list(consecutive), ok))
    return rep


def gamma_scan(s_values: Sequence[float], eps_values: Sequence[float], geometry: str = "interval",
               boundary: str = "antisymmetric", workers: int = 1, **kw) -> ScanReport:
    """E_eps values and interface localization as eps decreases.

    For s >= 1/2 the value at the smallest eps serves as the estimate of
    c_star (the interface is a single point, of counting measure one); for
    s < 1/2 the values are compared with the limit energy of the sign
    function on B_1.
    """
    if geometry != "interval":
        raise ScanError(f"unsupported geometry {geometry!r}; scans run on the interval B_(1+eps)")
    eps_values = _check_eps(eps_values)
    rep = _scan("gamma", s_values, eps_values, workers, boundary=boundary, **kw)
    rep.meta["boundary"] = boundary
    for s in rep.s_values:
        cells = [c for c in rep.cells if c.s == s and c.converged]
        if len(cells) < len(eps_values):
            rep.assertions.append(_assertion("cells_converged", s, len(cells), len(eps_values), False))
            continue
        vals = [c.energy for c in cells]
        steps = [b / a if a > 0 else (1.0 if b == 0 else math.inf) for a, b in zip(vals, vals[1:])]
        d = {"energies": vals, "consecutive": steps, "interface_fraction": [c.interface_fraction for c in cells]}
        if s >= 0.5:
            d["c_star"] = vals[-1]
            d["limit_ratio"] = [v / vals[-1] if vals[-1] > 0 else math.nan for v in vals]
        else:
            lim = limit_indicator_value(s, eps_values[-1])
            d["limit_energy"] = lim
            d["limit_ratio"] = [v / lim for v in vals]
        rep.derived[s] = d
        ok = all(1 / 2 < r < 2 for r in steps) or all(v == 0 for v in vals)
        rep.assertions.append(_assertion("consecutive_energy_ratio", s, steps, [0.5, 2.0], ok))
    return rep


def limit_indicator_value(s: float, eps: float) -> float:
    """c_{1,s}/2 K(chi_E - chi_E^c; B_1) for E = (0, inf) on the grid of the smallest eps."""
    h = eps / 16
    R = 1.0 + eps
    g = build_grid(1, [(-R, R)], h)
    f = sample_field(g, lambda x: np.where(x >= 0, 1.0, -1.0), tails=[(-1.0, 1.0)], exterior_rule="constant")
    return kinetic_factor(s) * limit_energy_indicator(f, [(-1.0, 1.0)], s)


# --------------------------------------------------------------------------
# flatness


def level_curve(field: Field, axis: int = 0, level: float = 0.0) -> np.ndarray:
    """Points of {u = level} found by linear interpolation along ``axis``,
    one per grid line across it (interior nodes only)."""
    g = field.grid
    if g.dim != 2:
        raise ScanError("the level curve needs a 2D field")
    v = field.values[g.interior_slice()] - level
    X, Y = (c[g.interior_slice()] for c in g.coords())
    if axis == 1:
        v, X, Y = v.T, X.T, Y.T
    pts = []
    for j in range(v.shape[1]):
        col = v[:, j]
        idx = np.flatnonzero(np.sign(col[:-1]) * np.sign(col[1:]) <= 0)
        if idx.size == 0:
            continue
        i = idx[0]
        t = 0.0 if col[i] == col[i + 1] else col[i] / (col[i] - col[i + 1])
        pts.append((X[i, j] + t * (X[i + 1, j] - X[i, j]), Y[i, j] + t * (Y[i + 1, j] - Y[i, j])))
    if not pts:
        raise ScanError("the field does not change sign")
    return np.array(pts)


def flatness_diagnostic(field: Field, axis: int = 0, level: float = 0.0) -> float:
    """Max distance of the level curve from its best-fit line over the domain size."""
    pts = level_curve(field, axis, level)
    if len(pts) < 2:
        raise ScanError("level curve has fewer than two points")
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c)
    normal = vt[-1]
    g = field.grid
    size = max(hi - lo for lo, hi in zip(g.lower, g.upper))
    return float(np.max(np.abs((pts - c) @ normal)) / size)


def planar_minimizer_2d(s: float, direction=(1.0, 0.0), half_width: float = 4.0, h: float = 0.1,
                        collar: float = 1.0, modulation: Modulation | None = None, width: float = 1.0,
                        options: MinimizeOptions | None = None):
    """Minimizer on a square with planar exterior data tanh(x.e / width) on the collar.

    The kernel is truncated at the collar width, so interactions reach the
    sampled data but nothing beyond it.  Returns ``(field, report)``.
    """
    e = np.asarray(direction, float)
    e = e / np.linalg.norm(e)
    g = build_grid(2, [(-half_width, half_width)] * 2, h, collar=collar)
    u0 = sample_field(g, lambda x, y: np.tanh((e[0] * x + e[1] * y) / width))
    spec = KernelSpec(s, 2, R=collar)
    q = None if modulation is None else modulation(*g.coords())
    prob = EnergyProblem(operator_for(spec, g), double_well(), u0, q_values=q, lower=-1.0, upper=1.0,
                         kin_coef=kinetic_factor(s, 2))
    rep = minimize(u0, prob, options or MinimizeOptions(max_iterations=50000))
    return rep.field, rep
