"""The one-dimensional transition layer.

The layer solves ``(-Delta)^s u + W'(u) = 0`` on the line with limits at the
two wells of ``W``.  Here ``(-Delta)^s`` is the normalized operator of
:func:`fracphase.kernels.apply_operator`, so the layer minimizes
``c_{1,s}/2 * K + W`` and the reported residual is the nodal residual of that
equation.  Outside ``[-L, L]`` the profile is replaced by the wells exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyProblem, Potential, double_well, interaction_energy, operator_for, potential_energy
from .grid import Field, build_grid, field_to_csv, sample_field
from .kernels import KernelSpec, normalizing_constant
from .minimize import MinimizeOptions, MinimizeReport, check_stationarity, minimize


class LayerError(ValueError):
    pass


@dataclass
class LayerSolution:
    field: Field
    s: float
    residual: float
    monotone: bool
    midpoint: float
    end_gap: float
    converged: bool
    report: MinimizeReport

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "L": float(self.field.grid.upper[0]),
            "h": self.field.grid.h,
            "residual": self.residual,
            "monotone": self.monotone,
            "midpoint": self.midpoint,
            "end_gap": self.end_gap,
            "converged": self.converged,
            "iterations": self.report.iterations,
        }

    def write_csv(self, path) -> None:
        field_to_csv(self.field, path)


def _wells(potential: Potential) -> tuple[float, float]:
    if len(potential.wells) < 2:
        raise LayerError("the layer needs a potential with two wells")
    return float(min(potential.wells)), float(max(potential.wells))


def layer_problem(field: Field, s: float, potential: Potential) -> EnergyProblem:
    """Energy whose nodal Euler-Lagrange residual is (-Delta)^s u + W'(u)."""
    g = field.grid
    lo, hi = _wells(potential)
    op = operator_for(KernelSpec(s, 1), g)
    return EnergyProblem(
        op,
        potential,
        field,
        mu=np.ones(g.shape),
        free=np.ones(g.shape, bool),
        lower=lo,
        upper=hi,
        kin_coef=0.5 * normalizing_constant(1, s),
    )


def solve_layer(
    s: float,
    potential: Potential | None = None,
    L: float = 20.0,
    h: float = 0.02,
    options: MinimizeOptions | None = None,
    init=None,
) -> LayerSolution:
    """Minimize the layer energy on [-L, L] starting from a tanh profile.

    Non-convergence is reported through ``converged=False``.
    """
    if L < 10:
        raise LayerError(f"L must be at least 10, got {L}")
    if h > 0.05 * L:
        raise LayerError(f"h = {h} is coarser than 0.05 L")
    potential = potential or double_well()
    lo, hi = _wells(potential)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    g = build_grid(1, [(-L, L)], h)
    fn = init if init is not None else np.tanh
    u0 = sample_field(g, lambda x: mid + half * fn(x), tails=[(lo, hi)], exterior_rule="constant")
    prob = layer_problem(u0, s, potential)
    opts = options or MinimizeOptions(max_iterations=50000)
    rep = minimize(u0, prob, opts)
    u = rep.field
    v = u.values
    n = v.size
    midpoint = float(v[n // 2]) if n % 2 else float(0.5 * (v[n // 2 - 1] + v[n // 2]))
    return LayerSolution(
        field=u,
        s=s,
        residual=check_stationarity(u, prob),
        monotone=bool(np.all(np.diff(v) >= -1e-9)),
        midpoint=midpoint,
        end_gap=float(max(abs(v[0] - lo), abs(v[-1] - hi))),
        converged=rep.converged,
        report=rep,
    )


def layer_energy_profile(layer: LayerSolution, r: float, potential: Potential | None = None) -> float:
    """E(u0; (-r, r)) with the unnormalized kernel."""
    L = float(layer.field.grid.upper[0])
    if r > L / 2:
        raise LayerError(f"window radius {r} exceeds L/2 = {L / 2}")
    box = [(-r, r)]
    kin = interaction_energy(layer.field, box, KernelSpec(layer.s, 1))
    return kin + potential_energy(layer.field, box, potential or double_well())


def align_shift(u: Field, v: Field, max_shift: int = 200) -> tuple[int, float]:
    """Integer node shift minimizing the sup distance between two profiles on their overlap."""
    a, b = u.values, v.values
    best = (0, float(np.max(np.abs(a - b))))
    for k in range(-max_shift, max_shift + 1):
        if k == 0:
            continue
        d = a[max(0, k): a.size + min(0, k)] - b[max(0, -k): b.size + min(0, -k)]
        val = float(np.max(np.abs(d)))
        if val < best[1]:
            best = (k, val)
    return best
