"""Box-constrained minimization of the discrete energies.

The main scheme is projected gradient descent with a Barzilai-Borwein step
and Armijo backtracking.  Energy decreases are measured with
:meth:`EnergyProblem.delta`, which avoids subtracting two large energies and
keeps the line search reliable down to tiny residuals.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .energy import EnergyProblem
from .grid import Field, field_to_csv

log = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 60


class MinimizeError(ValueError):
    pass


@dataclass(frozen=True)
class MinimizeOptions:
    """Solver settings.

    The tolerance applies to the sup-norm of the projected gradient divided by
    the cell volume, i.e. the nodal Euler-Lagrange residual.
    """

    max_iterations: int = 20000
    gradient_tolerance: float = 1e-7
    step_rule: str = "bb"  # "bb" or "monotone"
    box: tuple = (-np.inf, np.inf)
    restarts: int = 1
    seed: int = 0
    perturbation: float = 0.05
    workers: int = 1

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise MinimizeError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise MinimizeError("max_iterations must be at least 1")
        if self.restarts < 1:
            raise MinimizeError("restarts must be at least 1")
        if self.step_rule not in ("bb", "monotone"):
            raise MinimizeError(f"unknown step rule {self.step_rule!r}")
        if not self.box[0] < self.box[1]:
            raise MinimizeError("empty box")


@dataclass
class MinimizeReport:
    field: Field
    iterations: int
    residual: float
    energy_trajectory: list
    converged: bool
    status: str = "converged"
    step_bound: float | None = None
    x: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def energy(self) -> float:
        return self.energy_trajectory[-1]

    def to_dict(self) -> dict:
        d = {
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "status": self.status,
            "energy": self.energy,
            "energy_trajectory": list(self.energy_trajectory),
        }
        if self.step_bound is not None:
            d["step_bound"] = self.step_bound
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def write(self, json_path, csv_path=None) -> None:
        with open(json_path, "w") as fh:
            fh.write(self.to_json())
        if csv_path is not None:
            field_to_csv(self.field, csv_path)


def _bounds(problem: EnergyProblem, box) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(problem.lower, box[0]), np.minimum(problem.upper, box[1])


def projected_gradient(x, g, lo, hi) -> np.ndarray:
    """Gradient with components zeroed where a bound blocks the descent direction."""
    pg = g.copy()
    pg[(x <= lo) & (g > 0)] = 0.0
    pg[(x >= hi) & (g < 0)] = 0.0
    return pg


def check_stationarity(field: Field, problem: EnergyProblem, box=(-np.inf, np.inf)) -> float:
    """Sup-norm of the projected gradient in nodal units (gradient / h^n)."""
    if not field.grid.same_as(problem.grid):
        raise MinimizeError("field and problem live on different grids")
    x = np.array(field.values[problem.free])
    lo, hi = _bounds(problem, box)
    pg = projected_gradient(x, problem.gradient(x), lo, hi)
    return float(np.max(np.abs(pg), initial=0.0) / problem.hn)


def _run(problem: EnergyProblem, x: np.ndarray, opts: MinimizeOptions) -> MinimizeReport:
    lo, hi = _bounds(problem, opts.box)
    if np.any(x < lo - 1e-15) or np.any(x > hi + 1e-15):
        raise MinimizeError("initial field violates the box constraints")
    x = np.clip(x, lo, hi)
    E = problem.energy(x)
    if not np.isfinite(E):
        raise MinimizeError("energy is not finite at the initial field")
    traj = [E]
    g = problem.gradient(x)
    tol = opts.gradient_tolerance * problem.hn
    step_bound = None
    if opts.step_rule == "monotone":
        step_bound = 1.0 / problem.lipschitz_bound()
        alpha = step_bound
    else:
        alpha = 1.0 / problem.lipschitz_bound()
    status = "max_iterations"
    it = 0
    res = np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0)
    while True:
        if res <= tol:
            status = "converged"
            break
        if it >= opts.max_iterations:
            break
        it += 1
        if opts.step_rule == "monotone":
            xn = np.clip(x - alpha * g, lo, hi)
            d = xn - x
            dE = problem.delta(x, d)
        else:
            a = alpha
            for _ in range(MAX_HALVINGS):
                xn = np.clip(x - a * g, lo, hi)
                d = xn - x
                dE = problem.delta(x, d)
                if dE <= ARMIJO * np.dot(g, d):
                    break
                a *= 0.5
            else:
                status = "line_search_failed"
                log.warning("line search failed after %d halvings at iteration %d", MAX_HALVINGS, it)
                break
        if dE > 0:
            # only possible for the monotone scheme through rounding
            dE = 0.0
        gn = problem.gradient(xn)
        if opts.step_rule == "bb":
            sy = np.dot(d, gn - g)
            alpha = np.dot(d, d) / sy if sy > 0 else 1.0 / problem.lipschitz_bound() * 16
        x, g = xn, gn
        E = E + dE
        traj.append(E)
        res = np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0)
    # re-anchor the last energy with a direct evaluation
    traj[-1] = min(traj[-1], problem.energy(x)) if len(traj) > 1 else traj[-1]
    return MinimizeReport(
        problem.field(x),
        it,
        float(res / problem.hn),
        traj,
        status == "converged",
        status,
        step_bound,
        x,
    )


def minimize(initial: Field | None, problem: EnergyProblem, options: MinimizeOptions | None = None):
    """Minimize ``problem`` from ``initial`` (or the problem's base field).

    With ``restarts > 1`` further runs start from seeded perturbations of the
    initial field and the report with the lowest energy is returned; all
    reports are available as ``report.runs``.
    """
    opts = options or MinimizeOptions()
    if initial is not None and not initial.grid.same_as(problem.grid):
        raise MinimizeError("initial field and problem live on different grids")
    x0 = problem.x0() if initial is None else np.array(initial.values[problem.free])
    lo, hi = _bounds(problem, opts.box)
    if np.any(x0 < lo - 1e-15) or np.any(x0 > hi + 1e-15):
        raise MinimizeError("initial field violates the box constraints")
    rng = np.random.default_rng(opts.seed)
    starts = [x0]
    for _ in range(opts.restarts - 1):
        starts.append(np.clip(x0 + opts.perturbation * rng.standard_normal(x0.shape), lo, hi))
    if opts.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(opts.workers) as ex:
            reports = list(ex.map(lambda xs: _run(_clone(problem), xs, opts), starts))
    else:
        reports = [_run(problem, xs, opts) for xs in starts]
    best = min(range(len(reports)), key=lambda i: reports[i].energy)
    out = reports[best]
    out.runs = reports
    return out


def _clone(problem: EnergyProblem) -> EnergyProblem:
    import copy

    p = copy.copy(problem)
    p._cache = None
    return p


def pointwise_min_of_runs(reports, cluster_tol: float = 1e-6) -> Field:
    """Pointwise infimum of converged runs whose energies cluster around the best."""
    reports = list(reports)
    if not reports:
        raise MinimizeError("no reports given")
    if not all(r.converged for r in reports):
        raise MinimizeError("all runs must have converged")
    g = reports[0].field.grid
    if not all(r.field.grid.same_as(g) for r in reports):
        raise MinimizeError("runs live on different grids")
    energies = np.array([r.energy for r in reports])
    best = energies.min()
    spread = energies.max() - best
    if spread > cluster_tol * max(abs(best), 1.0):
        raise MinimizeError(
            f"energy spread {spread:.3e} exceeds the cluster tolerance; the runs found different minima"
        )
    vals = np.min(np.stack([r.field.values for r in reports]), axis=0)
    return reports[0].field.with_values(vals)
