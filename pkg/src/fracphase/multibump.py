"""Multibump orbits of (-Delta)^s u + a(x) V'(u) = 0 on the line.

``V`` is the periodic multiwell potential with wells at the integers and
``a(x) = a1 + a2 cos(eps_mod x)``.  An orbit visits a prescribed sequence of
wells; its action is ``c_{1,s}/2 * K(u) + int a V(u)``, so the stationarity
residual is the nodal residual of the equation with the normalized operator.

The construction glues single transitions placed at the pinning sites of
``a``, minimizes with the plateaus held within 1/4 of their wells, then
releases the plateau constraints and minimizes again.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .energy import EnergyProblem, Modulation, Potential, cosine_modulation, multiwell_periodic, operator_for
from .grid import Field, build_grid, sample_field
from .kernels import KernelSpec, normalizing_constant
from .minimize import MinimizeOptions, MinimizeReport, check_stationarity, minimize

log = logging.getLogger(__name__)

LAYER_WIDTH = 2.0
SEGMENT_BOX = 0.25
MAX_EPS_MOD = 0.2


class MultibumpError(ValueError):
    pass


class BumpLost(MultibumpError):
    """The released minimization did not keep every segment near its well."""

    def __init__(self, orbit: "Orbit"):
        self.orbit = orbit
        super().__init__(f"segments {orbit.failed_segments} left their wells (threshold {orbit.threshold})")


@dataclass(frozen=True)
class OrbitSpec:
    """Problem statement of a multibump orbit.

    ``a2 = 0`` (homogeneous medium) is accepted so that the unpinned case can
    be run as a control.
    """

    wells: tuple
    s: float = 0.7
    a1: float = 1.0
    a2: float = 0.5
    eps_mod: float = 0.1
    threshold: float = 0.1
    L: float = 60.0
    h: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "wells", tuple(int(z) for z in self.wells))
        if len(self.wells) < 2:
            raise MultibumpError("an orbit needs at least two wells")
        if not 0 < self.s < 1:
            raise MultibumpError(f"s must lie in (0, 1), got {self.s}")
        if not (self.a1 > self.a2 >= 0):
            raise MultibumpError("the modulation needs a1 > a2 >= 0")
        if not self.eps_mod > 0:
            raise MultibumpError("eps_mod must be positive")
        if not 0 < self.threshold < 0.5:
            raise MultibumpError("threshold must lie in (0, 1/2)")
        if not (self.L > 0 and 0 < self.h <= 0.05 * self.L):
            raise MultibumpError("need L > 0 and 0 < h <= 0.05 L")

    @property
    def modulation(self) -> Modulation:
        return cosine_modulation(self.a1, self.a2, self.eps_mod)

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.s, 1)

    def to_dict(self) -> dict:
        return {
            "wells": list(self.wells),
            "s": self.s,
            "a1": self.a1,
            "a2": self.a2,
            "eps_mod": self.eps_mod,
            "threshold": self.threshold,
            "L": self.L,
            "h": self.h,
        }


@dataclass
class Orbit:
    field: Field
    wells: tuple
    markers: list
    residual: float
    segment_distances: list
    conditions: dict
    threshold: float
    converged: bool
    modulation: Modulation
    energy: float = float("nan")
    warnings: list = dc_field(default_factory=list)
    reports: dict = dc_field(default_factory=dict, repr=False)

    @property
    def failed_segments(self) -> list:
        return [j for j, d in enumerate(self.segment_distances) if not d < self.threshold]

    @property
    def ok(self) -> bool:
        return all(self.conditions.values())

    def to_dict(self) -> dict:
        return {
            "wells": list(self.wells),
            "markers": [float(b) for b in self.markers],
            "residual": self.residual,
            "segment_distances": [float(d) for d in self.segment_distances],
            "conditions": dict(self.conditions),
            "threshold": self.threshold,
            "converged": self.converged,
            "energy": self.energy,
            "failed_segments": self.failed_segments,
            "warnings": list(self.warnings),
        }

    def markers_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path) -> None:
        x = self.field.grid.axis_coords(0)
        a = self.modulation(x)
        np.savetxt(path, np.column_stack([x, self.field.values, a]), delimiter=",",
                   header="x,u,a", comments="", fmt="%.17g")


# --------------------------------------------------------------------------
# sequences and truncation


def densify_sequence(wells: Sequence[int]) -> list:
    """Insert the intermediate integers so consecutive wells differ by one."""
    wells = [int(z) for z in wells]
    if len(wells) < 2:
        raise MultibumpError("need at least two wells")
    out = [wells[0]]
    for z in wells[1:]:
        step = 1 if z > out[-1] else -1
        while out[-1] != z:
            out.append(out[-1] + step)
    return out


def truncate_orbit(field: Field, zeta: int) -> Field:
    """Pointwise min{u, zeta + 1}, tails included."""
    cap = zeta + 1
    tails = None
    if field.tails is not None:
        tails = [None if t is None else tuple(min(v, cap) for v in t) for t in field.tails]
    return Field(field.grid, np.minimum(field.values, cap), tails, field.exterior_rule, field.box)


def action_problem(field: Field, s: float, modulation: Modulation, potential: Potential | None = None,
                   container=None, lower=None, upper=None) -> EnergyProblem:
    g = field.grid
    mu = np.ones(g.shape) if container is None else g.container_weights([tuple(container)])
    return EnergyProblem(
        operator_for(KernelSpec(s, 1), g),
        potential or multiwell_periodic(),
        field,
        q_values=modulation(g.axis_coords(0)),
        mu=mu,
        free=np.ones(g.shape, bool),
        lower=lower,
        upper=upper,
        kin_coef=0.5 * normalizing_constant(1, s),
    )


def action(field: Field, s: float, modulation: Modulation, potential: Potential | None = None, container=None) -> float:
    """c_{1,s}/2 K(u) + int a V(u) over the grid (or a sub-interval), tails included."""
    return action_problem(field, s, modulation, potential, container).breakdown().total


# --------------------------------------------------------------------------
# markers


def _runs(mask: np.ndarray) -> list:
    """Maximal runs of True as (start, stop) index pairs, stop inclusive."""
    m = np.concatenate([[False], mask, [False]]).astype(np.int8)
    d = np.diff(m)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


def locate_markers(field: Field, wells: Sequence[int], threshold: float, min_plateau: float = 1.0):
    """Plateau runs of each segment and the five conditions of the orbit.

    Returns ``(markers, runs, distances, conditions)``.  Segment ``j`` is the
    run of nodes with ``|u - wells[j]| < threshold``; the first must start at
    the left end, the last must end at the right end, the middle ones are the
    first runs of at least ``min_plateau`` length after the previous segment.
    """
    u = field.values
    x = field.grid.axis_coords(0)
    n = u.size
    T = len(wells) - 1
    min_nodes = max(1, int(round(min_plateau / field.grid.h)))
    runs = [None] * (T + 1)
    pos = 0
    for j, z in enumerate(wells):
        mask = np.abs(u - z) < threshold
        cand = [r for r in _runs(mask) if r[0] >= pos]
        if j == 0:
            cand = [r for r in cand if r[0] == 0]
        elif j == T:
            cand = [r for r in cand if r[1] == n - 1]
        else:
            cand = [r for r in cand if r[1] - r[0] + 1 >= min_nodes]
        if cand:
            runs[j] = cand[0]
            pos = cand[0][1] + 1
    distances = []
    for j, z in enumerate(wells):
        r = runs[j]
        distances.append(float(np.max(np.abs(u[r[0]: r[1] + 1] - z))) if r else math.inf)
    found = all(r is not None for r in runs)
    markers = []
    if found:
        for j in range(T):
            markers += [float(x[runs[j][1]]), float(x[runs[j + 1][0]])]
    conditions = {
        "markers_found": found,
        "markers_increasing": found and all(b < c for b, c in zip(markers, markers[1:])),
        "left_segment": runs[0] is not None and distances[0] < threshold,
        "middle_segments": all(runs[j] is not None and distances[j] < threshold for j in range(1, T)),
        "right_segment": runs[T] is not None and runs[T][1] == n - 1 and distances[T] < threshold,
    }
    return markers, runs, distances, conditions


# --------------------------------------------------------------------------
# single transitions


def pinning_sites(spec: OrbitSpec, count: int, margin: float = 5 * LAYER_WIDTH) -> list:
    """The ``count`` pinning sites of a(x) nearest the origin, sorted.

    A transition in a medium of constant strength a costs an amount
    proportional to a^((2s-1)/(2s)), so for s > 1/2 transitions settle where
    a is smallest (the troughs) and for s <= 1/2 where it is largest.
    """
    period = 2 * math.pi / spec.eps_mod
    offset = period / 2 if spec.s > 0.5 else 0.0
    lim = spec.L - margin
    kmax = int(math.ceil(lim / period)) + 1
    sites = [offset + k * period for k in range(-kmax, kmax + 1)]
    sites = sorted((p for p in sites if abs(p) < lim), key=lambda p: (abs(p), p))
    if len(sites) < count:
        raise MultibumpError(f"only {len(sites)} pinning sites fit in (-L, L); need {count}, increase L")
    return sorted(sites[:count])


def _snap(v: float, h: float) -> float:
    return round(v / h) * h


def solve_transition(za: int, zb: int, spec: OrbitSpec, window: tuple | None = None, center: float | None = None,
                     options: MinimizeOptions | None = None) -> Orbit:
    """Minimize the action for one adjacent transition on a window.

    Tails ``za``/``zb`` outside the window, box [min - 1/4, max + 1/4].
    """
    if abs(za - zb) != 1:
        raise MultibumpError(f"wells {za}, {zb} are not adjacent")
    lo, hi = window if window is not None else (-spec.L, spec.L)
    lo, hi = _snap(lo, spec.h), _snap(hi, spec.h)
    if center is None:
        center = 0.5 * (lo + hi)
    g = build_grid(1, [(lo, hi)], spec.h)
    mid, half = 0.5 * (za + zb), 0.5 * (zb - za)
    u0 = sample_field(g, lambda x: mid + half * np.tanh(x - center), tails=[(za, zb)], exterior_rule="constant")
    prob = action_problem(u0, spec.s, spec.modulation, lower=min(za, zb) - SEGMENT_BOX, upper=max(za, zb) + SEGMENT_BOX)
    rep = minimize(u0, prob, options or MinimizeOptions(max_iterations=50000))
    warnings = []
    end_gap = float(max(abs(rep.field.values[0] - za), abs(rep.field.values[-1] - zb)))
    if hi - lo < 5 * LAYER_WIDTH or end_gap > spec.threshold / 2:
        warnings.append(f"narrow window: end gap {end_gap:.3g} on a window of length {hi - lo:.3g}")
        log.warning(warnings[-1])
    return _orbit(rep.field, (za, zb), spec, prob, rep, {"transition": rep}, warnings)


def reflect_values(field: Field, zeta: float) -> Field:
    """u -> 2 zeta - u, tails included."""
    tails = None
    if field.tails is not None:
        tails = [None if t is None else tuple(2 * zeta - v for v in t) for t in field.tails]
    return Field(field.grid, 2 * zeta - field.values, tails, field.exterior_rule, field.box)


def _orbit(u: Field, wells, spec: OrbitSpec, prob: EnergyProblem, rep: MinimizeReport, reports, warnings=()) -> Orbit:
    markers, _, dist, cond = locate_markers(u, wells, spec.threshold)
    return Orbit(
        field=u,
        wells=tuple(wells),
        markers=markers,
        residual=check_stationarity(u, prob),
        segment_distances=dist,
        conditions=cond,
        threshold=spec.threshold,
        converged=rep.converged,
        modulation=spec.modulation,
        energy=rep.energy,
        warnings=list(warnings),
        reports=reports,
    )


# --------------------------------------------------------------------------
# clean intervals and gluing


def _overlap(u: Field, v: Field):
    gu, gv = u.grid, v.grid
    if not math.isclose(gu.h, gv.h):
        raise MultibumpError("fields must share the grid spacing")
    xu, xv = gu.axis_coords(0), gv.axis_coords(0)
    lo, hi = max(xu[0], xv[0]), min(xu[-1], xv[-1])
    if hi < lo:
        return None
    iu = np.flatnonzero((xu >= lo - 1e-9) & (xu <= hi + 1e-9))
    iv = np.flatnonzero((xv >= lo - 1e-9) & (xv <= hi + 1e-9))
    if iu.size != iv.size or not np.allclose(xu[iu], xv[iv], atol=1e-9):
        raise MultibumpError("grids are not node-aligned on their overlap")
    return xu[iu], u.values[iu], v.values[iv]


def find_clean_interval(u: Field, v: Field, delta: float, length: float):
    """Longest interval where both fields oscillate less than delta and stay
    within delta of a common integer; None if it is shorter than ``length``."""
    ov = _overlap(u, v)
    if ov is None or not delta > 0:
        return None
    x, a, b = ov
    k = np.round(a)
    ok = (np.abs(a - k) < delta) & (np.abs(b - k) < delta)
    best = None
    # sliding window on each run of nodes near the same integer
    i = 0
    n = x.size
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and ok[j + 1] and k[j + 1] == k[i]:
            j += 1
        best = _longest_flat(x, a, b, i, j, delta, best)
        i = j + 1
    if best is None or best[1] - best[0] < length:
        return None
    return best


def _longest_flat(x, a, b, i, j, delta, best):
    """Two-pointer scan for the longest window in [i, j] with oscillation < delta in both fields."""
    from collections import deque

    qs = [deque(), deque(), deque(), deque()]  # max a, min a, max b, min b
    left = i
    for r in range(i, j + 1):
        for q, arr, sign in ((qs[0], a, 1), (qs[1], a, -1), (qs[2], b, 1), (qs[3], b, -1)):
            while q and sign * arr[q[-1]] <= sign * arr[r]:
                q.pop()
            q.append(r)
        while a[qs[0][0]] - a[qs[1][0]] >= delta or b[qs[2][0]] - b[qs[3][0]] >= delta:
            left += 1
            for q in qs:
                if q[0] < left:
                    q.popleft()
        if best is None or x[r] - x[left] > best[1] - best[0]:
            best = (float(x[left]), float(x[r]))
    return best


def glue_orbits(u: Field, v: Field, interval, spec: OrbitSpec | None = None, delta: float = 0.05,
                length: float = 0.0):
    """Cut-and-paste: u left of the interval, v right of it, linear blend across.

    Returns ``(field, excess)`` where ``excess`` is the whole-line action of
    the glued field minus the half-line actions of u (left) and v (right),
    split at the interval midpoint; it is None when ``spec`` is not given.
    """
    ov = _overlap(u, v)
    if ov is None:
        raise MultibumpError("fields do not overlap")
    x, a, b = ov
    lo, hi = interval
    sel = (x >= lo - 1e-9) & (x <= hi + 1e-9)
    if not sel.any() or hi < lo:
        raise MultibumpError("interval does not lie in the overlap")
    k = np.round(a[sel][0])
    clean = (
        np.all(np.abs(a[sel] - k) < delta)
        and np.all(np.abs(b[sel] - k) < delta)
        and np.ptp(a[sel]) < delta
        and np.ptp(b[sel]) < delta
        and hi - lo >= length
    )
    if not clean:
        raise MultibumpError(f"interval ({lo}, {hi}) is not clean at delta = {delta}")
    h = u.grid.h
    xl, xr = u.grid.axis_coords(0)[0], v.grid.axis_coords(0)[-1]
    g = build_grid(1, [(xl, xr)], h)
    X = g.axis_coords(0)
    uu = _extend(u, X)
    vv = _extend(v, X)
    lam = np.clip((X - lo) / (hi - lo), 0.0, 1.0) if hi > lo else (X >= lo).astype(float)
    tails = [(u.tails[0][0], v.tails[0][1])]
    glued = Field(g, (1 - lam) * uu + lam * vv, tails, "constant")
    excess = None
    if spec is not None:
        m = _snap(0.5 * (lo + hi), h)
        fu = Field(g, uu, [(u.tails[0][0], u.tails[0][1])], "constant")
        fv = Field(g, vv, [(v.tails[0][0], v.tails[0][1])], "constant")
        excess = (
            half_line_action(glued, spec, None)
            - half_line_action(fu, spec, (-math.inf, m))
            - half_line_action(fv, spec, (m, math.inf))
        )
    return glued, excess


def half_line_action(field: Field, spec: OrbitSpec, half) -> float:
    """Action over a half line (or the whole line for ``half=None``), far field included.

    Unlike :func:`action`, the container extends into the constant tail on its
    side, so pairs between that tail and the remaining nodes count, and so
    does the tail-tail interaction.  The latter is finite only for s > 1/2 and
    is dropped otherwise, which leaves differences of actions with equal tail
    jumps unchanged.
    """
    g = field.grid
    x = g.axis_coords(0)
    h = g.h
    lo, hi = (-math.inf, math.inf) if half is None else half
    box = (max(lo, x[0] - h / 2), min(hi, x[-1] + h / 2))
    prob = action_problem(field, spec.s, spec.modulation, container=box)
    total = prob.breakdown().total
    mu = prob.mu
    (t_lo, t_hi), = prob.op.tails
    c_lo, c_hi = field.tails[0]
    kin = prob.kin_coef
    if lo == -math.inf:
        total += kin * h * np.sum((1 - mu) * t_lo * (field.values - c_lo) ** 2)
    if hi == math.inf:
        total += kin * h * np.sum((1 - mu) * t_hi * (field.values - c_hi) ** 2)
    if lo == -math.inf or hi == math.inf:
        s = spec.s
        if s > 0.5 and c_lo != c_hi:
            gap = x[-1] - x[0] + h
            total += kin * (c_lo - c_hi) ** 2 * gap ** (1 - 2 * s) / (2 * s * (2 * s - 1))
    return float(total)


def _extend(f: Field, X: np.ndarray) -> np.ndarray:
    x = f.grid.axis_coords(0)
    out = np.interp(X, x, f.values)
    out[X < x[0] - 1e-9] = f.tails[0][0]
    out[X > x[-1] + 1e-9] = f.tails[0][1]
    return out


# --------------------------------------------------------------------------
# the full orbit


def initial_guess(spec: OrbitSpec, wells=None, workers: int = 1, options: MinimizeOptions | None = None) -> Field:
    """Glue single transitions solved around the pinning sites."""
    z = densify_sequence(spec.wells) if wells is None else list(wells)
    T = len(z) - 1
    sites = pinning_sites(spec, T)
    cuts = [-spec.L] + [0.5 * (p + q) for p, q in zip(sites, sites[1:])] + [spec.L]
    overlap = 4 * LAYER_WIDTH
    windows = [(max(-spec.L, cuts[i] - overlap), min(spec.L, cuts[i + 1] + overlap)) for i in range(T)]
    jobs = [(z[i], z[i + 1], windows[i], sites[i]) for i in range(T)]

    def run(job):
        za, zb, win, c = job
        return solve_transition(za, zb, spec, win, c, options)

    if workers > 1 and T > 1:
        with ThreadPoolExecutor(workers) as ex:
            pieces = list(ex.map(run, jobs))
    else:
        pieces = [run(j) for j in jobs]
    u = pieces[0].field
    for i in range(1, T):
        v = pieces[i].field
        iv = find_clean_interval(u, v, delta=spec.threshold, length=LAYER_WIDTH)
        if iv is None:
            raise MultibumpError(f"no clean interval between transitions {i - 1} and {i}; increase L or eps_mod^-1")
        u, _ = glue_orbits(u, v, iv, delta=spec.threshold)
    g = build_grid(1, [(-spec.L, spec.L)], spec.h)
    return Field(g, _extend(u, g.axis_coords(0)), [(z[0], z[-1])], "constant")


def solve_multibump(spec: OrbitSpec, options: MinimizeOptions | None = None, workers: int = 1,
                    strict: bool = False) -> Orbit:
    """Constrained-then-released minimization of the orbit through ``spec.wells``.

    With ``strict`` a lost segment raises :class:`BumpLost`; otherwise the
    returned orbit lists it in ``failed_segments``.
    """
    if spec.eps_mod > MAX_EPS_MOD:
        raise MultibumpError(f"eps_mod = {spec.eps_mod} exceeds {MAX_EPS_MOD}")
    z = densify_sequence(spec.wells)
    opts = options or MinimizeOptions(max_iterations=50000)
    if len(z) == 2:
        orbit = solve_transition(z[0], z[1], spec, center=pinning_sites(spec, 1)[0], options=opts)
        if strict and not orbit.ok:
            raise BumpLost(orbit)
        return orbit
    u0 = initial_guess(spec, z, workers, opts)
    _, runs, _, _ = locate_markers(u0, z, spec.threshold)
    if any(r is None for r in runs):
        raise MultibumpError("the glued initial guess does not visit every well")
    lo = np.full(u0.values.shape, min(z) - SEGMENT_BOX)
    hi = np.full(u0.values.shape, max(z) + SEGMENT_BOX)
    for j, (a, b) in enumerate(runs):
        lo[a: b + 1] = z[j] - SEGMENT_BOX
        hi[a: b + 1] = z[j] + SEGMENT_BOX
    u0 = u0.with_values(np.clip(u0.values, lo, hi))
    constrained = action_problem(u0, spec.s, spec.modulation, lower=lo, upper=hi)
    rep1 = minimize(u0, constrained, opts)
    released = action_problem(rep1.field, spec.s, spec.modulation)
    rep2 = minimize(rep1.field, released, opts)
    orbit = _orbit(rep2.field, z, spec, released, rep2, {"constrained": rep1, "released": rep2})
    if not orbit.ok:
        # without modulation the interior bump is expected to be lost
        report = log.info if spec.a2 == 0 else log.warning
        report("orbit conditions failed: %s; segments %s", orbit.conditions, orbit.failed_segments)
        if strict:
            raise BumpLost(orbit)
    return orbit
