"""Command-line driver.

Every subcommand reads a closed-world ``key = value`` configuration (file
and/or flags), validates it before computing anything, and writes
``manifest.json``, ``verdict.json`` and the module outputs into ``--out``.
The exit status is 0 exactly when every assertion in the verdict passes.
"""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__

log = logging.getLogger("fracphase")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ERROR, EXIT_INTERRUPTED = 0, 1, 2, 3, 130


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# schema


def _floats(text: str) -> list:
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _ints(text: str) -> list:
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _directions(text: str) -> list:
    out = []
    for item in str(text).replace(" ", "").split(","):
        if not item:
            continue
        a, b = item.split(":")
        out.append((int(a), int(b)))
    return out


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _radius(text) -> float:
    t = str(text).strip().lower()
    return math.inf if t in ("inf", "infinity", "none") else float(t)


def _in_open(lo, hi):
    return lambda v: None if lo < v < hi else f"must lie in ({lo}, {hi}), got {v}"


def _positive(v):
    return None if v > 0 else f"must be positive, got {v}"


def _all(check):
    def f(vals):
        if not vals:
            return "must not be empty"
        for v in vals:
            msg = check(v)
            if msg:
                return msg
        return None

    return f


def _choice(*options):
    return lambda v: None if v in options else f"must be one of {list(options)}, got {v!r}"


@dataclass(frozen=True)
class Key:
    parse: Callable[[Any], Any]
    default: Any
    check: Callable[[Any], str | None] | None
    help: str


COMMON = {
    "caps.max_nodes": Key(int, 2_000_000, _positive, "largest grid (node count) any solve may use"),
    "caps.max_iterations": Key(int, 50000, _positive, "iteration cap per minimization"),
    "solver.tolerance": Key(float, 1e-7, _positive, "projected-gradient tolerance in nodal units"),
    "solver.workers": Key(int, 1, _positive, "threads for independent solves"),
}

SCHEMA: dict[str, dict[str, Key]] = {
    "layer": {
        "kernel.s": Key(float, 0.7, _in_open(0, 1), "fractional order s"),
        "domain.L": Key(float, 20.0, lambda v: None if v >= 10 else f"must be at least 10, got {v}",
                        "half-length of the domain, domain units"),
        "domain.h": Key(float, 0.02, _positive, "grid spacing, domain units"),
        "potential.kind": Key(str, "double_well", _choice("double_well", "multiwell"), "double well or periodic multiwell"),
    },
    "gamma-scan": {
        "scan.s_values": Key(_floats, [0.3, 0.5, 0.7], _all(_in_open(0, 1)), "comma list of s"),
        "scan.eps_values": Key(_floats, [0.2, 0.1, 0.05, 0.025], _all(_in_open(0, 1)), "comma list of decreasing eps"),
        "scan.boundary": Key(str, "antisymmetric", _choice("antisymmetric", "plus"), "exterior data"),
    },
    "energy-bounds": {
        "scan.s_values": Key(_floats, [0.3, 0.5, 0.7], _all(_in_open(0, 1)), "comma list of s"),
        "scan.eps_values": Key(_floats, [0.2, 0.1, 0.05, 0.025], _all(_in_open(0, 1)), "comma list of decreasing eps"),
        "scan.band": Key(float, 10.0, lambda v: None if v >= 1 else f"must be at least 1, got {v}", "allowed max/min ratio"),
    },
    "density": {
        "scan.s_values": Key(_floats, [0.3, 0.5, 0.7], _all(_in_open(0, 1)), "comma list of s"),
        "scan.eps_values": Key(_floats, [0.2, 0.1, 0.05, 0.025], _all(_in_open(0, 1)), "comma list of decreasing eps"),
        "scan.band": Key(float, 10.0, lambda v: None if v >= 1 else f"must be at least 1, got {v}", "allowed C/c ratio"),
        "scan.theta1": Key(float, 0.9, _in_open(0, 1), "pinning threshold for |u(0)|"),
        "scan.theta2": Key(float, 0.9, _in_open(0, 1), "interface threshold for |u|"),
    },
    "planelike": {
        "kernel.s": Key(float, 0.7, _in_open(0, 1), "fractional order s"),
        "kernel.R": Key(_radius, math.inf, _positive, "truncation radius, domain units (inf for none)"),
        "medium.q_lo": Key(float, 1.0, _positive, "checkerboard lower value"),
        "medium.q_hi": Key(float, 2.0, _positive, "checkerboard upper value"),
        "medium.tau": Key(float, 1.0, lambda v: None if v >= 1 else f"must be at least 1, got {v}", "lattice period, domain units"),
        "planelike.directions": Key(_directions, [(0, 1), (1, 1), (1, 2)], _all(lambda d: None if d != (0, 0) else "zero direction"),
                                    "comma list of integer directions a:b"),
        "planelike.schedule": Key(_floats, [4.0, 5.0, 6.0, 8.0], _all(_positive), "increasing strip widths M / tau"),
        "planelike.h": Key(float, 0.1, _positive, "grid spacing, domain units"),
        "planelike.restarts": Key(int, 4, _positive, "restarts per minimization"),
        "planelike.birkhoff_tol": Key(float, 1e-4, _positive, "allowed Birkhoff violation"),
    },
    "multibump": {
        "orbit.wells": Key(_ints, [0, 1, 0], lambda v: None if len(v) >= 2 else "needs at least two wells", "comma list of integer wells"),
        "kernel.s": Key(float, 0.7, _in_open(0, 1), "fractional order s"),
        "orbit.a1": Key(float, 1.0, _positive, "mean of a(x)"),
        "orbit.a2": Key(float, 0.5, lambda v: None if v >= 0 else f"must be nonnegative, got {v}", "amplitude of a(x)"),
        "orbit.eps_mod": Key(float, 0.1, lambda v: None if 0 < v <= 0.2 else f"must lie in (0, 0.2], got {v}", "frequency of a(x)"),
        "orbit.threshold": Key(float, 0.1, _in_open(0, 0.5), "closeness threshold to the wells"),
        "domain.L": Key(float, 60.0, _positive, "half-length of the domain, domain units"),
        "domain.h": Key(float, 0.05, _positive, "grid spacing, domain units"),
        "orbit.negative_control": Key(_bool, True, None, "also run a2 = 0 and require a lost interior bump"),
    },
    "check": {
        "check.names": Key(lambda t: [v for v in str(t).replace(" ", "").split(",") if v] if isinstance(t, str) else list(t),
                           ["spectral_oracle", "gradient_check", "submodularity", "energy_identity", "truncation",
                            "scaling_identity"], None, "comma list of checks"),
    },
}


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    out: str = "out"
    seed: int = 0
    plots: bool = True
    sources: dict = dc_field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        params = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in params.items()}
        return {"subcommand": self.subcommand, "params": params, "out": self.out, "seed": self.seed,
                "plots": self.plots}


def schema_for(subcommand: str) -> dict:
    if subcommand not in SCHEMA:
        raise ConfigError(f"unknown subcommand {subcommand!r}; choose from {sorted(SCHEMA)}")
    return {**SCHEMA[subcommand], **COMMON}


def read_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw.strip()!r}")
        k, v = (p.strip() for p in line.split("=", 1))
        if k in out:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def parse_config(subcommand: str, file_values: dict | None = None, overrides: dict | None = None,
                 out: str = "out", seed: int = 0, plots: bool = True) -> RunConfig:
    """Merge defaults, file values and overrides (later wins), then validate."""
    schema = schema_for(subcommand)
    params = {k: key.default for k, key in schema.items()}
    sources = {k: "default" for k in schema}
    for origin, values in (("file", file_values or {}), ("flag", overrides or {})):
        for k, raw in values.items():
            if k not in schema:
                close = difflib.get_close_matches(k, list(schema), n=1)
                hint = f"; did you mean {close[0]!r}?" if close else ""
                raise ConfigError(f"{k}: unknown key for '{subcommand}'{hint}")
            try:
                params[k] = schema[k].parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{k}: cannot parse {raw!r} ({exc})") from None
            sources[k] = origin
    for k, key in schema.items():
        if key.check is not None:
            msg = key.check(params[k])
            if msg:
                raise ConfigError(f"{k}: {msg}")
    cfg = RunConfig(subcommand, params, out, int(seed), bool(plots), sources)
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: RunConfig) -> None:
    p = cfg.params
    cap = p["caps.max_nodes"]
    sub = cfg.subcommand
    if sub in ("layer", "multibump"):
        if p["domain.h"] > 0.05 * p["domain.L"]:
            raise ConfigError(f"domain.h: {p['domain.h']} is coarser than 0.05 * domain.L")
        nodes = 2 * p["domain.L"] / p["domain.h"] + 1
        if nodes > cap:
            raise ConfigError(f"caps.max_nodes: the domain needs {nodes:.0f} nodes, cap is {cap}")
    if sub in ("gamma-scan", "energy-bounds", "density"):
        eps = p["scan.eps_values"]
        if len(eps) < 4:
            raise ConfigError("scan.eps_values: need at least 4 values")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("scan.eps_values: must be strictly decreasing")
        nodes = 2 * (1 + min(eps)) / (min(eps) / 16) + 1
        if nodes > cap:
            raise ConfigError(f"caps.max_nodes: the smallest eps needs {nodes:.0f} nodes, cap is {cap}")
    if sub == "planelike":
        if p["medium.q_hi"] < p["medium.q_lo"]:
            raise ConfigError("medium.q_hi: must be at least medium.q_lo")
        if p["kernel.s"] <= 0.5 and math.isinf(p["kernel.R"]):
            raise ConfigError("kernel.R: s <= 1/2 needs a finite truncation radius")
        if math.isfinite(p["kernel.R"]) and p["kernel.R"] < 10 * p["planelike.h"]:
            raise ConfigError("kernel.R: must be at least 10 grid spacings")
        sched = p["planelike.schedule"]
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("planelike.schedule: must increase")
        tau, h = p["medium.tau"], p["planelike.h"]
        for a, b in p["planelike.directions"]:
            g = math.gcd(a, b)
            a, b = a // g, b // g
            nodes = ((max(sched) + 4) * tau / h) * (math.hypot(a, b) * tau / h)
            if nodes > cap:
                raise ConfigError(f"caps.max_nodes: direction {a}:{b} needs about {nodes:.0f} nodes, cap is {cap}")
    if sub == "multibump":
        if p["orbit.a2"] >= p["orbit.a1"]:
            raise ConfigError("orbit.a2: must be smaller than orbit.a1")
    if sub == "check":
        from .checks import SUITE

        bad = [n for n in p["check.names"] if n not in SUITE]
        if bad:
            raise ConfigError(f"check.names: unknown checks {bad}; available {list(SUITE)}")


# --------------------------------------------------------------------------
# runners: each returns (assertions, artifacts, summary)


def _assert(name, passed, value=None, bound=None, **extra) -> dict:
    d = {"name": name, "passed": bool(passed), "value": _jsonable(value), "bound": _jsonable(bound)}
    d.update({k: _jsonable(v) for k, v in extra.items()})
    return d


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _options(cfg: RunConfig, **kw):
    from .minimize import MinimizeOptions

    return MinimizeOptions(max_iterations=cfg["caps.max_iterations"], gradient_tolerance=cfg["solver.tolerance"],
                           seed=cfg.seed, **kw)


def _path(cfg, name) -> str:
    return os.path.join(cfg.out, name)


def run_layer(cfg: RunConfig):
    from .energy import double_well, multiwell_periodic
    from .layers import solve_layer

    s = cfg["kernel.s"]
    pot = double_well() if cfg["potential.kind"] == "double_well" else multiwell_periodic()
    layer = solve_layer(s, pot, cfg["domain.L"], cfg["domain.h"], _options(cfg))
    v = layer.field.values
    lo, hi = min(pot.wells), max(pot.wells)
    anti = float(np.max(np.abs((v - (lo + hi) / 2) + (v[::-1] - (lo + hi) / 2))))
    artifacts = [_path(cfg, "layer.csv"), _path(cfg, "layer.json")]
    layer.write_csv(artifacts[0])
    summary = {**layer.to_dict(), "antisymmetry": anti}
    with open(artifacts[1], "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
    if cfg.plots:
        from .plotting import plot_layer

        artifacts.append(plot_layer(layer, _path(cfg, "layer.png")))
    assertions = [
        _assert("converged", layer.converged, layer.report.iterations),
        _assert("monotone", layer.monotone),
        _assert("residual", layer.residual < 1e-6, layer.residual, 1e-6),
        _assert("end_gap", layer.end_gap < 0.05, layer.end_gap, 0.05),
        _assert("antisymmetry", anti <= 1e-7, anti, 1e-7),
    ]
    return assertions, artifacts, summary


def _scan_outputs(cfg, rep, metric_plots):
    artifacts = rep.write(cfg.out)
    if cfg.plots:
        from .plotting import plot_scan

        for metric, norm in metric_plots:
            suffix = f"{metric}_over_eps" if norm else metric
            artifacts.append(plot_scan(rep, metric, _path(cfg, f"{rep.kind}_{suffix}.png"), normalize_eps=norm))
    assertions = [_assert(f"{a['name']}[s={a['s']:g}]", a["passed"], a["value"], a["bound"]) for a in rep.assertions]
    for c in rep.cells:
        if not c.converged:
            assertions.append(_assert(f"converged[s={c.s:g},eps={c.eps:g}]", False, c.residual))
    return assertions, artifacts, rep.to_dict()


def run_gamma_scan(cfg: RunConfig):
    from .experiments import gamma_scan

    rep = gamma_scan(cfg["scan.s_values"], cfg["scan.eps_values"], boundary=cfg["scan.boundary"],
                     workers=cfg["solver.workers"], options=_options(cfg))
    if cfg["scan.boundary"] == "plus":
        zero = all(c.energy == 0.0 for c in rep.cells)
        extra = [_assert("trivial_energy_zero", zero, max(c.energy for c in rep.cells), 0.0)]
    else:
        extra = []
    a, art, summ = _scan_outputs(cfg, rep, [("energy", False), ("interface_fraction", False)])
    return a + extra, art, summ


def run_energy_bounds(cfg: RunConfig):
    from .experiments import energy_bounds_check

    rep = energy_bounds_check(cfg["scan.s_values"], cfg["scan.eps_values"], band=cfg["scan.band"],
                              workers=cfg["solver.workers"], options=_options(cfg))
    return _scan_outputs(cfg, rep, [("energy", False)])


def run_density(cfg: RunConfig):
    from .experiments import density_scan

    rep = density_scan(cfg["scan.s_values"], cfg["scan.eps_values"], theta1=cfg["scan.theta1"],
                       theta2=cfg["scan.theta2"], band=cfg["scan.band"], workers=cfg["solver.workers"],
                       options=_options(cfg))
    return _scan_outputs(cfg, rep, [("measure", True)])


def run_planelike(cfg: RunConfig):
    from .energy import checkerboard
    from .kernels import KernelSpec
    from .planelike import DirectionSpec, estimate_M0, write_result

    tau = cfg["medium.tau"]
    kernel = KernelSpec(cfg["kernel.s"], 2, R=cfg["kernel.R"])
    medium = checkerboard(cfg["medium.q_lo"], cfg["medium.q_hi"], tau)
    dirs = [DirectionSpec.of(d, tau) for d in cfg["planelike.directions"]]
    opts = _options(cfg, restarts=cfg["planelike.restarts"], workers=cfg["solver.workers"])
    rep = estimate_M0(dirs, cfg["planelike.schedule"], medium, kernel, cfg["planelike.h"], options=opts)
    artifacts = []
    summary = {"M0": rep.to_dict(), "runs": []}
    assertions = []
    tol = cfg["planelike.birkhoff_tol"]
    worst_birkhoff = 0.0
    for (key, M), res in rep.results.items():
        stem = _path(cfg, f"planelike_{key.replace(',', '_')}_M{M:g}")
        artifacts += write_result(res, stem)
        if cfg.plots:
            from .plotting import plot_planelike

            artifacts.append(plot_planelike(res, stem + ".png"))
        summary["runs"].append({"direction": key, "M": M, **res.to_dict()})
        if not res.converged:
            assertions.append(_assert(f"converged[{key},M={M:g}]", False, res.residual))
        worst_birkhoff = max(worst_birkhoff, res.birkhoff["worst"])
    M0 = rep.M0
    assertions.append(_assert("unconstrained_within_schedule", M0 is not None, rep.per_direction))
    spread = rep.spread_steps
    assertions.append(_assert("same_M0_within_one_step", spread is not None and spread <= 1, spread, 1))
    if M0 is not None:
        widths = {k: rep.results[(k, m)].width for k, m in rep.per_direction.items()}
        worst_width = max(widths.values())
        assertions.append(_assert("interface_width", worst_width <= M0 * tau, worst_width, M0 * tau, per_direction=widths))
    assertions.append(_assert("birkhoff", worst_birkhoff <= tol, worst_birkhoff, tol))
    with open(_path(cfg, "planelike.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
    artifacts.append(_path(cfg, "planelike.json"))
    return assertions, artifacts, summary


def run_multibump(cfg: RunConfig):
    from .multibump import OrbitSpec, solve_multibump

    spec = OrbitSpec(tuple(cfg["orbit.wells"]), cfg["kernel.s"], cfg["orbit.a1"], cfg["orbit.a2"], cfg["orbit.eps_mod"],
                     cfg["orbit.threshold"], cfg["domain.L"], cfg["domain.h"])
    opts = _options(cfg)
    orbit = solve_multibump(spec, opts, workers=cfg["solver.workers"])
    artifacts = [_path(cfg, "orbit.csv"), _path(cfg, "orbit_markers.json")]
    orbit.write_csv(artifacts[0])
    with open(artifacts[1], "w") as fh:
        fh.write(orbit.markers_json())
    if cfg.plots:
        from .plotting import plot_orbit

        artifacts.append(plot_orbit(orbit, _path(cfg, "orbit.png")))
    assertions = [_assert(name, ok) for name, ok in orbit.conditions.items()]
    assertions.append(_assert("residual", orbit.residual < 1e-6, orbit.residual, 1e-6))
    summary = {"orbit": orbit.to_dict(), "spec": spec.to_dict()}
    if cfg["orbit.negative_control"] and len(orbit.wells) > 2:
        ctrl_spec = OrbitSpec(spec.wells, spec.s, spec.a1, 0.0, spec.eps_mod, spec.threshold, spec.L, spec.h)
        ctrl = solve_multibump(ctrl_spec, opts, workers=cfg["solver.workers"])
        lost = [j for j in ctrl.failed_segments if 0 < j < len(ctrl.wells) - 1]
        artifacts.append(_path(cfg, "control_orbit.csv"))
        ctrl.write_csv(artifacts[-1])
        artifacts.append(_path(cfg, "control_markers.json"))
        with open(artifacts[-1], "w") as fh:
            fh.write(ctrl.markers_json())
        if cfg.plots:
            from .plotting import plot_orbit

            artifacts.append(plot_orbit(ctrl, _path(cfg, "control_orbit.png")))
        assertions.append(_assert("negative_control_loses_interior_bump", bool(lost), lost))
        summary["negative_control"] = ctrl.to_dict()
    return assertions, artifacts, summary


def run_check(cfg: RunConfig):
    from .checks import run_suite

    results = run_suite(cfg.seed, cfg["check.names"])
    path = _path(cfg, "checks.json")
    with open(path, "w") as fh:
        json.dump(_jsonable([r.to_dict() for r in results]), fh, indent=2, sort_keys=True)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  value={r.value:.3e}  bound={r.bound:.1e}  "
              f"cases={r.cases}  ({r.seconds:.1f}s)")
    assertions = [_assert(r.name, r.passed, r.value, r.bound, cases=r.cases) for r in results]
    return assertions, [path], {"checks": [r.to_dict(timing=True) for r in results]}


RUNNERS = {
    "layer": run_layer,
    "gamma-scan": run_gamma_scan,
    "energy-bounds": run_energy_bounds,
    "density": run_density,
    "planelike": run_planelike,
    "multibump": run_multibump,
    "check": run_check,
}


# --------------------------------------------------------------------------
# lifecycle


def _versions() -> dict:
    return {"fracphase": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _write_json(path, obj) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; writes manifest and verdict; returns the exit status."""
    os.makedirs(cfg.out, exist_ok=True)
    manifest_path, verdict_path = _path(cfg, "manifest.json"), _path(cfg, "verdict.json")
    manifest = {
        "config": cfg.to_dict(),
        "sources": cfg.sources,
        "versions": _versions(),
        "seed": cfg.seed,
        "started": datetime.now(timezone.utc).isoformat(),
        "status": "incomplete",
        "artifacts": [],
    }
    _write_json(manifest_path, manifest)
    t0 = time.perf_counter()
    status, code, error = "complete", EXIT_OK, None
    assertions, artifacts = [], []
    try:
        assertions, artifacts, _ = RUNNERS[cfg.subcommand](cfg)
        if not all(a["passed"] for a in assertions):
            code = EXIT_FAILED
    except KeyboardInterrupt:
        status, code, error = "incomplete", EXIT_INTERRUPTED, "interrupted"
    except Exception as exc:  # module failure: keep partial artifacts, report and exit nonzero
        log.exception("run failed")
        status, code, error = "failed", EXIT_ERROR, f"{type(exc).__name__}: {exc}"
    artifacts = sorted(set(artifacts) | {os.path.join(cfg.out, f) for f in os.listdir(cfg.out)
                                         if f not in ("manifest.json", "verdict.json") and not f.endswith(".tmp")})
    verdict = {
        "subcommand": cfg.subcommand,
        "seed": cfg.seed,
        "passed": code == EXIT_OK,
        "status": status,
        "assertions": assertions,
    }
    if error:
        verdict["error"] = error
    _write_json(verdict_path, verdict)
    manifest.update(
        status=status,
        exit_code=code,
        wall_time_s=time.perf_counter() - t0,
        artifacts=[os.path.relpath(p, cfg.out) for p in artifacts] + ["verdict.json"],
    )
    if error:
        manifest["error"] = error
    _write_json(manifest_path, manifest)
    return code


def _show(value) -> str:
    if isinstance(value, list):
        return ",".join(f"{v[0]}:{v[1]}" if isinstance(v, tuple) else str(v) for v in value)
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracphase",
        description="Nonlocal phase-transition experiments. All lengths are in domain units.",
        allow_abbrev=False,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SCHEMA:
        p = sub.add_parser(name, allow_abbrev=False, help=f"run the {name} experiment",
                           description=f"Config keys for '{name}' may be given in --config or as flags below.")
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", default=None, help="output directory (default: out/<subcommand>)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
        for key, spec in schema_for(name).items():
            p.add_argument(f"--{key}", dest=key.replace(".", "__"), default=None, metavar="VALUE",
                           help=f"{spec.help} (default {_show(spec.default)})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k.replace(".", "__")) for k in schema_for(args.subcommand)
                 if getattr(args, k.replace(".", "__")) is not None}
    try:
        file_values = {}
        if args.config:
            with open(args.config) as fh:
                file_values = read_config_text(fh.read())
        cfg = parse_config(args.subcommand, file_values, overrides, out=args.out or os.path.join("out", args.subcommand),
                           seed=args.seed, plots=not args.no_plots)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = run(cfg)
    with open(_path(cfg, "verdict.json")) as fh:
        verdict = json.load(fh)
    for a in verdict["assertions"]:
        print(f"{'PASS' if a['passed'] else 'FAIL'}  {a['name']}")
    print(f"{cfg.subcommand}: {verdict['status']}, {'passed' if verdict['passed'] else 'FAILED'} -> {cfg.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
