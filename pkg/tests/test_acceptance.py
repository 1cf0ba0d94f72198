"""Acceptance criteria, one test each, at their stated tolerances.

Every test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import json
import time

import numpy as np
import pytest

from fracphase.checks import (
    gradient_check,
    identity_check,
    scaling_check,
    spectral_oracle,
    submodularity_check,
    truncation_check,
)
from fracphase.cli import EXIT_OK, main
from fracphase.experiments import density_scan, energy_bounds_check
from fracphase.layers import solve_layer

S_VALUES = [0.3, 0.5, 0.7]
EPS = [0.2, 0.1, 0.05, 0.025]


def test_01_spectral_oracle(record):
    r = spectral_oracle()
    record("01 spectral oracle", r.passed, f"max relative error {r.value:.2e} < 1e-3 over {r.cases} cases")
    assert r.passed and r.value < 1e-3


def test_02_gradient(record):
    r = gradient_check(n_fields=20)
    record("02 gradient vs finite differences", r.passed, f"max relative error {r.value:.2e} < 1e-5, {r.cases} fields")
    assert r.passed and r.value < 1e-5 and r.cases == 60


def test_03_submodularity(record):
    r = submodularity_check(n_pairs=100)
    record("03 submodularity", r.passed, f"min slack {r.value:.2e} >= -1e-9 over {r.cases} pairs")
    assert r.passed and r.value >= -1e-9 and r.cases == 100


def test_04_energy_identity(record):
    r = identity_check(n_pairs=20)
    record("04 quotient energy identity", r.passed, f"max normalized error {r.value:.2e} <= 1e-6 over {r.cases} pairs")
    assert r.passed and r.value <= 1e-6 and r.cases == 20


def test_05_layers(record):
    rows, ok = [], True
    for s in S_VALUES:
        lay = solve_layer(s, L=20.0, h=0.02)
        u = lay.field.values
        anti = float(np.max(np.abs(u + u[::-1])))
        good = lay.monotone and lay.residual < 1e-6 and lay.end_gap < 0.05 and anti <= 1e-7
        ok &= good
        rows.append(f"s={s}: residual {lay.residual:.1e}, end gap {lay.end_gap:.3f}, antisymmetry {anti:.1e}")
    record("05 transition layers", ok, "; ".join(rows))
    assert ok


def test_06_scaling(record):
    r = scaling_check()
    record("06 scaling identity", r.passed, f"max relative error {r.value:.2e} < 1e-3")
    assert r.passed and r.value < 1e-3


def test_07_energy_bounds(record):
    rep = energy_bounds_check(S_VALUES, EPS)
    ratios = {s: rep.derived[s]["ratio"] for s in S_VALUES if s in rep.derived}
    ok = rep.passed and len(ratios) == 3 and all(r <= 10 for r in ratios.values())
    record("07 energy bounds", ok, ", ".join(f"s={s}: max/min {r:.2f}" for s, r in ratios.items()) + " (<= 10)")
    assert ok


def test_08_density(record):
    rep = density_scan(S_VALUES, EPS)
    ok = rep.passed and len(rep.derived) == 3
    parts = []
    for s, d in rep.derived.items():
        ok &= d["ratio"] <= 10 and all(0.3 <= r <= 3 for r in d["consecutive"])
        parts.append(f"s={s}: C/c {d['ratio']:.2f}, steps [{min(d['consecutive']):.2f}, {max(d['consecutive']):.2f}]")
    record("08 density estimates", ok, "; ".join(parts))
    assert ok


def _cli(args, out):
    t0 = time.perf_counter()
    code = main([*args, "--out", str(out), "--no-plots"])
    elapsed = time.perf_counter() - t0
    verdict = json.loads((out / "verdict.json").read_text())
    return code, verdict, elapsed


@pytest.mark.slow
@pytest.mark.parametrize("kernel", [["--kernel.s", "0.7"], ["--kernel.s", "0.4", "--kernel.R", "2"]],
                         ids=["s0.7_full", "s0.4_truncated"])
def test_09_planelike(record, tmp_path, kernel):
    code, verdict, elapsed = _cli(["planelike", *kernel], tmp_path)
    a = {x["name"]: x for x in verdict["assertions"]}
    ok = code == EXIT_OK and verdict["passed"] and elapsed < 1800
    ok &= all(k in a for k in ("interface_width", "same_M0_within_one_step", "birkhoff"))
    summary = json.loads((tmp_path / "planelike.json").read_text())
    detail = (f"M0 {summary['M0']['M0']}, width {a['interface_width']['value']:.2f} <= {a['interface_width']['bound']}, "
              f"Birkhoff {a['birkhoff']['value']:.1e} <= 1e-4, {elapsed / 60:.1f} min < 30 min"
              if "interface_width" in a else f"assertions {a}")
    record(f"09 plane-like minimizers ({' '.join(kernel)})", ok, detail)
    assert ok, verdict


@pytest.mark.slow
def test_10_multibump(record, tmp_path):
    code, verdict, elapsed = _cli(["multibump"], tmp_path)
    orbit = json.loads((tmp_path / "orbit_markers.json").read_text())
    a = {x["name"]: x for x in verdict["assertions"]}
    ok = code == EXIT_OK and verdict["passed"] and elapsed < 900
    ok &= len(orbit["markers"]) == 4 and len(orbit["conditions"]) == 5 and all(orbit["conditions"].values())
    ok &= orbit["residual"] < 1e-6 and a["negative_control_loses_interior_bump"]["passed"]
    record("10 multibump orbit", ok,
           f"{len(orbit['markers'])} markers, {sum(orbit['conditions'].values())}/5 conditions, "
           f"residual {orbit['residual']:.1e}, control lost segments {a['negative_control_loses_interior_bump']['value']}, "
           f"{elapsed / 60:.1f} min < 15 min")
    assert ok, verdict


def test_11_truncation(record):
    r = truncation_check(n_fields=100)
    record("11 truncation lowers the action", r.passed, f"min slack {r.value:.2e} >= -1e-10 over {r.cases} fields")
    assert r.passed and r.value >= -1e-10


def test_12_check_determinism(record, tmp_path):
    codes = [main(["check", "--out", str(tmp_path / d), "--seed", "0"]) for d in ("a", "b")]
    same = (tmp_path / "a" / "verdict.json").read_bytes() == (tmp_path / "b" / "verdict.json").read_bytes()
    ok = same and codes == [EXIT_OK, EXIT_OK]
    record("12 deterministic check verdicts", ok, f"exit codes {codes}, verdicts bit-identical: {same}")
    assert ok
