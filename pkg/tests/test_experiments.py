import csv
import json

import numpy as np
import pytest

from fracphase.energy import checkerboard, limit_energy_indicator
from fracphase.experiments import (
    ScanError,
    density_scan,
    energy_bounds_check,
    flatness_diagnostic,
    gamma_scan,
    kinetic_factor,
    level_curve,
    limit_indicator_value,
    pinned_minimizer,
    planar_minimizer_2d,
    run_cell,
    sublevel_measure,
    zero_crossing,
)
from fracphase.grid import build_grid, sample_field
from fracphase.kernels import normalizing_constant

EPS = [0.2, 0.1, 0.05, 0.025]


def test_sublevel_measure_linear():
    # u = x on [-1, 1]: {|u| < 0.5} has length 1
    x = np.linspace(-1, 1, 11)
    assert sublevel_measure(x, x, 0.5, -1.0, 1.0) == pytest.approx(1.0)
    assert sublevel_measure(x, x, 0.5, 0.0, 1.0) == pytest.approx(0.5)
    assert sublevel_measure(x, np.ones_like(x), 0.5, -1.0, 1.0) == 0.0
    assert sublevel_measure(x, np.zeros_like(x), 0.5, -1.0, 1.0) == pytest.approx(2.0)
    assert type(sublevel_measure(x, x, 0.5, -1.0, 1.0)) is float


def test_zero_crossing():
    x = np.linspace(-1, 1, 5)
    assert zero_crossing(x, x - 0.1) == pytest.approx(0.1)
    assert zero_crossing(x, x) == 0.0
    assert np.isnan(zero_crossing(x, np.ones_like(x)))
    # the crossing nearest the centre wins
    assert zero_crossing(x, np.array([1.0, -1.0, -1.0, 1.0, 1.0])) == pytest.approx(0.25)


def test_kinetic_factor():
    assert kinetic_factor(0.5) == pytest.approx(0.5 * normalizing_constant(1, 0.5))
    assert kinetic_factor(0.5, 2) == pytest.approx(0.5 * normalizing_constant(2, 0.5))


def test_pinned_cell():
    c = run_cell(0.7, 0.1)
    assert c.converged and c.valid and c.residual < 1e-6
    assert abs(c.location) < 1e-10 and abs(c.u_origin) < 1e-10
    assert c.energy == pytest.approx(c.interaction + c.potential)
    assert 0 < c.measure < 2 and c.regime == "s>1/2"


def test_trivial_data_gives_invalid_cell():
    c = run_cell(0.3, 0.1, boundary="plus")
    assert c.energy == 0.0
    assert not c.valid and "not pinned" in c.note


def test_pinned_minimizer_is_odd():
    u, rep, _ = pinned_minimizer(0.5, 0.1)
    assert rep.converged
    assert np.max(np.abs(u.values + u.values[::-1])) < 1e-9


def test_pinned_minimizer_rejects_bad_input():
    with pytest.raises(ScanError):
        pinned_minimizer(0.5, 0.1, boundary="minus")
    with pytest.raises(ScanError):
        pinned_minimizer(0.5, 0.1, h=0.3)


@pytest.mark.parametrize("eps", [[0.2, 0.1, 0.05], [0.2, 0.1, 0.1, 0.05], [0.1, 0.2, 0.05, 0.025],
                                 [1.5, 0.1, 0.05, 0.025]])
def test_scan_eps_validation(eps):
    with pytest.raises(ScanError):
        energy_bounds_check([0.5], eps)


def test_gamma_scan_geometry():
    with pytest.raises(ScanError):
        gamma_scan([0.5], EPS, geometry="disc")


def test_energy_bounds_and_density():
    rep = energy_bounds_check([0.3, 0.7], EPS)
    assert rep.passed
    for s in (0.3, 0.7):
        d = rep.derived[s]
        assert 0 < d["c"] <= d["C"] and d["ratio"] == pytest.approx(d["C"] / d["c"])
    dens = density_scan([0.7], EPS)
    assert dens.passed
    steps = dens.derived[0.7]["consecutive"]
    assert len(steps) == 3 and all(0.3 <= r <= 3 for r in steps)


def test_density_theta_gates_validity():
    # a tiny pinning threshold rejects every cell
    rep = density_scan([0.7], EPS, theta1=1e-30)
    assert not rep.passed
    assert rep.assertions[0]["name"] == "cells_valid"


def test_gamma_scan_regimes():
    rep = gamma_scan([0.3, 0.7], EPS)
    assert rep.passed
    assert rep.derived[0.7]["c_star"] == rep.derived[0.7]["energies"][-1]
    assert rep.derived[0.3]["limit_energy"] == pytest.approx(limit_indicator_value(0.3, EPS[-1]))
    # for s < 1/2 the values approach the limit energy of the sign function
    ratios = rep.derived[0.3]["limit_ratio"]
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)


def test_gamma_scan_trivial_data():
    rep = gamma_scan([0.5], EPS, boundary="plus")
    assert all(c.energy == 0.0 for c in rep.cells)
    assert rep.passed


def test_limit_indicator_value():
    h = 0.1 / 16
    g = build_grid(1, [(-1.1, 1.1)], h)
    f = sample_field(g, lambda x: np.where(x >= 0, 1.0, -1.0), tails=[(-1.0, 1.0)], exterior_rule="constant")
    want = kinetic_factor(0.3) * limit_energy_indicator(f, [(-1.0, 1.0)], 0.3)
    assert limit_indicator_value(0.3, 0.1) == pytest.approx(want, rel=1e-12)


def test_report_outputs(tmp_path):
    rep = energy_bounds_check([0.5], EPS)
    paths = rep.write(tmp_path)
    data = json.loads((tmp_path / "energy_bounds.json").read_text())
    assert data["passed"] is rep.passed and len(data["cells"]) == 4
    rows = list(csv.reader(open(tmp_path / "energy_bounds_measure.csv")))
    assert rows[0] == ["s"] + [repr(e) for e in EPS]
    assert all(float(v) > 0 for v in rows[1][1:])
    series = list(csv.reader(open(tmp_path / "energy_bounds_series.csv")))
    assert series[0][-1] == "measure_over_eps" and len(series) == 5
    assert len(paths) == 2 + len(rep.METRICS)
    assert rep.matrix("energy").shape == (1, 4)


@pytest.mark.parametrize("direction", [(1.0, 0.0), (1.0, 1.0)])
def test_flatness_of_planar_minimizers(direction):
    f, rep = planar_minimizer_2d(0.7, direction, half_width=2.0, h=0.1)
    assert rep.converged
    assert flatness_diagnostic(f) < 1e-12


def test_flatness_in_checkerboard_medium():
    f, rep = planar_minimizer_2d(0.7, half_width=2.0, h=0.1, modulation=checkerboard(1.0, 2.0, 1.0))
    assert rep.converged
    d = flatness_diagnostic(f)
    # the medium bends the interface a little but keeps it flat at the domain scale
    assert 1e-6 < d < 0.05


def test_level_curve_of_a_graph():
    g = build_grid(2, [(-1.0, 1.0)] * 2, 0.05)
    f = sample_field(g, lambda x, y: x - 0.2 * np.sin(np.pi * y))
    pts = level_curve(f)
    assert np.allclose(pts[:, 0], 0.2 * np.sin(np.pi * pts[:, 1]), atol=1e-12)
    assert flatness_diagnostic(f) > 0.05
    with pytest.raises(ScanError):
        level_curve(sample_field(g, lambda x, y: 1 + 0 * x))
