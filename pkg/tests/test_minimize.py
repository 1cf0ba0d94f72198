import numpy as np
import pytest

from fracphase.energy import double_well, problem_for
from fracphase.grid import Field, build_grid, constant_field, sample_field
from fracphase.kernels import KernelSpec
from fracphase.minimize import (
    MinimizeError,
    MinimizeOptions,
    check_stationarity,
    minimize,
    pointwise_min_of_runs,
)

BOX = (-1.0, 1.0)


def layer_setup(s=0.7, L=5.0, h=0.1):
    g = build_grid(1, [(-L, L)], h, collar=1.0)
    lin = sample_field(g, lambda x: np.clip(x / L, -1, 1), tails=[(-1.0, 1.0)], exterior_rule="constant")
    return lin, problem_for(lin, None, KernelSpec(s, 1), double_well())


def test_stationary_start():
    g = build_grid(1, [(-2.0, 2.0)], 0.1, collar=1.0)
    one = constant_field(g, 1.0)
    prob = problem_for(one, None, KernelSpec(0.7, 1), double_well())
    rep = minimize(one, prob, MinimizeOptions(box=BOX))
    assert rep.iterations == 0 and rep.converged
    assert check_stationarity(one, prob, BOX) == 0.0


def test_layer_descends_to_monotone_profile():
    lin, prob = layer_setup()
    rep = minimize(lin, prob, MinimizeOptions(box=BOX, max_iterations=20000))
    assert rep.converged
    assert rep.residual < 1e-7
    assert np.all(np.diff(rep.field.values) >= -1e-12)
    assert rep.energy < prob.breakdown().total
    traj = np.array(rep.energy_trajectory)
    # steps are accepted on the exact increment; the stored totals are rounded
    assert np.all(np.diff(traj) <= 8 * np.finfo(float).eps * traj[:-1])
    assert np.sum(np.diff(traj) < 0) > 0.9 * (traj.size - 1)
    assert np.all((rep.field.values >= -1) & (rep.field.values <= 1))
    assert check_stationarity(rep.field, prob, BOX) < 1e-7


def test_infeasible_start_rejected():
    g = build_grid(1, [(-1.0, 1.0)], 0.1)
    three = constant_field(g, 3.0)
    prob = problem_for(three, None, KernelSpec(0.5, 1), double_well())
    with pytest.raises(MinimizeError):
        minimize(three, prob, MinimizeOptions(box=BOX))


def test_random_field_not_stationary():
    rng = np.random.default_rng(0)
    lin, prob = layer_setup()
    u = lin.with_interior(rng.uniform(-1, 1, lin.grid.n_interior))
    assert check_stationarity(u, prob, BOX) > 0


def test_deterministic_trajectory():
    lin, prob = layer_setup(s=0.4)
    opts = MinimizeOptions(box=BOX, restarts=3, seed=4)
    a = minimize(lin, prob, opts)
    b = minimize(lin, prob, opts)
    assert a.energy_trajectory == b.energy_trajectory
    assert np.array_equal(a.field.values, b.field.values)


def test_pointwise_min_trivial_cases():
    lin, prob = layer_setup()
    rep = minimize(lin, prob, MinimizeOptions(box=BOX))
    assert np.array_equal(pointwise_min_of_runs([rep]).values, rep.field.values)
    assert np.array_equal(pointwise_min_of_runs([rep, rep]).values, rep.field.values)
    with pytest.raises(MinimizeError):
        pointwise_min_of_runs([])


def test_pointwise_min_of_symmetric_minimizers():
    # a periodic free problem has the two minimizers u = 1 and u = -1
    g = build_grid(1, [(0.0, 4.0)], 0.1, periodicity=[True])
    rng = np.random.default_rng(1)
    wob = 0.1 * rng.standard_normal(g.shape)
    up = Field(g, 0.5 + wob, (None,), "periodic")
    down = Field(g, -0.5 - wob, (None,), "periodic")
    prob = problem_for(up, None, KernelSpec(0.6, 1), double_well())
    ra = minimize(up, prob, MinimizeOptions(box=BOX))
    rb = minimize(down, prob, MinimizeOptions(box=BOX))
    low = pointwise_min_of_runs([ra, rb])
    final = minimize(low, prob, MinimizeOptions(box=BOX))
    assert final.energy <= min(ra.energy, rb.energy) + 1e-8


def test_pointwise_min_rejects_spread():
    g = build_grid(1, [(-2.0, 2.0)], 0.1, collar=1.0)
    lin = sample_field(g, np.tanh, tails=[(-1.0, 1.0)], exterior_rule="constant")
    prob = problem_for(lin, None, KernelSpec(0.7, 1), double_well())
    good = minimize(lin, prob, MinimizeOptions(box=BOX))
    up = constant_field(g, 1.0)
    other = minimize(up, problem_for(up, None, KernelSpec(0.7, 1), double_well()), MinimizeOptions(box=BOX))
    with pytest.raises(MinimizeError):
        pointwise_min_of_runs([good, other])


@pytest.mark.parametrize("seed", range(10))
def test_comparison_principle(seed):
    rng = np.random.default_rng(seed)
    lin, prob = layer_setup(s=0.5, L=3.0)
    n = lin.grid.n_interior[0]
    a = rng.uniform(-1, 1, n)
    b = np.minimum(a + rng.uniform(0, 0.5, n), 1.0)
    opts = MinimizeOptions(box=BOX, step_rule="monotone", max_iterations=2000)
    ua = minimize(lin.with_interior(a), prob, opts).field.values
    ub = minimize(lin.with_interior(b), prob, opts).field.values
    assert np.all(ua <= ub + 1e-9)


@pytest.mark.parametrize("kw", [dict(gradient_tolerance=0.0), dict(max_iterations=0), dict(restarts=0),
                                dict(step_rule="newton"), dict(box=(1.0, -1.0))])
def test_options_validation(kw):
    with pytest.raises(MinimizeError):
        MinimizeOptions(**kw)


def test_report_serialization(tmp_path):
    lin, prob = layer_setup()
    rep = minimize(lin, prob, MinimizeOptions(box=BOX))
    rep.write(tmp_path / "r.json", tmp_path / "r.csv")
    assert (tmp_path / "r.json").read_text().startswith("{")
    assert (tmp_path / "r.csv").exists()
    assert rep.to_dict()["converged"] is True
