import math

import numpy as np
import pytest

from fracphase.checks import gradient_check, scaling_check, submodularity_check
from fracphase.energy import (
    EnergyError,
    auxiliary_energy_F,
    checkerboard,
    constant_modulation,
    cosine_modulation,
    double_well,
    energy_gradient,
    interaction_energy,
    limit_energy_indicator,
    min_max_split,
    multiwell_periodic,
    potential_energy,
    rescaled_energy,
    rescaling_coefficients,
    total_energy,
    user_table,
)
from fracphase.grid import Field, build_grid, constant_field, sample_field, translate_field
from fracphase.kernels import KernelSpec, assemble_operator


def brute_interaction(field, container, kernel):
    """Half the weighted squared differences over all ordered node pairs, plus the far field."""
    g = field.grid
    op = assemble_operator(kernel, g)
    mu = g.container_weights(container)
    u = field.values
    n = u.size
    centre = n - 1
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                chi = mu[i] + mu[j] - mu[i] * mu[j]
                total += 0.5 * op.weights[centre + j - i] * chi * (u[i] - u[j]) ** 2
    for i in range(n):
        for T, c in zip(op.tails[0], field.tails[0]):
            total += mu[i] * T[i] * (u[i] - c) ** 2
    return g.h * total


def toy_field():
    g = build_grid(1, [(0.0, 2.0)], 1.0, collar=2.0)
    vals = np.zeros(g.shape)
    vals[3] = 1.0
    return Field(g, vals, ((0.0, 0.0),), "constant")


def test_potentials():
    W = double_well()
    assert W(np.array([-1.0, 1.0])).tolist() == [0.0, 0.0]
    x = np.linspace(-3, 3, 601)
    assert np.all(W(x[np.abs(np.abs(x) - 1) > 1e-9]) > 0)
    assert W.d2(np.array([-1.0, 1.0])).tolist() == [2.0, 2.0]
    V = multiwell_periodic()
    k = np.arange(-3, 4, dtype=float)
    assert np.max(np.abs(V(k))) < 1e-16
    np.testing.assert_allclose(V(x), V(-x), atol=1e-16)
    np.testing.assert_allclose(V(x + 1), V(x), atol=1e-15)
    assert V.d2(np.array(0.0)) == pytest.approx(1.0)


@pytest.mark.parametrize("pot", [double_well(), multiwell_periodic(),
                                 user_table(np.linspace(-1.5, 1.5, 31), 0.25 * (1 - np.linspace(-1.5, 1.5, 31) ** 2) ** 2)])
def test_potential_increment(pot):
    rng = np.random.default_rng(0)
    u = rng.uniform(-1.2, 1.2, 200)
    d = rng.uniform(-0.2, 0.2, 200) * 10.0 ** rng.uniform(-8, 0, 200)
    np.testing.assert_allclose(pot.diff(u, d), pot.value(u + d) - pot.value(u), atol=1e-14)


@pytest.mark.parametrize("mod", [checkerboard(1.0, 2.0, 1.0), checkerboard(0.5, 3.0, 2.0),
                                 cosine_modulation(1.0, 0.5, 0.3)], ids=["checker1", "checker2", "cosine"])
def test_modulation_bounds_and_period(mod):
    rng = np.random.default_rng(1)
    lo, hi = mod.bounds
    dims = 1 if mod.kind == "cosine" else 2
    pts = [rng.uniform(-20, 20, 1000) for _ in range(dims)]
    q = mod(*pts)
    assert np.all((q >= lo) & (q <= hi))
    for a in range(dims):
        moved = [p + (mod.period if b == a else 0.0) for b, p in enumerate(pts)]
        assert np.max(np.abs(mod(*moved) - q)) <= 1e-12


def test_interaction_toy_oracle():
    u = toy_field()
    k = KernelSpec(0.5, 1)
    got = interaction_energy(u, [(0.0, 2.0)], k)
    assert got == pytest.approx(brute_interaction(u, [(0.0, 2.0)], k), rel=1e-12)
    assert got > 0


def test_interaction_constant_and_even():
    g = build_grid(1, [(-2.0, 2.0)], 0.1, collar=1.0)
    k = KernelSpec(0.4, 1)
    assert interaction_energy(constant_field(g, 0.3), [(-1.0, 1.0)], k) == pytest.approx(0.0, abs=1e-13)
    u = sample_field(g, lambda x: np.tanh(x) + 0.3 * np.cos(x))
    assert interaction_energy(u, [(-1.0, 1.0)], k) == pytest.approx(
        interaction_energy(u.map(np.negative), [(-1.0, 1.0)], k), rel=1e-13)


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_interaction_random_oracle(s):
    rng = np.random.default_rng(2)
    g = build_grid(1, [(-1.0, 1.0)], 0.1, collar=0.5)
    u = Field(g, rng.uniform(-1, 1, g.shape), ((-0.5, 0.8),), "sampled")
    box = [(-0.73, 0.61)]
    assert interaction_energy(u, box, KernelSpec(s, 1)) == pytest.approx(
        brute_interaction(u, box, KernelSpec(s, 1)), rel=1e-11)


def test_potential_energy_examples():
    g = build_grid(1, [(0.0, 1.0)], 0.1, collar=0.5)
    W = double_well()
    assert potential_energy(constant_field(g, 1.0), [(0.0, 1.0)], W) == 0.0
    assert potential_energy(constant_field(g, 0.0), [(0.0, 1.0)], W) == pytest.approx(0.25, rel=1e-14)
    assert potential_energy(constant_field(g, 0.0), [(0.0, 1.0)], W, constant_modulation(2.0)) == pytest.approx(0.5)


def test_total_energy_examples():
    u = toy_field()
    k = KernelSpec(0.5, 1)
    b = total_energy(u, [(0.0, 2.0)], k, double_well())
    # the end nodes carry half cells inside the container
    assert b.total == pytest.approx(brute_interaction(u, [(0.0, 2.0)], k) + 0.25, rel=1e-12)
    g = build_grid(1, [(-1.0, 1.0)], 0.05, collar=1.0)
    assert total_energy(constant_field(g, -1.0), None, k, double_well()).total == 0.0
    assert total_energy(sample_field(g, np.tanh), None, k, double_well()).total > 0


@pytest.mark.parametrize(
    "s, eps, want",
    [
        (0.7, 0.5, (0.5 ** 0.4, 2.0, "s>1/2")),
        (0.5, math.exp(-1), (1.0, math.e, "s=1/2")),
        (0.3, 0.25, (1.0, 0.25 ** -0.6, "s<1/2")),
    ],
)
def test_rescaling_coefficients(s, eps, want):
    kc, pc, regime = rescaling_coefficients(s, eps)
    assert kc == pytest.approx(want[0], rel=1e-14)
    assert pc == pytest.approx(want[1], rel=1e-14)
    assert regime == want[2]


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.5, 2.0])
def test_rescaling_rejects_eps(eps):
    with pytest.raises(EnergyError):
        rescaling_coefficients(0.7, eps)


def test_rescaled_energy_combines_parts():
    g = build_grid(1, [(-1.0, 1.0)], 0.05, collar=1.0)
    u = sample_field(g, np.tanh)
    k = KernelSpec(0.7, 1)
    b = total_energy(u, None, k, double_well())
    r = rescaled_energy(u, None, 0.5, k, double_well())
    assert r.total == pytest.approx(0.5 ** 0.4 * b.interaction + 2 * b.potential, rel=1e-14)
    assert r.regime == "s>1/2"


def test_scaling_identity():
    res = scaling_check()
    assert res.passed, res.details


def test_gradient_at_well_is_zero():
    g = build_grid(1, [(-1.0, 1.0)], 0.05, collar=1.0)
    grad = energy_gradient(constant_field(g, 1.0), None, KernelSpec(0.6, 1), double_well())
    assert np.max(np.abs(grad.values)) == 0.0


def test_gradient_finite_differences():
    res = gradient_check(seed=11, n_fields=3)
    assert res.passed, res.details


def test_min_max_split_equal_fields():
    g = build_grid(1, [(-1.0, 1.0)], 0.1, collar=0.5)
    u = sample_field(g, np.sin)
    v1, v2, b1, b2 = min_max_split(u, u, None, KernelSpec(0.5, 1), double_well())
    assert np.array_equal(v1.values, u.values) and np.array_equal(v2.values, u.values)
    assert b1.total == b2.total


def test_submodularity():
    res = submodularity_check(seed=5, n_pairs=30)
    assert res.passed, res.value


def test_min_max_split_disjoint_bumps():
    g = build_grid(1, [(-20.0, 20.0)], 0.1, collar=1.0)
    k = KernelSpec(0.6, 1, R=5.0)
    bump = lambda c: lambda x: -1 + np.exp(-((x - c) ** 2) * 4) * (np.abs(x - c) < 2)  # noqa: E731
    u = sample_field(g, bump(-10.0), tails=[(-1.0, -1.0)], exterior_rule="constant")
    w = sample_field(g, bump(10.0), tails=[(-1.0, -1.0)], exterior_rule="constant")
    _, _, b1, b2 = min_max_split(u, w, None, k, double_well())
    eu = total_energy(u, None, k, double_well()).total
    ew = total_energy(w, None, k, double_well()).total
    assert b1.total + b2.total == pytest.approx(eu + ew, abs=1e-9)


def half_line(g):
    return sample_field(g, lambda x: np.where(x > 0, 1.0, -1.0), tails=[(-1.0, 1.0)], exterior_rule="constant")


def test_limit_indicator():
    g = build_grid(1, [(-1.0, 1.0)], 0.1, collar=1.0)
    box = [(-1.0, 1.0)]
    empty = constant_field(g, -1.0)
    assert limit_energy_indicator(empty, box, 0.3) == 0.0
    E = half_line(g)
    val = limit_energy_indicator(E, box, 0.3)
    assert val == pytest.approx(brute_interaction(E, box, KernelSpec(0.3, 1)), rel=1e-12)
    assert limit_energy_indicator(E.map(np.negative), box, 0.3) == pytest.approx(val, rel=1e-14)
    with pytest.raises(EnergyError):
        limit_energy_indicator(E, box, 0.5)


def test_potential_additive_interaction_subadditive():
    g = build_grid(1, [(-2.0, 2.0)], 0.1, collar=1.0)
    u = sample_field(g, lambda x: np.tanh(2 * x) + 0.2 * np.sin(5 * x))
    k, W = KernelSpec(0.6, 1), double_well()
    a, b, ab = [(-2.0, 0.0)], [(0.0, 1.5)], [(-2.0, 1.5)]
    assert potential_energy(u, ab, W) == pytest.approx(potential_energy(u, a, W) + potential_energy(u, b, W), rel=1e-13)
    assert interaction_energy(u, ab, k) <= interaction_energy(u, a, k) + interaction_energy(u, b, k)


def test_periodic_translation_invariance():
    g = build_grid(2, [(-2.0, 2.0), (0.0, 1.0)], 0.1, collar=0.5, periodicity=[False, True])
    u = sample_field(g, lambda x, y: np.tanh(x) * (1 + 0.2 * np.cos(2 * np.pi * y)), tails=[(-1.0, 1.0), None],
                     exterior_rule="constant")
    k = KernelSpec(0.7, 2)
    mod = checkerboard(1.0, 2.0, 1.0)
    e0 = total_energy(u, None, k, double_well(), mod).total
    e1 = total_energy(translate_field(u, (0.0, 1.0)), None, k, double_well(), mod).total
    assert e0 == e1


def test_auxiliary_F_constant_well():
    g = build_grid(2, [(-2.0, 2.0), (0.0, 1.0)], 0.1, collar=0.5, periodicity=[False, True])
    u = Field(g, np.ones(g.shape), ((1.0, 1.0), None), "constant")
    assert auxiliary_energy_F(u, KernelSpec(0.7, 2), double_well()).total == pytest.approx(0.0, abs=1e-12)


def test_auxiliary_F_growth_with_truncation():
    g = build_grid(2, [(-2.0, 2.0), (0.0, 1.0)], 0.1, collar=0.5, periodicity=[False, True])
    u = sample_field(g, lambda x, y: np.tanh(x) + 0 * y, tails=[(-1.0, 1.0), None], exterior_rule="constant")
    radii = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
    low = np.diff([auxiliary_energy_F(u, KernelSpec(0.3, 2, R=R), double_well()).interaction for R in radii])
    # s <= 1/2: each doubling of R adds a larger increment, F exceeds any bound
    assert np.all(np.diff(low) > 0)
    assert math.isinf(auxiliary_energy_F(u, KernelSpec(0.3, 2), double_well()).total)
    vals = [auxiliary_energy_F(u, KernelSpec(0.7, 2, R=R), double_well()).interaction for R in radii]
    limit = auxiliary_energy_F(u, KernelSpec(0.7, 2), double_well()).interaction
    # s > 1/2: the truncated values increase towards a finite limit
    assert np.all(np.diff(vals) > 0) and vals[-1] < limit < math.inf
    assert np.diff(vals)[-1] < 0.5 * np.max(np.diff(vals))
