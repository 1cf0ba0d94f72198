import math

import numpy as np
import pytest

from fracphase.grid import build_grid, constant_field, sample_field
from fracphase.kernels import (
    KernelError,
    KernelSpec,
    apply_operator,
    assemble_operator,
    kernel_eval,
    spectral_apply,
)


@pytest.mark.parametrize(
    "spec, y, want",
    [
        (KernelSpec(0.5, 1), 1.0, 1.0),
        (KernelSpec(0.5, 1), 2.0, 0.25),
        (KernelSpec(0.5, 1), -2.0, 0.25),
        (KernelSpec(0.3, 1, R=5.0), 6.0, 0.0),
        (KernelSpec(0.5, 2), (3.0, 4.0), 5.0 ** -3),
    ],
)
def test_kernel_eval(spec, y, want):
    assert kernel_eval(spec, y) == pytest.approx(want, rel=1e-15)


def test_kernel_singular_point():
    with pytest.raises(KernelError):
        kernel_eval(KernelSpec(0.5, 1), 0.0)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5])
def test_kernel_order_range(s):
    with pytest.raises(KernelError):
        KernelSpec(s, 1)


def test_truncation_radius_too_small():
    g = build_grid(1, [(-1.0, 1.0)], 0.1)
    with pytest.raises(KernelError):
        assemble_operator(KernelSpec(0.5, 1, R=0.5), g)


GRIDS = [
    build_grid(1, [(-2.0, 2.0)], 0.05, collar=1.0),
    build_grid(1, [(0.0, 1.0)], 1 / 64, periodicity=[True]),
    build_grid(2, [(-1.0, 1.0), (0.0, 1.0)], 0.1, collar=0.5, periodicity=[False, True]),
]


@pytest.mark.parametrize("g", GRIDS, ids=["1d", "1d_periodic", "2d_cylinder"])
@pytest.mark.parametrize("s", [0.3, 0.7])
def test_weights_and_constants(g, s):
    op = assemble_operator(KernelSpec(s, g.dim), g)
    w = op.weights
    off = np.ones(w.shape, bool)
    if g.dim == 1 and not g.periodic[0]:
        off[w.shape[0] // 2] = False
        np.testing.assert_array_equal(w, w[::-1])
    assert np.all(w[off] >= 0)
    c = apply_operator(op, constant_field(g, 0.7)).values
    assert np.max(np.abs(c)) <= 1e-10


def test_spectral_multiplier():
    g = build_grid(1, [(0.0, 1.0)], 1 / 1024, periodicity=[True])
    x = g.axis_coords(0)
    op = assemble_operator(KernelSpec(0.5, 1), g)
    got = apply_operator(op, sample_field(g, lambda y: np.cos(6 * np.pi * y))).values
    want = (6 * np.pi) * np.cos(6 * np.pi * x)
    assert np.max(np.abs(got - want)) / np.max(np.abs(want)) < 1e-3


def test_odd_field_vanishes_at_centre():
    g = build_grid(1, [(-2.0, 2.0)], 0.05, collar=1.0)
    op = assemble_operator(KernelSpec(0.6, 1), g)
    u = sample_field(g, lambda x: np.tanh(x) + x ** 3 / 10, tails=[(-1.5, 1.5)], exterior_rule="constant")
    v = apply_operator(op, u).values
    assert abs(v[v.size // 2]) <= 1e-10


def test_spectral_apply_modes():
    g = build_grid(1, [(0.0, 2.0)], 2 / 128, periodicity=[True])
    one = spectral_apply(constant_field(g, 1.0), 0.4)
    assert np.max(np.abs(one.values)) < 1e-14
    x = g.axis_coords(0)
    k = 5
    mode = spectral_apply(sample_field(g, lambda y: np.sin(2 * np.pi * k * y / 2)), 0.4)
    np.testing.assert_allclose(mode.values, (np.pi * k) ** 0.8 * np.sin(np.pi * k * x), atol=1e-11)


def test_spectral_apply_rejects_non_periodic():
    g = build_grid(1, [(0.0, 1.0)], 0.1)
    with pytest.raises(KernelError):
        spectral_apply(constant_field(g, 1.0), 0.5)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_spectral_cross_validation(s):
    rng = np.random.default_rng(7)
    g = build_grid(1, [(0.0, 1.0)], 1 / 1024, periodicity=[True])
    x = g.axis_coords(0)
    coef = rng.standard_normal((8, 2))
    fn = lambda y: sum(a * np.cos(2 * np.pi * (k + 1) * y) + b * np.sin(2 * np.pi * (k + 1) * y)  # noqa: E731
                       for k, (a, b) in enumerate(coef))
    u = sample_field(g, fn)
    ref = spectral_apply(u, s).values
    got = apply_operator(assemble_operator(KernelSpec(s, 1), g), u).values
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-3
    assert x.size == 1024


@pytest.mark.parametrize("g", GRIDS, ids=["1d", "1d_periodic", "2d_cylinder"])
def test_self_adjoint_and_positive(g):
    rng = np.random.default_rng(3)
    op = assemble_operator(KernelSpec(0.6, g.dim), g)
    zero_tails = tuple(None if p else (0.0, 0.0) for p in g.periodic)
    for _ in range(100):
        u = constant_field(g, 0.0).with_values(rng.standard_normal(g.shape), tails=zero_tails)
        w = constant_field(g, 0.0).with_values(rng.standard_normal(g.shape), tails=zero_tails)
        au = apply_operator(op, u).values
        aw = apply_operator(op, w).values
        lhs, rhs = np.sum(au * w.values), np.sum(u.values * aw)
        assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), abs(rhs), 1.0)
        assert np.sum(au * u.values) >= 0


def test_truncated_operator_converges():
    g = build_grid(1, [(-4.0, 4.0)], 0.1, collar=4.0)
    u = sample_field(g, np.tanh, tails=[(-1.0, 1.0)], exterior_rule="constant")
    full = apply_operator(assemble_operator(KernelSpec(0.4, 1), g), u).values
    dist = [np.max(np.abs(apply_operator(assemble_operator(KernelSpec(0.4, 1, R=R), g), u).values - full))
            for R in (10.0, 20.0, 40.0, 80.0)]
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_weight_export(tmp_path):
    g = build_grid(1, [(-1.0, 1.0)], 0.25)
    op = assemble_operator(KernelSpec(0.5, 1), g)
    op.export_weights_csv(tmp_path / "w.csv")
    rows = (tmp_path / "w.csv").read_text().splitlines()
    assert rows[0].startswith("offset")
    assert len(rows) > 1
    assert math.isfinite(float(rows[1].split(",")[-1]))
