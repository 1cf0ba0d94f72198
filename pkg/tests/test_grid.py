import numpy as np
import pytest

from fracphase.grid import (
    Field,
    FieldArchive,
    GridError,
    build_grid,
    constant_field,
    field_from_csv,
    field_to_csv,
    sample_field,
    translate_field,
)


def test_grid_node_count():
    g = build_grid(1, [(-1.0, 1.0)], 0.01, collar=2.0)
    assert g.n_interior == (201,)
    assert g.n_collar == (200,)
    assert g.shape == (601,)


@pytest.mark.parametrize(
    "args",
    [
        (1, [(-1.0, 1.0)], 0.3, 0.0, None),
        (1, [(-1.0, 1.0)], 0.1, 0.25, None),
        (1, [(1.0, 1.0)], 0.1, 0.0, None),
        (3, [(0.0, 1.0)] * 3, 0.1, 0.0, None),
        (1, [(0.0, 0.1)], 0.1, 0.0, None),
    ],
)
def test_grid_rejections(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_periodic_cylinder_grid():
    g = build_grid(2, [(0.0, 1.0), (0.0, 1.0)], 0.05, collar=0.5, periodicity=[False, True])
    assert g.periodic == (False, True)
    assert g.period(1) == pytest.approx(1.0)
    assert g.shape == (41, 20)


def test_sample_constant_and_odd():
    g = build_grid(1, [(-1.0, 1.0)], 0.01, collar=0.5)
    one = sample_field(g, lambda x: np.ones_like(x))
    assert np.all(one.values == 1.0)
    u = sample_field(g, np.tanh)
    v = u.values
    np.testing.assert_allclose(v, -v[::-1], atol=1e-15)
    assert v[v.size // 2] == 0.0


def test_sample_box_violation():
    g = build_grid(1, [(-1.0, 1.0)], 0.01)
    with pytest.raises(GridError, match="box"):
        sample_field(g, lambda x: 2 * np.tanh(x), box=(-1.0, 1.0))


def test_sample_non_finite_names_node():
    g = build_grid(1, [(-1.0, 1.0)], 0.5)
    with pytest.raises(GridError, match="node"):
        sample_field(g, lambda x: 1.0 / x)


def test_translate_identity_and_period():
    g = build_grid(2, [(0.0, 2.0), (0.0, 1.0)], 0.05, periodicity=[False, True])
    u = sample_field(g, lambda x, y: np.sin(x) * np.cos(2 * np.pi * y))
    assert np.array_equal(translate_field(u, (0.0, 0.0)).values, u.values)
    assert np.allclose(translate_field(u, (0.0, 1.0)).values, u.values)


def test_translate_resamples_tanh():
    g = build_grid(1, [(-5.0, 5.0)], 0.25, collar=1.0)
    u = sample_field(g, np.tanh)
    v = translate_field(u, (0.5,))
    x = g.axis_coords(0)
    inside = x >= x[0] + 0.5
    np.testing.assert_allclose(v.values[inside], np.tanh(x[inside] - 0.5), atol=1e-14)
    # nodes entering from beyond the stored band take the low tail constant
    assert np.all(v.values[~inside] == u.tails[0][0])


def test_translate_incommensurate():
    g = build_grid(1, [(-1.0, 1.0)], 0.25)
    with pytest.raises(GridError):
        translate_field(sample_field(g, np.tanh), (0.1,))


def test_translate_roundtrip_away_from_boundary():
    g = build_grid(1, [(-4.0, 4.0)], 0.1, collar=1.0)
    u = sample_field(g, lambda x: np.tanh(x) + 0.1 * np.sin(3 * x))
    back = translate_field(translate_field(u, (0.7,)), (-0.7,))
    keep = slice(0, g.shape[0] - 7)
    assert np.array_equal(back.values[keep], u.values[keep])


@pytest.mark.parametrize("seed", range(10))
def test_sample_restrict_commutes(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(-2, 2, 3)
    fn = lambda x: a * np.sin(b * x) + c * x  # noqa: E731
    big = build_grid(1, [(-2.0, 2.0)], 0.1)
    small = build_grid(1, [(-1.0, 1.0)], 0.1)
    restricted = sample_field(big, fn).values[10:31]
    np.testing.assert_allclose(restricted, sample_field(small, fn).values, atol=1e-14)


def test_fields_are_immutable():
    u = constant_field(build_grid(1, [(0.0, 1.0)], 0.1), 0.5)
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_field_shape_mismatch():
    g = build_grid(1, [(0.0, 1.0)], 0.1)
    with pytest.raises(GridError):
        Field(g, np.zeros(3))


def test_csv_and_archive_roundtrip(tmp_path):
    g = build_grid(2, [(0.0, 1.0), (0.0, 1.0)], 0.25, periodicity=[False, True])
    u = sample_field(g, lambda x, y: x * np.cos(2 * np.pi * y))
    field_to_csv(u, tmp_path / "u.csv")
    header = (tmp_path / "u.csv").read_text().splitlines()[0]
    assert header == "x,y,u"
    back = field_from_csv(g, tmp_path / "u.csv", tails=u.tails)
    np.testing.assert_allclose(back.values, u.values, rtol=0, atol=1e-15)
    FieldArchive().save(u, tmp_path / "u.npz")
    loaded = FieldArchive.load(tmp_path / "u.npz")
    assert np.array_equal(loaded.values, u.values)
    assert loaded.grid.same_as(g)
