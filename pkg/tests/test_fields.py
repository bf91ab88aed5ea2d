"""Grids, fields, difference operators, factories, and serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from orlicztv import (
    Grid,
    ScalarField,
    VectorField,
    constant_field,
    coordinates,
    dirichlet_grid,
    divergence,
    gradient,
    inner,
    magnitude,
    norm_l1,
    norm_l2,
    ramp_field,
    random_lipschitz_field,
    read_field_csv,
    read_pgm,
    smoothstep_field,
    step_field,
    total_variation,
    write_field_csv,
    write_pgm,
)

ADJOINT_ABS_TOL = 1e-12
ADJOINT_REL_TOL = 1e-10


# --- grid and field validation ----------------------------------------------

def test_grid_properties():
    g = Grid((4, 8), 0.5)
    assert g.ndim == 2
    assert g.size == 32
    assert g.cell_measure == 0.25
    assert g.measure == 8.0
    assert g.boundary_mode == "neumann"
    assert g.compatible(Grid((4, 8), 0.5))
    assert not g.compatible(Grid((4, 8), 0.25))
    assert not g.compatible(Grid((8, 4), 0.5))


@pytest.mark.parametrize("shape, h", [
    ((1,), 1.0),
    ((4, 1), 1.0),
    ((3, 3, 3), 1.0),
    ((4,), 0.0),
    ((4,), -1.0),
    ((4,), math.inf),
])
def test_grid_rejects_bad_parameters(shape, h):
    with pytest.raises(ValueError):
        Grid(shape, h)


def test_scalar_field_validation():
    g = Grid((4,), 1.0)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(5))
    with pytest.raises(ValueError):
        ScalarField(g, [0.0, 1.0, math.nan, 0.0])
    f = ScalarField(g, [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        f.values[0] = 9.0


def test_vector_field_validation():
    g = Grid((3, 3), 1.0)
    with pytest.raises(ValueError):
        VectorField(g, np.zeros((3, 3)))
    v = VectorField(g, np.zeros((2, 3, 3)))
    assert v.values.shape == (2, 3, 3)
    with pytest.raises(ValueError):
        v.values[0, 0, 0] = 1.0


def test_field_construction_copies_input():
    g = Grid((3,), 1.0)
    src = np.array([1.0, 2.0, 3.0])
    f = ScalarField(g, src)
    src[0] = 9.0
    assert f.values[0] == 1.0


def test_coordinates_are_cell_centred():
    g = Grid((4,), 0.25)
    (x,) = coordinates(g)
    assert np.allclose(x, [0.125, 0.375, 0.625, 0.875])


def test_dirichlet_grid_extends_linearly():
    g = Grid((4,), 1.0)
    donor = ScalarField(g, [0.0, 1.0, 2.0, 3.0])
    dg = dirichlet_grid(donor)
    assert dg.boundary_mode == "dirichlet"
    assert dg.ghost[0] == pytest.approx(4.0)

    g2 = Grid((3, 3), 1.0)
    donor2 = ScalarField(g2, np.arange(9.0).reshape(3, 3))
    dg2 = dirichlet_grid(donor2)
    assert np.allclose(dg2.ghost[0], donor2.values[-1] + 3.0)
    assert np.allclose(dg2.ghost[1], donor2.values[:, -1] + 1.0)


def test_ghost_validation():
    with pytest.raises(ValueError):
        Grid((4,), 1.0, ghost=(np.zeros(2),))
    with pytest.raises(ValueError):
        Grid((3, 3), 1.0, ghost=(np.zeros(3),))


# --- difference operators ----------------------------------------------------

def test_gradient_examples():
    g = Grid((4,), 1.0)
    u = ScalarField(g, [0.0, 0.0, 1.0, 1.0])
    assert np.allclose(gradient(u).values[0], [0.0, 1.0, 0.0, 0.0])

    u2 = ScalarField(Grid((2,), 0.5), [0.0, 1.0])
    assert np.allclose(gradient(u2).values[0], [2.0, 0.0])

    const = constant_field(Grid((5, 4), 0.3), 7.0)
    assert not gradient(const).values.any()


def test_gradient_dirichlet_reaches_ghost():
    g = Grid((4,), 1.0)
    donor = ScalarField(g, [0.0, 1.0, 2.0, 3.0])
    u = ScalarField(dirichlet_grid(donor), donor.values)
    assert np.allclose(gradient(u).values[0], [1.0, 1.0, 1.0, 1.0])


def test_divergence_example():
    g = Grid((4,), 1.0)
    v = VectorField(g, [[1.0, 1.0, 1.0, 0.0]])
    # last dual component is ignored structurally on free-boundary grids
    assert np.allclose(divergence(v).values, [1.0, 0.0, 0.0, -1.0])
    zero = VectorField(g, np.zeros((1, 4)))
    assert not divergence(zero).values.any()


def _adjoint_defect(grid: Grid, rng) -> float:
    u = ScalarField(grid, rng.normal(size=grid.shape))
    v = VectorField(grid, rng.normal(size=(grid.ndim,) + grid.shape))
    lhs = inner(gradient(u), v)
    rhs = inner(u, divergence(v))
    return abs(lhs + rhs) / max(norm_l2(u) * norm_l2(magnitude(v)), 1e-300)


@pytest.mark.parametrize("shape", [(8,), (8, 8), (32, 32), (64, 64), (5, 17)])
def test_adjointness_random_fields(shape):
    rng = np.random.default_rng(42)
    grid = Grid(shape, 1.0 / max(shape))
    for _ in range(20):
        assert _adjoint_defect(grid, rng) <= ADJOINT_REL_TOL


def test_adjointness_dirichlet_linear_part():
    # with zero ghosts the Dirichlet gradient is linear, so adjointness is exact
    rng = np.random.default_rng(7)
    grid = Grid((6, 9), 0.2, ghost=(np.zeros(9), np.zeros(6)))
    for _ in range(20):
        assert _adjoint_defect(grid, rng) <= ADJOINT_ABS_TOL


@seed(2024)
@settings(max_examples=60, deadline=None)
@given(u=arrays(np.float64, (8, 8), elements=st.floats(-100, 100)),
       v=arrays(np.float64, (2, 8, 8), elements=st.floats(-100, 100)))
def test_adjointness_property(u, v):
    grid = Grid((8, 8), 0.125)
    uf = ScalarField(grid, u)
    vf = VectorField(grid, v)
    lhs = inner(gradient(uf), vf)
    rhs = inner(uf, divergence(vf))
    scale = max(norm_l2(uf) * norm_l2(magnitude(vf)), 1.0)
    assert abs(lhs + rhs) <= ADJOINT_ABS_TOL * scale


def test_inner_rejects_grid_mismatch():
    a = constant_field(Grid((4,), 1.0), 1.0)
    b = constant_field(Grid((5,), 1.0), 1.0)
    with pytest.raises(ValueError):
        inner(a, b)


# --- total variation ---------------------------------------------------------

def test_total_variation_examples():
    g = Grid((4,), 1.0)
    assert total_variation(ScalarField(g, [0.0, 0.0, 1.0, 1.0])) == pytest.approx(1.0)
    assert total_variation(constant_field(g, 3.0)) == 0.0

    checker = ScalarField(Grid((2, 2), 1.0), [[0.0, 1.0], [1.0, 0.0]])
    assert total_variation(checker) == pytest.approx(2.0 + math.sqrt(2.0))


def test_total_variation_homogeneity_and_shift():
    rng = np.random.default_rng(5)
    g = Grid((9, 7), 0.1)
    u = ScalarField(g, rng.normal(size=(9, 7)))
    tv = total_variation(u)
    for c in (-2.5, 0.0, 0.25, 10.0):
        assert total_variation(ScalarField(g, c * u.values)) == \
            pytest.approx(abs(c) * tv, abs=1e-12)
        assert total_variation(ScalarField(g, u.values + c)) == \
            pytest.approx(tv, rel=1e-12)


def test_total_variation_continuity_under_pointwise_limits():
    g = Grid((16,), 1.0 / 16)
    u = step_field(g, 0.0, 1.0)
    rng = np.random.default_rng(9)
    noise = rng.normal(size=16)
    tvs = [total_variation(ScalarField(g, u.values + noise / 2.0 ** k))
           for k in range(1, 40)]
    assert abs(tvs[-1] - total_variation(u)) <= 1e-9 * max(1.0, total_variation(u))


# --- norms ------------------------------------------------------------------

def test_norms_against_closed_forms():
    g = Grid((4,), 0.5)
    u = ScalarField(g, [1.0, -2.0, 3.0, -4.0])
    assert norm_l1(u) == pytest.approx(0.5 * 10.0)
    assert norm_l2(u) == pytest.approx(math.sqrt(0.5 * 30.0))
    v = VectorField(Grid((2, 2), 1.0), [[[3.0, 0.0], [0.0, 0.0]],
                                        [[4.0, 0.0], [0.0, 0.0]]])
    assert norm_l1(v) == pytest.approx(5.0)


# --- field factories ----------------------------------------------------------

def test_step_field_layout():
    f = step_field(Grid((4,), 1.0), -1.0, 2.0)
    assert np.allclose(f.values, [-1.0, -1.0, 2.0, 2.0])
    fcol = step_field(Grid((4, 3), 1.0), 0.0, 1.0, axis=1)
    assert np.allclose(fcol.values, np.tile([0.0, 1.0, 1.0], (4, 1)))


def test_ramp_field_endpoints_and_slope():
    f = ramp_field(Grid((5,), 0.2), 1.0, 3.0)
    assert f.values[0] == pytest.approx(1.0)
    assert f.values[-1] == pytest.approx(3.0)
    assert np.allclose(np.diff(f.values), 0.5)


def test_smoothstep_field_profile():
    g = Grid((100,), 0.01)
    f = smoothstep_field(g, 1.0, 2.0, 0.25, 0.5)
    x = coordinates(g)[0]
    assert np.all(f.values[x < 0.25] == 1.0)
    assert np.all(f.values[x > 0.75] == 2.0)
    assert np.all(np.diff(f.values) >= 0.0)
    mid = np.argmin(np.abs(x - 0.5))
    assert f.values[mid] == pytest.approx(1.5, abs=0.02)


def test_random_lipschitz_field_range_and_slope():
    for shape in [(64,), (24, 40)]:
        g = Grid(shape, 1.0 / max(shape))
        f = random_lipschitz_field(g, 0.25, 2.0, seed=3, knots=8)
        assert f.values.min() >= 0.25
        assert f.values.max() <= 2.0
        length = max(shape) * g.h
        bound = (2.0 - 0.25) * 7 / length + 1e-9
        for axis in range(g.ndim):
            slopes = np.abs(np.diff(f.values, axis=axis)) / g.h
            assert slopes.max() <= bound


def test_random_lipschitz_field_is_seed_deterministic():
    g = Grid((32,), 1.0 / 32)
    a = random_lipschitz_field(g, 0.0, 1.0, seed=5)
    b = random_lipschitz_field(g, 0.0, 1.0, seed=5)
    c = random_lipschitz_field(g, 0.0, 1.0, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


# --- serialization ------------------------------------------------------------

def test_field_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    for shape in [(6,), (5, 7)]:
        g = Grid(shape, 0.125)
        f = ScalarField(g, rng.normal(size=shape) * 1e3)
        path = tmp_path / "field.csv"
        write_field_csv(f, path)
        back = read_field_csv(path)
        assert back.grid.shape == shape
        assert back.grid.h == g.h
        assert np.array_equal(back.values, f.values)


@pytest.mark.parametrize("text", [
    "",
    "values\n3\n",
    "dims,h\n4x4\n",
    "dims,h\n4,1.0\n1\n2\n3\n",
    "dims,h\nfour,1.0\n1\n2\n3\n4\n",
])
def test_field_csv_rejects_malformed_input(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_field_csv(path)


@pytest.mark.parametrize("bits", [8, 16])
@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, bits, binary):
    g = Grid((9, 14), 0.25)
    rng = np.random.default_rng(2)
    f = ScalarField(g, rng.uniform(-3.0, 5.0, size=(9, 14)))
    path = tmp_path / "field.pgm"
    write_pgm(f, path, bits=bits, binary=binary)
    back = read_pgm(path)
    assert back.grid.shape == f.grid.shape
    assert back.grid.h == f.grid.h
    # quantized to the gray depth over the written range
    quantum = (5.0 - (-3.0)) / ((1 << bits) - 1) * 8.0
    assert np.max(np.abs(back.values - f.values)) <= quantum


def test_pgm_one_dimensional_round_trip(tmp_path):
    g = Grid((17,), 1.0 / 17)
    f = ramp_field(g, 0.0, 1.0)
    path = tmp_path / "line.pgm"
    write_pgm(f, path)
    back = read_pgm(path)
    assert back.grid.shape == (17,)
    assert np.max(np.abs(back.values - f.values)) <= 1.0 / 65535 * 2


def test_pgm_explicit_range_clips(tmp_path):
    g = Grid((4,), 1.0)
    f = ScalarField(g, [0.0, 0.5, 1.0, 2.0])
    path = tmp_path / "clip.pgm"
    write_pgm(f, path, value_range=(0.0, 1.0))
    back = read_pgm(path)
    assert back.values.max() == pytest.approx(1.0)
    assert back.values[1] == pytest.approx(0.5, abs=1e-4)


def test_pgm_constant_field_round_trip(tmp_path):
    f = constant_field(Grid((3, 3), 1.0), 4.2)
    path = tmp_path / "const.pgm"
    write_pgm(f, path)
    assert np.allclose(read_pgm(path).values, 4.2)


def test_pgm_without_sidecar_comments(tmp_path):
    path = tmp_path / "plain.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 255\n255 0\n")
    f = read_pgm(path)
    assert f.grid.shape == (2, 2)
    assert f.grid.h == 1.0
    assert np.allclose(f.values, [[0.0, 1.0], [1.0, 0.0]])


@pytest.mark.parametrize("blob", [
    b"P7\n2 2\n255\n" + bytes(4),
    b"P5\n2 2\n255\n" + bytes(2),
    b"P5\n2 2\n999999\n" + bytes(8),
    b"P2\n2 2\n255\n0 1 2\n",
    b"P5\n2 x\n255\n" + bytes(4),
])
def test_pgm_rejects_malformed_input(tmp_path, blob):
    path = tmp_path / "bad.pgm"
    path.write_bytes(blob)
    with pytest.raises(ValueError):
        read_pgm(path)


def test_write_pgm_rejects_bad_parameters(tmp_path):
    f = constant_field(Grid((3,), 1.0), 0.0)
    with pytest.raises(ValueError):
        write_pgm(f, tmp_path / "x.pgm", bits=12)
    with pytest.raises(ValueError):
        write_pgm(f, tmp_path / "x.pgm", value_range=(1.0, 0.0))
