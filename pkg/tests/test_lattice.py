"""Stencil, quadrature, and region tests for the grid module."""

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from noetherlab.lattice import (
    Lattice,
    NonFiniteFieldError,
    ScalarLatticeField,
    SubRegion,
    dalembertian,
    divergence,
    gradient,
    integrate,
    integrate_array,
    second_difference_array,
)

from helpers import fitted_order


def open_box(shape=(16, 16), extents=(2.0, 3.0)):
    return Lattice.from_extents(shape, extents, (False, False), (1, -1))


def mixed_box(shape=(16, 16), extents=(2.0, 3.0)):
    return Lattice.from_extents(shape, extents, (False, True), (1, -1))


def field(lat, values):
    return ScalarLatticeField(lat, values)


def grids(lat):
    t = lat.coordinates(0)
    x = lat.coordinates(1)
    return np.broadcast_to(t, lat.shape), np.broadcast_to(x, lat.shape)


# ---------------------------------------------------------------------------
# construction and invariants
# ---------------------------------------------------------------------------


def test_lattice_validation():
    with pytest.raises(ValueError, match="time axis"):
        Lattice((8, 8), (0.1, 0.1), (True, True), (1, -1))
    with pytest.raises(ValueError, match="at least"):
        Lattice((4, 8), (0.1, 0.1), (False, True), (1, -1))
    with pytest.raises(ValueError, match="signature"):
        Lattice((8, 8), (0.1, 0.1), (False, True), (1, -2))
    with pytest.raises(ValueError, match="positive"):
        Lattice((8, 8), (0.1, -0.1), (False, True), (1, -1))


def test_volume_counts_cells_per_boundary_rule():
    lat = mixed_box((9, 10), (2.0, 3.0))
    # open axis: (n-1) spacings; periodic axis: n spacings
    assert lat.spacing[0] == pytest.approx(2.0 / 8)
    assert lat.spacing[1] == pytest.approx(3.0 / 10)
    assert lat.volume == pytest.approx(2.0 * 3.0)
    assert lat.cell_volume == pytest.approx(lat.spacing[0] * lat.spacing[1])


def test_field_rejects_non_finite():
    lat = open_box((8, 8))
    values = np.ones(lat.shape, dtype=complex)
    values[3, 3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        ScalarLatticeField(lat, values)


def test_field_values_are_read_only():
    lat = open_box((8, 8))
    f = ScalarLatticeField.constant(lat, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0


# ---------------------------------------------------------------------------
# gradient
# ---------------------------------------------------------------------------


def test_gradient_of_constant_is_zero():
    lat = mixed_box()
    g = gradient(field(lat, np.full(lat.shape, 2.5 + 1j)), 0)
    assert np.all(g.values == 0)
    g = gradient(field(lat, np.full(lat.shape, 2.5 + 1j)), 1)
    assert np.all(g.values == 0)


def test_gradient_exact_on_linear_open_axis():
    lat = open_box()
    t, _ = grids(lat)
    g = gradient(field(lat, t.astype(complex)), 0)
    assert np.allclose(g.values, 1.0, atol=1e-13)


def test_gradient_exact_on_quadratic_interior():
    lat = open_box()
    t, _ = grids(lat)
    g = gradient(field(lat, (t**2).astype(complex)), 0)
    interior = g.values[1:-1, :]
    assert np.allclose(interior, 2.0 * t[1:-1, :], atol=1e-12)


def test_gradient_axis_out_of_range():
    lat = open_box()
    with pytest.raises(ValueError, match="axis"):
        gradient(ScalarLatticeField.constant(lat, 0.0), 2)


def test_gradient_periodic_wraparound():
    lat = mixed_box((8, 16), (2.0, 2 * np.pi))
    _, x = grids(lat)
    f = field(lat, np.exp(1j * x))
    g = gradient(f, 1)
    # central difference of a lattice mode: i*sin(kh)/h times the mode
    h = lat.spacing[1]
    expected = 1j * np.sin(h) / h * np.exp(1j * x)
    assert np.allclose(g.values, expected, atol=1e-12)


def test_gradient_refinement_order():
    errors = []
    sizes = (16, 32, 64)
    for n in sizes:
        lat = open_box((n, 8), (2.0, 1.0))
        t, _ = grids(lat)
        f = field(lat, np.exp(np.sin(2 * np.pi * t / 2.0)).astype(complex))
        g = gradient(f, 0).values
        exact = np.cos(2 * np.pi * t / 2.0) * (2 * np.pi / 2.0) * np.exp(np.sin(2 * np.pi * t / 2.0))
        errors.append(float(np.max(np.abs(g - exact)[1:-1, :])))
    order = fitted_order(sizes, errors)
    assert 1.7 <= order <= 2.3


# ---------------------------------------------------------------------------
# second difference / wave operator
# ---------------------------------------------------------------------------


def test_dalembertian_constant():
    lat = mixed_box()
    assert np.all(dalembertian(ScalarLatticeField.constant(lat, 3.0)).values == 0)


def test_dalembertian_quadratics():
    lat = open_box()
    t, x = grids(lat)
    box_t2 = dalembertian(field(lat, (t**2).astype(complex))).values
    assert np.allclose(box_t2[1:-1, 1:-1], 2.0, atol=1e-10)
    box_x2 = dalembertian(field(lat, (x**2).astype(complex))).values
    assert np.allclose(box_x2[1:-1, 1:-1], -2.0, atol=1e-10)


def test_second_difference_one_sided_edges_on_cubic():
    # the 4-point one-sided stencil is exact on cubics
    lat = open_box((12, 8))
    t, _ = grids(lat)
    d2 = second_difference_array(lat, (t**3).astype(complex), 0)
    assert np.allclose(d2, 6.0 * t, atol=1e-9)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def test_integrate_constant_gives_volume():
    lat = mixed_box((9, 10), (2.0, 3.0))
    value = integrate(ScalarLatticeField.constant(lat, 2.0 - 1j))
    assert value == pytest.approx((2.0 - 1j) * 6.0)


def test_integrate_periodic_mode_vanishes():
    lat = mixed_box((8, 64), (1.0, 2 * np.pi))
    _, x = grids(lat)
    value = integrate(field(lat, np.exp(1j * 3 * x)))
    assert abs(value) <= 1e-13 * lat.volume


def test_integrate_half_region_periodic_axis():
    lat = Lattice.from_extents((8, 16), (1.0, 2.0), (False, True), (1, -1))
    f = ScalarLatticeField.constant(lat, 1.0)
    half = SubRegion((0, 0), (8, 8))
    assert integrate(f, half) == pytest.approx(lat.volume / 2)


def test_integrate_empty_region_rejected():
    with pytest.raises(ValueError, match="empty"):
        SubRegion((0, 0), (0, 4))


def test_region_must_fit_lattice():
    lat = open_box((8, 8))
    f = ScalarLatticeField.constant(lat, 1.0)
    with pytest.raises(ValueError, match="exceeds"):
        integrate(f, SubRegion((0, 0), (9, 8)))


def test_integrate_additive_over_tiling():
    rng = np.random.default_rng(3)
    lat = mixed_box((12, 16))
    values = rng.normal(size=lat.shape) + 1j * rng.normal(size=lat.shape)
    f = field(lat, values)
    whole = integrate(f)
    pieces = [
        SubRegion((0, 0), (5, 7)),
        SubRegion((0, 7), (5, 16)),
        SubRegion((5, 0), (12, 7)),
        SubRegion((5, 7), (12, 16)),
    ]
    total = sum(integrate(f, r) for r in pieces)
    assert abs(total - whole) <= 1e-13 * max(1.0, abs(whole))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_summation_by_parts_periodic(seed):
    rng = np.random.default_rng(seed)
    lat = mixed_box((8, 16))
    f = field(lat, rng.normal(size=lat.shape) + 1j * rng.normal(size=lat.shape))
    g = gradient(f, 1)  # periodic axis
    scale = integrate_array(lat, np.abs(f.values)).real + 1.0
    assert abs(integrate(g)) <= 1e-13 * scale


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_open_axis_integral_telescopes_to_boundary_means(seed):
    # the trapezoid rule composed with the central+one-sided gradient is an
    # exact boundary formula; this is why domain integrals of divergence
    # fields sit at the rounding floor whenever slice means are conserved
    rng = np.random.default_rng(seed)
    lat = mixed_box((16, 12))
    f = rng.normal(size=lat.shape) + 1j * rng.normal(size=lat.shape)
    value = integrate(gradient(field(lat, f), 0))
    w_space = np.full(lat.shape[1], lat.spacing[1])
    mean = lambda j: np.sum(f[j] * w_space)
    n = lat.shape[0]
    boundary = (
        1.25 * (mean(n - 1) - mean(0))
        - 0.5 * (mean(n - 2) - mean(1))
        + 0.25 * (mean(n - 3) - mean(2))
    )
    scale = float(np.max(np.abs(f))) * lat.volume
    assert abs(value - boundary) <= 1e-13 * scale


def test_open_axis_fundamental_theorem_order():
    # integral of the time derivative vs the boundary-slice difference
    errors = []
    sizes = (16, 32, 64)
    for n in sizes:
        lat = mixed_box((n, 16), (2.0, 2 * np.pi))
        t, x = grids(lat)
        values = np.exp(np.sin(np.pi * t)) * (2.0 + np.cos(x))
        f = field(lat, values.astype(complex))
        lhs = integrate(gradient(f, 0))
        boundary = values[-1, :] - values[0, :]
        w = np.full(lat.shape[1], lat.spacing[1])  # periodic spatial weights
        rhs = np.sum(boundary * w)
        errors.append(abs(lhs - rhs))
    order = fitted_order(sizes, errors)
    assert order >= 1.8


# ---------------------------------------------------------------------------
# divergence
# ---------------------------------------------------------------------------


def test_divergence_of_constants_is_zero():
    lat = mixed_box()
    comps = [ScalarLatticeField.constant(lat, 1.0 + 2j) for _ in range(2)]
    assert np.all(divergence(comps).values == 0)


def test_divergence_linear_time_component():
    lat = mixed_box()
    t, _ = grids(lat)
    comps = [field(lat, t.astype(complex)), ScalarLatticeField.constant(lat, 0.0)]
    assert np.allclose(divergence(comps).values, 1.0, atol=1e-12)


def test_divergence_lattice_mode_matches_stencil_symbol():
    lat = mixed_box((8, 32), (1.0, 2 * np.pi))
    _, x = grids(lat)
    comps = [
        ScalarLatticeField.constant(lat, 0.0),
        field(lat, np.sin(2 * x).astype(complex)),
    ]
    h = lat.spacing[1]
    expected = np.sin(2 * h) / h * np.cos(2 * x)  # central-difference response
    assert np.allclose(divergence(comps).values, expected, atol=1e-12)


def test_divergence_component_count_mismatch():
    lat = mixed_box()
    with pytest.raises(ValueError, match="components"):
        divergence([ScalarLatticeField.constant(lat, 0.0)])


# ---------------------------------------------------------------------------
# three dimensions
# ---------------------------------------------------------------------------


def test_three_dimensional_operations():
    lat = Lattice.from_extents((8, 8, 8), (1.0, 2.0, 2.0), (False, True, True), (1, -1, -1))
    x1 = np.broadcast_to(lat.coordinates(1), lat.shape)
    f = field(lat, np.exp(1j * np.pi * x1))
    assert abs(integrate(f)) <= 1e-12 * lat.volume
    assert np.all(dalembertian(ScalarLatticeField.constant(lat, 1.0)).values == 0)
    t = np.broadcast_to(lat.coordinates(0), lat.shape)
    box_t2 = dalembertian(field(lat, (t**2).astype(complex))).values
    assert np.allclose(box_t2[1:-1, :, :], 2.0, atol=1e-9)
