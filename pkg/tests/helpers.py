"""Shared builders for the test suite. Solved states are cached per
(grid, lambda) since they are immutable."""

from functools import lru_cache

import numpy as np

from noetherlab import dynamics, presets
from noetherlab.lattice import Lattice

TIME_EXTENT = 1.5 * np.pi  # m*T = 3*pi/2 at m=1: not a multiple of 2*pi
SPACE_EXTENT = 4.0 * np.pi


def box(n_time: int, n_space: int | None = None) -> Lattice:
    n_space = n_time if n_space is None else n_space
    return Lattice.from_extents(
        (n_time, n_space), (TIME_EXTENT, SPACE_EXTENT), (False, True), (1, -1)
    )


def params_for(lam: float, g_quartic: float = 0.0) -> dict:
    return {"m": 1.0, "lambda": lam, "g_quartic": g_quartic, "e": 1.0}


@lru_cache(maxsize=32)
def k0_state(n: int, lam: float):
    """Solver output for the uniform-oscillation scenario."""
    lat = box(n)
    params = params_for(lam)
    layer0, layer1 = dynamics.initial_k0_mode(lat, params)
    state = dynamics.solve_klein_gordon(lat, layer0, layer1, params)
    spec = presets.complex_scalar_spec(params=params)
    return spec, state


@lru_cache(maxsize=32)
def two_mode_state(n: int, lam: float):
    """Uniform oscillation plus a travelling wave: an on-shell state with
    both a nonzero domain-mean derivative and genuine spatial structure."""
    lat = box(n)
    params = params_for(lam)
    l0a, l1a = dynamics.initial_k0_mode(lat, params, amplitude=1.0)
    l0b, l1b = dynamics.initial_plane_wave(lat, params, mode=2, amplitude=0.5)
    state = dynamics.solve_klein_gordon(lat, l0a + l0b, l1a + l1b, params)
    spec = presets.complex_scalar_spec(params=params)
    return spec, state


@lru_cache(maxsize=8)
def analytic_k0_state(n: int, lam: float):
    """The exact uniform oscillation sampled on the grid (no solver)."""
    lat = box(n)
    params = params_for(lam)
    t = np.arange(n) * lat.spacing[0]
    values = np.exp(-1j * t)[:, None] * np.ones((1, n))
    from noetherlab.lattice import ScalarLatticeField

    state = dynamics.FieldSystemState(
        lat, {"phi": ScalarLatticeField(lat, values)}, dict(params)
    )
    spec = presets.complex_scalar_spec(params=params)
    return spec, state


def rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(values) ** 2)))


def fitted_order(sizes, errors) -> float:
    x = np.log(1.0 / np.asarray(sizes, dtype=float))
    return float(np.polyfit(x, np.log(np.asarray(errors, dtype=float)), 1)[0])
