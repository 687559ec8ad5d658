"""Uniform space-time grid with finite differences and quadrature.

Axis 0 is time and is always open (trapezoid quadrature, one-sided
stencils at the ends). Spatial axes may be periodic (wraparound stencils,
plain-sum quadrature) or open. All derivative stencils are second order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

MIN_POINTS_PER_AXIS = 8


class NonFiniteFieldError(ValueError):
    """A field operation produced NaN or Inf values."""


@dataclass(frozen=True)
class Lattice:
    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    periodic: tuple[bool, ...]
    signature: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        object.__setattr__(self, "signature", tuple(int(s) for s in self.signature))
        k = len(self.shape)
        if not (len(self.spacing) == len(self.periodic) == len(self.signature) == k):
            raise ValueError("shape, spacing, periodic, signature must have equal length")
        if any(n < MIN_POINTS_PER_AXIS for n in self.shape):
            raise ValueError(f"need at least {MIN_POINTS_PER_AXIS} points per axis, got {self.shape}")
        if any(h <= 0 for h in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.periodic[0]:
            raise ValueError("the time axis (axis 0) must be open")
        if any(s not in (-1, 1) for s in self.signature):
            raise ValueError(f"signature entries must be +1 or -1, got {self.signature}")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_extent(self, axis: int) -> float:
        """Physical length of one axis: n*h if periodic, (n-1)*h if open."""
        n = self.shape[axis]
        return self.spacing[axis] * (n if self.periodic[axis] else n - 1)

    @property
    def volume(self) -> float:
        v = 1.0
        for axis in range(self.ndim):
            v *= self.axis_extent(axis)
        return v

    def coordinates(self, axis: int) -> np.ndarray:
        """Coordinate values along one axis, broadcastable over the grid."""
        values = np.arange(self.shape[axis]) * self.spacing[axis]
        index = [None] * self.ndim
        index[axis] = slice(None)
        return values[tuple(index)]

    def quadrature_weights(self) -> np.ndarray:
        return _weights(self.shape, self.spacing, self.periodic)

    @classmethod
    def from_extents(
        cls,
        shape: Sequence[int],
        extents: Sequence[float],
        periodic: Sequence[bool],
        signature: Sequence[int],
    ) -> "Lattice":
        """Build with spacings derived from fixed physical extents."""
        spacing = tuple(
            ext / (n if per else n - 1) for n, ext, per in zip(shape, extents, periodic)
        )
        return cls(tuple(shape), spacing, tuple(periodic), tuple(signature))


@lru_cache(maxsize=64)
def _weights(shape: tuple[int, ...], spacing: tuple[float, ...], periodic: tuple[bool, ...]) -> np.ndarray:
    w = np.ones((), dtype=float)
    for n, h, per in zip(shape, spacing, periodic):
        axis_w = np.full(n, h)
        if not per:
            axis_w[0] *= 0.5
            axis_w[-1] *= 0.5
        w = np.multiply.outer(w, axis_w)
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class ScalarLatticeField:
    """One complex value per lattice site. Values are immutable and finite."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=complex, copy=True)
        if arr.shape != self.lattice.shape:
            raise ValueError(f"values shape {arr.shape} does not match lattice {self.lattice.shape}")
        if not np.all(np.isfinite(arr.view(float))):
            raise NonFiniteFieldError("field contains NaN or Inf values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def constant(cls, lattice: Lattice, value: complex) -> "ScalarLatticeField":
        return cls(lattice, np.full(lattice.shape, complex(value)))


@dataclass(frozen=True)
class SubRegion:
    """Axis-aligned half-open index box [lo, hi)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(i) for i in self.lo))
        object.__setattr__(self, "hi", tuple(int(i) for i in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have equal length")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty region: lo={self.lo}, hi={self.hi}")
        if any(a < 0 for a in self.lo):
            raise ValueError(f"region extends below index 0: {self.lo}")

    def validate(self, lattice: Lattice) -> None:
        if len(self.lo) != lattice.ndim:
            raise ValueError(f"region dimension {len(self.lo)} != lattice dimension {lattice.ndim}")
        if any(b > n for b, n in zip(self.hi, lattice.shape)):
            raise ValueError(f"region {self.lo}..{self.hi} exceeds lattice shape {lattice.shape}")

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, b) for a, b in zip(self.lo, self.hi))


def _axis_check(lattice: Lattice, axis: int) -> None:
    if not 0 <= axis < lattice.ndim:
        raise ValueError(f"axis {axis} out of range for a {lattice.ndim}-dimensional lattice")


def _plane(values: np.ndarray, axis: int, index: int) -> np.ndarray:
    """The hyperplane values[..., index, ...] at one index along axis."""
    sl = [slice(None)] * values.ndim
    sl[axis] = index
    return values[tuple(sl)]


def _span(values: np.ndarray, axis: int, start, stop) -> np.ndarray:
    sl = [slice(None)] * values.ndim
    sl[axis] = slice(start, stop)
    return values[tuple(sl)]


def gradient_array(lattice: Lattice, values: np.ndarray, axis: int) -> np.ndarray:
    """First derivative along one axis: second-order central stencil in the
    interior, wraparound on periodic axes, one-sided at open edges."""
    _axis_check(lattice, axis)
    h = lattice.spacing[axis]
    if lattice.periodic[axis]:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    n = values.shape[axis]
    out = np.empty_like(values)
    mid = [slice(None)] * values.ndim
    mid[axis] = slice(1, -1)
    out[tuple(mid)] = (_span(values, axis, 2, None) - _span(values, axis, None, -2)) / (2.0 * h)
    p = lambda i: _plane(values, axis, i)
    _plane(out, axis, 0)[...] = (-3.0 * p(0) + 4.0 * p(1) - p(2)) / (2.0 * h)
    _plane(out, axis, n - 1)[...] = (3.0 * p(n - 1) - 4.0 * p(n - 2) + p(n - 3)) / (2.0 * h)
    return out


def gradient(f: ScalarLatticeField, axis: int) -> ScalarLatticeField:
    return ScalarLatticeField(f.lattice, gradient_array(f.lattice, f.values, axis))


def second_difference_array(lattice: Lattice, values: np.ndarray, axis: int) -> np.ndarray:
    """Second derivative along one axis, O(h^2) everywhere."""
    _axis_check(lattice, axis)
    h2 = lattice.spacing[axis] ** 2
    if lattice.periodic[axis]:
        return (np.roll(values, -1, axis=axis) - 2.0 * values + np.roll(values, 1, axis=axis)) / h2
    n = values.shape[axis]
    out = np.empty_like(values)
    mid = [slice(None)] * values.ndim
    mid[axis] = slice(1, -1)
    out[tuple(mid)] = (
        _span(values, axis, 2, None) - 2.0 * _span(values, axis, 1, -1) + _span(values, axis, None, -2)
    ) / h2
    p = lambda i: _plane(values, axis, i)
    _plane(out, axis, 0)[...] = (2.0 * p(0) - 5.0 * p(1) + 4.0 * p(2) - p(3)) / h2
    _plane(out, axis, n - 1)[...] = (2.0 * p(n - 1) - 5.0 * p(n - 2) + 4.0 * p(n - 3) - p(n - 4)) / h2
    return out


def dalembertian(f: ScalarLatticeField) -> ScalarLatticeField:
    """Signature-weighted sum of second differences over all axes."""
    lat = f.lattice
    total = np.zeros(lat.shape, dtype=complex)
    for axis in range(lat.ndim):
        total += lat.signature[axis] * second_difference_array(lat, f.values, axis)
    return ScalarLatticeField(lat, total)


def integrate(f: ScalarLatticeField, region: Optional[SubRegion] = None) -> complex:
    """Quadrature over the whole box or a sub-box.

    Sub-boxes reuse the global weights masked to the box, so disjoint boxes
    that tile the domain sum to the whole-domain integral.
    """
    return integrate_array(f.lattice, f.values, region)


def integrate_array(lattice: Lattice, values: np.ndarray, region: Optional[SubRegion] = None) -> complex:
    w = lattice.quadrature_weights()
    if region is None:
        return complex(np.sum(values * w))
    region.validate(lattice)
    sl = region.slices
    return complex(np.sum(values[sl] * w[sl]))


def divergence(components: Sequence[ScalarLatticeField]) -> ScalarLatticeField:
    """Sum over axes of the derivative of the matching component."""
    if not components:
        raise ValueError("divergence needs one component per axis")
    lat = components[0].lattice
    if len(components) != lat.ndim:
        raise ValueError(f"expected {lat.ndim} components, got {len(components)}")
    total = np.zeros(lat.shape, dtype=complex)
    for axis, comp in enumerate(components):
        if comp.lattice is not lat and comp.lattice != lat:
            raise ValueError("components live on different lattices")
        total += gradient_array(lat, comp.values, axis)
    return ScalarLatticeField(lat, total)
