"""Motion equations and field evolution for complex scalar systems.

Derives Euler-Lagrange residuals symbolically (inner factors symbolic,
outer divergence applied with lattice stencils at evaluation time),
evolves the field with a second-order leapfrog scheme, and measures
discrete action stationarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Iterable, Optional

import numpy as np

from .lattice import (
    Lattice,
    ScalarLatticeField,
    gradient_array,
    integrate_array,
)
from .symlang import (
    Conj,
    Coord,
    DerivResult,
    Expr,
    Field,
    FieldDeriv,
    SymbolBinding,
    VOLUME_PARAM,
    collect_means,
    differentiate,
    evaluate,
    variational_expr,
    walk,
)


class CFLError(ValueError):
    """Time step too large for the spatial resolution."""


class NonFiniteEvolutionError(RuntimeError):
    """Evolution produced NaN/Inf; carries the first offending step index."""

    def __init__(self, step: int):
        super().__init__(f"non-finite field values at time step {step}")
        self.step = step


def conj_var(name: str) -> str:
    """Name of the conjugate partner used as an independent variable."""
    return name + "*"


@dataclass
class LagrangianSpec:
    """A named field system: declared fields, parameters, metric signature,
    and the Lagrangian density expression (lower-index derivatives only;
    metric factors are explicit constants)."""

    name: str
    fields: tuple[str, ...]
    params: dict[str, complex]
    signature: tuple[int, ...]
    lagrangian: Expr

    @property
    def ndim(self) -> int:
        return len(self.signature)


@dataclass(eq=False)
class FieldSystemState:
    """Field values over the whole space-time box plus parameter values.

    Conjugate partners are always derived by conjugation, never stored, so
    conjugate consistency holds by construction.
    """

    lattice: Lattice
    fields: dict[str, ScalarLatticeField]
    params: dict[str, complex] = dataclass_field(default_factory=dict)

    def field_values(self, name: str) -> np.ndarray:
        return self.fields[name].values

    def replace_field(self, name: str, values: np.ndarray) -> "FieldSystemState":
        new_fields = dict(self.fields)
        new_fields[name] = ScalarLatticeField(self.lattice, values)
        return FieldSystemState(self.lattice, new_fields, dict(self.params))


def merged_params(spec: LagrangianSpec, state: FieldSystemState) -> dict[str, complex]:
    out = dict(spec.params)
    out.update(state.params)
    return out


def build_binding(
    state: FieldSystemState,
    exprs: Iterable[Expr],
    params: Optional[dict[str, complex]] = None,
) -> SymbolBinding:
    """Bind every symbol the given expressions need: field arrays, lattice
    gradients, coordinates, parameters (including the domain volume), and
    precomputed domain means (pass one of the two-pass protocol)."""
    exprs = list(exprs)
    lat = state.lattice
    binding = SymbolBinding()
    binding.params = {k: complex(v) for k, v in (params or state.params).items()}
    binding.params.setdefault(VOLUME_PARAM, complex(lat.volume))

    needed_derivs: set[tuple[str, int]] = set()
    needed_coords: set[int] = set()
    for e in exprs:
        for node in walk(e):
            if isinstance(node, FieldDeriv):
                needed_derivs.add((node.name, node.axis))
            elif isinstance(node, Coord):
                needed_coords.add(node.axis)

    for name, f in state.fields.items():
        binding.fields[name] = f.values
    for name, axis in needed_derivs:
        binding.derivs[(name, axis)] = gradient_array(lat, state.field_values(name), axis)
    for axis in needed_coords:
        binding.coords[axis] = lat.coordinates(axis)

    for e in exprs:
        for integrand in collect_means(e):
            if integrand in binding.means:
                continue
            values = np.broadcast_to(np.asarray(evaluate(integrand, binding)), lat.shape)
            binding.means[integrand] = integrate_array(lat, values) / lat.volume
    return binding


def evaluate_on_lattice(e: Expr, binding: SymbolBinding, lattice: Lattice) -> np.ndarray:
    return np.broadcast_to(np.asarray(evaluate(e, binding)), lattice.shape)


def two_pass_value(d: DerivResult, binding: SymbolBinding, lattice: Lattice) -> np.ndarray:
    """Pointwise value of a derivative: local part plus, for each nonlocal
    term, its weight times the domain integral of its integrand."""
    total = np.asarray(evaluate(d.local, binding), dtype=complex)
    for term in d.nonlocal_terms:
        integrand = evaluate_on_lattice(term.integrand, binding, lattice)
        integral = integrate_array(lattice, integrand)
        total = total + np.asarray(evaluate(term.weight, binding)) * integral
    return np.broadcast_to(total, lattice.shape)


# ---------------------------------------------------------------------------
# Euler-Lagrange system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ELEntry:
    """Symbolic pieces of one motion equation: residual = source - div(flux)."""

    source: Expr
    flux: tuple[Expr, ...]


@dataclass(frozen=True)
class ELSystem:
    entries: dict[str, ELEntry]

    def __eq__(self, other):
        return isinstance(other, ELSystem) and self.entries == other.entries


def _variable_symbols(field_name: str) -> dict[str, Expr]:
    return {
        field_name: Field(field_name),
        conj_var(field_name): Conj(Field(field_name)),
    }


def derive_euler_lagrange(spec: LagrangianSpec) -> ELSystem:
    """Per independent variable (each field and its conjugate): the source
    term dL/dvar and the flux factors dL/d(var derivative) per axis, in the
    action-level (variational) form where domain-mean terms collapse back
    to local expressions. All entries are simplified to canonical form."""
    entries: dict[str, ELEntry] = {}
    for name in spec.fields:
        for var_name, symbol in _variable_symbols(name).items():
            source = variational_expr(differentiate(spec.lagrangian, symbol))
            flux = []
            for axis in range(spec.ndim):
                deriv_symbol = (
                    FieldDeriv(name, axis)
                    if isinstance(symbol, Field)
                    else Conj(FieldDeriv(name, axis))
                )
                flux.append(variational_expr(differentiate(spec.lagrangian, deriv_symbol)))
            entries[var_name] = ELEntry(source=source, flux=tuple(flux))
    return ELSystem(entries)


def el_residual_arrays(
    elsys: ELSystem, spec: LagrangianSpec, state: FieldSystemState
) -> dict[str, np.ndarray]:
    """Evaluate each motion-equation residual with lattice derivatives."""
    exprs: list[Expr] = []
    for entry in elsys.entries.values():
        exprs.append(entry.source)
        exprs.extend(entry.flux)
    binding = build_binding(state, exprs, params=merged_params(spec, state))
    lat = state.lattice
    out = {}
    for var_name, entry in elsys.entries.items():
        residual = np.array(evaluate_on_lattice(entry.source, binding, lat), dtype=complex)
        for axis, flux_expr in enumerate(entry.flux):
            flux_values = np.ascontiguousarray(evaluate_on_lattice(flux_expr, binding, lat))
            residual = residual - gradient_array(lat, flux_values, axis)
        out[var_name] = residual
    return out


def interior_slices(lattice: Lattice, margin: int = 2) -> tuple[slice, ...]:
    """Sites at least `margin` layers away from every open edge."""
    return tuple(
        slice(None) if periodic else slice(margin, n - margin)
        for n, periodic in zip(lattice.shape, lattice.periodic)
    )


def stationarity_residual(spec: LagrangianSpec, state: FieldSystemState) -> float:
    """RMS of all motion-equation residuals over the interior sites."""
    elsys = derive_euler_lagrange(spec)
    residuals = el_residual_arrays(elsys, spec, state)
    sl = interior_slices(state.lattice)
    total = 0.0
    count = 0
    for arr in residuals.values():
        inner = arr[sl]
        total += float(np.sum(np.abs(inner) ** 2))
        count += inner.size
    return float(np.sqrt(total / count))


# ---------------------------------------------------------------------------
# action
# ---------------------------------------------------------------------------


def action(spec: LagrangianSpec, state: FieldSystemState) -> complex:
    """Domain integral of the Lagrangian density (two-pass mean handling)."""
    binding = build_binding(state, [spec.lagrangian], params=merged_params(spec, state))
    density = evaluate_on_lattice(spec.lagrangian, binding, state.lattice)
    return integrate_array(state.lattice, density)


# ---------------------------------------------------------------------------
# Klein-Gordon leapfrog solver
# ---------------------------------------------------------------------------

CFL_FACTOR = 0.5


def _spatial_laplacian(layer: np.ndarray, lattice: Lattice) -> np.ndarray:
    """Laplacian over the spatial axes of a single time layer. Open-axis
    boundary planes are filled with wraparound values; callers freeze them."""
    lap = np.zeros_like(layer)
    for axis in range(1, lattice.ndim):
        h2 = lattice.spacing[axis] ** 2
        a = axis - 1  # layer arrays drop the time axis
        lap += (np.roll(layer, -1, axis=a) - 2.0 * layer + np.roll(layer, 1, axis=a)) / h2
    return lap


def _open_spatial_boundary(lattice: Lattice) -> list[tuple[int, int]]:
    edges = []
    for axis in range(1, lattice.ndim):
        if not lattice.periodic[axis]:
            edges.append((axis - 1, 0))
            edges.append((axis - 1, lattice.shape[axis] - 1))
    return edges


def quartic_potential_deriv(g_quartic: complex) -> Callable[[np.ndarray], np.ndarray]:
    """dV/d(conj phi) for V = g*(phi*conj(phi))^2."""

    def deriv(phi: np.ndarray) -> np.ndarray:
        if g_quartic == 0:
            return np.zeros_like(phi)
        return 2.0 * g_quartic * (phi * np.conjugate(phi)) * phi

    return deriv


def solve_klein_gordon(
    lattice: Lattice,
    layer0: np.ndarray,
    layer1: np.ndarray,
    params: dict[str, complex],
) -> FieldSystemState:
    """Fill the whole space-time box by leapfrog:

        phi[n+1] = 2 phi[n] - phi[n-1] + dt^2 (lap phi[n] - m^2 phi[n] - dV/dphi*)

    layer0/layer1 are the analytic values at t=0 and t=dt. Requires the
    (+1, -1, ...) signature, dt <= 0.5 * min spatial spacing, and periodic
    or frozen-value (Dirichlet) spatial boundaries.
    """
    if lattice.ndim < 2:
        raise ValueError("the solver needs a time axis plus at least one space axis")
    if lattice.signature[0] != 1 or any(s != -1 for s in lattice.signature[1:]):
        raise ValueError("the solver requires signature (+1, -1, ..., -1)")
    dt = lattice.spacing[0]
    limit = CFL_FACTOR * min(lattice.spacing[1:])
    if dt > limit * (1.0 + 1e-12):
        raise CFLError(f"dt={dt:.6g} exceeds the stability limit {limit:.6g}")

    m = complex(params["m"])
    dV = quartic_potential_deriv(complex(params.get("g_quartic", 0.0)))
    spatial_shape = lattice.shape[1:]
    for layer in (layer0, layer1):
        if np.shape(layer) != spatial_shape:
            raise ValueError(f"initial layer shape {np.shape(layer)} != spatial shape {spatial_shape}")

    n_time = lattice.shape[0]
    traj = np.empty(lattice.shape, dtype=complex)
    traj[0] = layer0
    traj[1] = layer1
    frozen = _open_spatial_boundary(lattice)
    m2 = m * m
    dt2 = dt * dt
    prev, cur = traj[0], traj[1]
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_time - 1):
            rhs = _spatial_laplacian(cur, lattice) - m2 * cur - dV(cur)
            nxt = 2.0 * cur - prev + dt2 * rhs
            for a, index in frozen:
                sl = [slice(None)] * nxt.ndim
                sl[a] = index
                nxt[tuple(sl)] = layer0[tuple(sl)]
            if not np.all(np.isfinite(nxt.view(float))):
                raise NonFiniteEvolutionError(n + 1)
            traj[n + 1] = nxt
            prev, cur = cur, nxt

    return FieldSystemState(
        lattice=lattice,
        fields={"phi": ScalarLatticeField(lattice, traj)},
        params=dict(params),
    )


def reverse_time_solve(lattice: Lattice, state: FieldSystemState, params: dict[str, complex]) -> FieldSystemState:
    """Run the solver backwards from the final two layers."""
    phi = state.field_values("phi")
    back = solve_klein_gordon(lattice, phi[-1].copy(), phi[-2].copy(), params)
    flipped = back.field_values("phi")[::-1].copy()
    return FieldSystemState(lattice, {"phi": ScalarLatticeField(lattice, flipped)}, dict(params))


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------


def _spatial_coordinate(lattice: Lattice, axis: int) -> np.ndarray:
    """Coordinate along one spatial axis, broadcastable over a time layer."""
    values = np.arange(lattice.shape[axis]) * lattice.spacing[axis]
    index = [None] * (lattice.ndim - 1)
    index[axis - 1] = slice(None)
    return values[tuple(index)]


def initial_zero(lattice: Lattice, params: dict) -> tuple[np.ndarray, np.ndarray]:
    shape = lattice.shape[1:]
    return np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex)


def initial_plane_wave(
    lattice: Lattice,
    params: dict,
    k: Optional[float] = None,
    mode: Optional[int] = None,
    amplitude: float = 1.0,
    axis: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """phi(x, t) = A exp(i(kx - wt)) with w^2 = k^2 + m^2, sampled at t=0, dt."""
    if (k is None) == (mode is None):
        raise ValueError("plane_wave needs exactly one of k= or mode=")
    extent = lattice.axis_extent(axis)
    if mode is not None:
        k = 2.0 * np.pi * mode / extent
    if lattice.periodic[axis]:
        cycles = k * extent / (2.0 * np.pi)
        if abs(cycles - round(cycles)) > 1e-9:
            raise ValueError(f"wavenumber {k} is not commensurate with the periodic extent {extent}")
    m = complex(params["m"]).real
    omega = np.sqrt(k * k + m * m)
    x = _spatial_coordinate(lattice, axis)
    dt = lattice.spacing[0]
    shape = lattice.shape[1:]
    layer0 = np.broadcast_to(amplitude * np.exp(1j * k * x), shape).astype(complex)
    layer1 = np.broadcast_to(amplitude * np.exp(1j * (k * x - omega * dt)), shape).astype(complex)
    return layer0.copy(), layer1.copy()


def initial_k0_mode(lattice: Lattice, params: dict, amplitude: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Spatially uniform oscillation phi(t) = A exp(-imt)."""
    m = complex(params["m"]).real
    dt = lattice.spacing[0]
    shape = lattice.shape[1:]
    layer0 = np.full(shape, complex(amplitude))
    layer1 = np.full(shape, amplitude * np.exp(-1j * m * dt))
    return layer0, layer1


def initial_gaussian_packet(
    lattice: Lattice,
    params: dict,
    center: float,
    width: float,
    k: float = 0.0,
    amplitude: float = 1.0,
    axis: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Modulated Gaussian; second layer from a Taylor step using the field
    equation and the quasi-monochromatic estimate phi_t(0) = -i w(k) phi."""
    m = complex(params["m"]).real
    omega = np.sqrt(k * k + m * m)
    x = _spatial_coordinate(lattice, axis)
    shape = lattice.shape[1:]
    envelope = amplitude * np.exp(-((x - center) ** 2) / (2.0 * width * width))
    layer0 = np.broadcast_to(envelope * np.exp(1j * k * x), shape).astype(complex).copy()
    dt = lattice.spacing[0]
    dV = quartic_potential_deriv(complex(params.get("g_quartic", 0.0)))
    accel = _spatial_laplacian(layer0, lattice) - m * m * layer0 - dV(layer0)
    layer1 = layer0 + dt * (-1j * omega) * layer0 + 0.5 * dt * dt * accel
    return layer0, layer1


INITIAL_PRESETS: dict[str, Callable] = {
    "zero": initial_zero,
    "plane_wave": initial_plane_wave,
    "k0_mode": initial_k0_mode,
    "gaussian_packet": initial_gaussian_packet,
}
