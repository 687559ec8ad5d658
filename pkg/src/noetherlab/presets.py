"""Built-in field systems and transformation generators.

The main preset is a complex scalar with kinetic density
theta = sum_mu g^mumu d_mu(phi) conj(d_mu(phi)), mass term, optional
quartic self-interaction, and a fluctuation term
U = lambda*(theta - mean(theta)) subtracted from the local density.
U integrates to exactly zero over the domain, so the local and nonlocal
variants share one action.
"""

from __future__ import annotations

from .dynamics import LagrangianSpec, conj_var
from .symlang import (
    Conj,
    Const,
    Expr,
    Field,
    FieldDeriv,
    Mean,
    Param,
    Power,
    Product,
    Sum,
    conj_of,
)

NONLOCAL_PRESET = "complex_scalar_nonlocal"
LOCAL_PRESET = "complex_scalar_local"

DEFAULT_PARAMS = {"m": 1.0, "lambda": 0.0, "g_quartic": 0.0}


def kinetic_density(signature: tuple[int, ...], field: str = "phi") -> Expr:
    """theta = sum_mu g^mumu d_mu(phi) conj(d_mu(phi)) with explicit signs."""
    terms = []
    for axis, sign in enumerate(signature):
        terms.append(
            Product((Const(float(sign)), FieldDeriv(field, axis), Conj(FieldDeriv(field, axis))))
        )
    return Sum(tuple(terms)) if len(terms) > 1 else terms[0]


def local_density(signature: tuple[int, ...], field: str = "phi") -> Expr:
    """theta - m^2 phi conj(phi) - g_quartic (phi conj(phi))^2."""
    theta = kinetic_density(signature, field)
    mass = Product((Const(-1.0), Power(Param("m"), 2), Field(field), Conj(Field(field))))
    quartic = Product(
        (Const(-1.0), Param("g_quartic"), Power(Product((Field(field), Conj(Field(field)))), 2))
    )
    return Sum((theta, mass, quartic))


def fluctuation_density(signature: tuple[int, ...], field: str = "phi") -> Expr:
    """U = lambda * (theta - mean(theta)); its domain integral vanishes."""
    theta = kinetic_density(signature, field)
    return Product((Param("lambda"), Sum((theta, Product((Const(-1.0), Mean(theta)))))))


def complex_scalar_spec(
    signature: tuple[int, ...] = (1, -1),
    params: dict | None = None,
    include_fluctuation: bool = True,
    field: str = "phi",
) -> LagrangianSpec:
    merged = dict(DEFAULT_PARAMS)
    if params:
        merged.update(params)
    l0 = local_density(signature, field)
    if include_fluctuation:
        lagrangian: Expr = Sum((l0, Product((Const(-1.0), fluctuation_density(signature, field)))))
        name = NONLOCAL_PRESET
    else:
        lagrangian = l0
        name = LOCAL_PRESET
    return LagrangianSpec(
        name=name,
        fields=(field,),
        params={k: complex(v) for k, v in merged.items()},
        signature=tuple(signature),
        lagrangian=lagrangian,
    )


def u1_generators(field: str = "phi") -> dict[str, Expr]:
    """Phase-rotation generators: Phi_phi = -i phi and the conjugate rule."""
    gen = Product((Const(-1j), Field(field)))
    return {field: gen, conj_var(field): conj_of(gen)}


LAGRANGIAN_PRESETS = {
    NONLOCAL_PRESET: lambda signature, params: complex_scalar_spec(
        signature, params, include_fluctuation=True
    ),
    LOCAL_PRESET: lambda signature, params: complex_scalar_spec(
        signature, params, include_fluctuation=False
    ),
}
