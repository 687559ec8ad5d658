"""Symbolic differentiation, simplification, and pointwise evaluation.

Differentiation follows the Wirtinger convention: a field and its
conjugate are independent symbols. Domain-mean nodes produce nonlocal
derivative terms: d/ds of mean(g) contributes the weight 1/V_Omega times
the domain integral of dg/ds, which consumers evaluate with a two-pass
protocol (integrate first, then substitute the constant).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Union

from .nodes import (
    Conj,
    Const,
    Coord,
    Expr,
    Field,
    FieldDeriv,
    Mean,
    Param,
    Power,
    Product,
    Sum,
    VOLUME_PARAM,
    is_constantlike,
    normalize_conj,
    sort_key,
    to_text,
    walk,
)

DiffSymbol = Union[Field, FieldDeriv, Conj]

_ZERO = Const(0.0)
_ONE = Const(1.0)


class EvaluationError(ValueError):
    """A symbol required by evaluation has no binding."""


@dataclass
class SymbolBinding:
    """Per-site values for evaluation; values may be scalars or arrays.

    Conjugated fields default to the conjugate of the plain binding but can
    be bound independently (needed by finite-difference derivative checks,
    which perturb one Wirtinger symbol at a time).
    """

    fields: dict[str, Any] = dataclass_field(default_factory=dict)
    derivs: dict[tuple[str, int], Any] = dataclass_field(default_factory=dict)
    params: dict[str, complex] = dataclass_field(default_factory=dict)
    coords: dict[int, Any] = dataclass_field(default_factory=dict)
    means: dict[Expr, complex] = dataclass_field(default_factory=dict)
    conj_fields: dict[str, Any] = dataclass_field(default_factory=dict)
    conj_derivs: dict[tuple[str, int], Any] = dataclass_field(default_factory=dict)


def _conjugate(value):
    try:
        return value.conjugate()
    except AttributeError:
        return complex(value).conjugate()


def evaluate(e: Expr, b: SymbolBinding):
    """Evaluate pointwise; raises EvaluationError on any missing symbol."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Param):
        try:
            return b.params[e.name]
        except KeyError:
            raise EvaluationError(f"no binding for parameter {e.name!r}") from None
    if isinstance(e, Coord):
        try:
            return b.coords[e.axis]
        except KeyError:
            raise EvaluationError(f"no binding for coordinate x{e.axis}") from None
    if isinstance(e, Field):
        try:
            return b.fields[e.name]
        except KeyError:
            raise EvaluationError(f"no binding for field {e.name!r}") from None
    if isinstance(e, FieldDeriv):
        try:
            return b.derivs[(e.name, e.axis)]
        except KeyError:
            raise EvaluationError(f"no binding for d({e.name},{e.axis})") from None
    if isinstance(e, Conj):
        inner = e.child
        if isinstance(inner, Field) and inner.name in b.conj_fields:
            return b.conj_fields[inner.name]
        if isinstance(inner, FieldDeriv) and (inner.name, inner.axis) in b.conj_derivs:
            return b.conj_derivs[(inner.name, inner.axis)]
        return _conjugate(evaluate(inner, b))
    if isinstance(e, Sum):
        total = evaluate(e.terms[0], b)
        for t in e.terms[1:]:
            total = total + evaluate(t, b)
        return total
    if isinstance(e, Product):
        total = evaluate(e.factors[0], b)
        for f in e.factors[1:]:
            total = total * evaluate(f, b)
        return total
    if isinstance(e, Power):
        return evaluate(e.base, b) ** e.exponent
    if isinstance(e, Mean):
        try:
            return b.means[e.child]
        except KeyError:
            raise EvaluationError(f"no precomputed mean for mean({to_text(e.child)})") from None
    raise TypeError(f"unknown node kind: {type(e).__name__}")


def collect_means(e: Expr) -> tuple[Expr, ...]:
    """Distinct Mean integrands in first-occurrence (source) order."""
    seen: dict[Expr, None] = {}
    for node in walk(e):
        if isinstance(node, Mean) and node.child not in seen:
            seen[node.child] = None
    return tuple(seen)


# ---------------------------------------------------------------------------
# simplification
# ---------------------------------------------------------------------------


def simplify(e: Expr) -> Expr:
    """Canonical form: constants folded, identities removed, like terms and
    powers collected, children deterministically ordered. Idempotent."""
    return _simplify(normalize_conj(e))


def _simplify(e: Expr) -> Expr:
    if isinstance(e, Sum):
        return _simplify_sum([_simplify(t) for t in e.terms])
    if isinstance(e, Product):
        return _simplify_product([_simplify(f) for f in e.factors])
    if isinstance(e, Power):
        return _simplify_power(_simplify(e.base), e.exponent)
    if isinstance(e, Conj):
        child = _simplify(e.child)
        if isinstance(child, Const):
            return Const(child.value.conjugate())
        return Conj(child)
    if isinstance(e, Mean):
        return _simplify_mean(_simplify(e.child))
    return e


def _simplify_sum(terms: list[Expr]) -> Expr:
    flat: list[Expr] = []
    for t in terms:
        if isinstance(t, Sum):
            flat.extend(t.terms)
        else:
            flat.append(t)

    const_terms: list[complex] = []
    collected: dict[tuple, tuple[list[complex], tuple[Expr, ...]]] = {}
    for t in flat:
        coeff, monomial = _split_coefficient(t)
        if not monomial:
            const_terms.append(coeff)
            continue
        key = tuple(sort_key(f) for f in monomial)
        if key in collected:
            collected[key][0].append(coeff)
        else:
            collected[key] = ([coeff], monomial)

    # summation in value order makes the overflow decision a function of the
    # term multiset alone, so a bailed-out (reordered) sum stays a fixpoint
    const_total = _ordered_sum(const_terms)
    totals = {key: _ordered_sum(coeffs) for key, (coeffs, _) in collected.items()}
    if not cmath.isfinite(const_total) or any(
        not cmath.isfinite(c) for c in totals.values()
    ):
        ordered = sorted(flat, key=sort_key)
        return Sum(tuple(ordered)) if len(ordered) > 1 else ordered[0]

    rebuilt: list[Expr] = []
    for key in sorted(collected):
        coeff = totals[key]
        monomial = collected[key][1]
        if coeff == 0:
            continue
        if coeff == 1 and len(monomial) == 1:
            rebuilt.append(monomial[0])
        elif coeff == 1:
            rebuilt.append(Product(monomial))
        else:
            rebuilt.append(Product((Const(coeff),) + monomial))
    if const_total != 0 or not rebuilt:
        rebuilt.insert(0, Const(const_total))
    if len(rebuilt) == 1:
        return rebuilt[0]
    return Sum(tuple(rebuilt))


def _ordered_sum(values: list[complex]) -> complex:
    total = 0.0 + 0.0j
    for v in sorted(values, key=lambda z: (z.real, z.imag)):
        total += v
    return total


def _split_coefficient(t: Expr) -> tuple[complex, tuple[Expr, ...]]:
    """Split a simplified term into (constant coefficient, monomial factors)."""
    if isinstance(t, Const):
        return t.value, ()
    if isinstance(t, Product):
        coeff = 1.0 + 0.0j
        rest = []
        for f in t.factors:
            if isinstance(f, Const):
                coeff *= f.value
            else:
                rest.append(f)
        return coeff, tuple(rest)
    return 1.0 + 0.0j, (t,)


def _simplify_product(factors: list[Expr]) -> Expr:
    flat: list[Expr] = []
    for f in factors:
        if isinstance(f, Product):
            flat.extend(f.factors)
        else:
            flat.append(f)

    const_values: list[complex] = []
    # group non-constant factors by base, summing exponents
    powers: dict[tuple, tuple[Expr, int]] = {}
    for f in flat:
        if isinstance(f, Const):
            const_values.append(f.value)
            continue
        base, exponent = (f.base, f.exponent) if isinstance(f, Power) else (f, 1)
        key = sort_key(base)
        if key in powers:
            prev_base, prev_exp = powers[key]
            powers[key] = (prev_base, prev_exp + exponent)
        else:
            powers[key] = (base, exponent)

    if any(v == 0 for v in const_values):
        return _ZERO
    coeff = 1.0 + 0.0j
    for v in sorted(const_values, key=lambda z: (z.real, z.imag)):
        coeff *= v
    if not cmath.isfinite(coeff):
        # overflowing constant product; keep the factors unmerged
        ordered = sorted(flat, key=sort_key)
        return Product(tuple(ordered)) if len(ordered) > 1 else ordered[0]
    if coeff == 0:  # includes underflow of the folded constant
        return _ZERO

    rebuilt: list[Expr] = []
    for key in sorted(powers):
        base, exponent = powers[key]
        if exponent == 0:
            continue
        rebuilt.append(base if exponent == 1 else Power(base, exponent))

    if not rebuilt:
        return Const(coeff)
    if coeff != 1:
        rebuilt.insert(0, Const(coeff))
    if len(rebuilt) == 1:
        return rebuilt[0]
    return Product(tuple(rebuilt))


def _simplify_power(base: Expr, exponent: int) -> Expr:
    if exponent == 1:
        return base
    if isinstance(base, Const):
        try:
            folded = base.value**exponent
        except (ZeroDivisionError, OverflowError):
            folded = None
        if folded is not None and cmath.isfinite(folded):
            return Const(folded)
        return Power(base, exponent)  # undefined or non-finite; leave for evaluation
    if isinstance(base, Power):
        return _simplify_power(base.base, base.exponent * exponent)
    if isinstance(base, Product):
        return _simplify_product([_simplify_power(f, exponent) for f in base.factors])
    return Power(base, exponent)


def _simplify_mean(child: Expr) -> Expr:
    if is_constantlike(child):
        return child
    if isinstance(child, Sum):
        return _simplify_sum([_simplify_mean(t) for t in child.terms])
    if isinstance(child, Product):
        const_factors = [f for f in child.factors if is_constantlike(f)]
        varying = [f for f in child.factors if not is_constantlike(f)]
        if const_factors:
            inner = varying[0] if len(varying) == 1 else Product(tuple(varying))
            return _simplify_product(const_factors + [_simplify_mean(inner)])
    return Mean(child)


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonlocalTerm:
    """One nonlocal contribution: weight(x) times the domain integral of
    the integrand. weight already carries the 1/V_Omega factor; coefficient
    is the same weight without it."""

    weight: Expr
    integrand: Expr
    coefficient: Expr


@dataclass(frozen=True)
class DerivResult:
    local: Expr
    nonlocal_terms: tuple[NonlocalTerm, ...] = ()

    @property
    def is_local(self) -> bool:
        return not self.nonlocal_terms


def _is_diff_symbol(s: Expr) -> bool:
    if isinstance(s, (Field, FieldDeriv)):
        return True
    return isinstance(s, Conj) and isinstance(s.child, (Field, FieldDeriv))


def _diff(e: Expr, symbol: Expr) -> Expr:
    """Pointwise partial derivative treating Mean nodes as constants."""
    if e == symbol:
        return _ONE
    if isinstance(e, (Const, Param, Coord, Field, FieldDeriv, Conj, Mean)):
        return _ZERO
    if isinstance(e, Sum):
        return Sum(tuple(_diff(t, symbol) for t in e.terms))
    if isinstance(e, Product):
        terms = []
        for i, f in enumerate(e.factors):
            df = _diff(f, symbol)
            terms.append(Product(tuple(e.factors[:i]) + (df,) + tuple(e.factors[i + 1 :])))
        return Sum(tuple(terms))
    if isinstance(e, Power):
        return Product((Const(e.exponent), Power(e.base, e.exponent - 1) if e.exponent != 1 else _ONE, _diff(e.base, symbol)))
    raise TypeError(f"unknown node kind: {type(e).__name__}")


def differentiate(e: Expr, wrt: DiffSymbol) -> DerivResult:
    """Wirtinger partial derivative with nonlocal mean terms tracked.

    wrt must be a Field, FieldDeriv, or a Conj of one; the conjugate of a
    symbol is independent of the symbol itself, so d(conj(phi))/d(phi) = 0.
    """
    if not _is_diff_symbol(wrt):
        raise ValueError(f"cannot differentiate with respect to {to_text(wrt)}")
    e = normalize_conj(e)
    local = simplify(_diff(e, wrt))

    terms: list[NonlocalTerm] = []
    inv_volume = Power(Param(VOLUME_PARAM), -1)
    for integrand_src in collect_means(e):
        d_integrand = simplify(_diff(normalize_conj(integrand_src), wrt))
        if d_integrand == _ZERO:
            continue
        coefficient = simplify(_diff(e, Mean(integrand_src)))
        if coefficient == _ZERO:
            continue
        weight = simplify(Product((coefficient, inv_volume)))
        terms.append(NonlocalTerm(weight=weight, integrand=d_integrand, coefficient=coefficient))
    return DerivResult(local=local, nonlocal_terms=tuple(terms))


def variational_expr(d: DerivResult) -> Expr:
    """Collapse a derivative to the form entering the motion equations.

    The action-level variation of a coefficient*mean(g) term contributes
    mean(coefficient)*dg/ds at each site (the inner 1/V_Omega cancels
    against the outer domain integral), which is local again.
    """
    parts: list[Expr] = [d.local]
    for term in d.nonlocal_terms:
        parts.append(Product((_mean_of(term.coefficient), term.integrand)))
    return simplify(Sum(tuple(parts)) if len(parts) > 1 else parts[0])


def _mean_of(e: Expr) -> Expr:
    try:
        return _simplify_mean(_simplify(e))
    except ValueError:
        raise NotImplementedError(
            f"cannot form the domain mean of {to_text(e)} symbolically: "
            "a mean() is buried inside a non-separable factor"
        ) from None
