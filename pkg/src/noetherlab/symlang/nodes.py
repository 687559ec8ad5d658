"""Immutable expression trees for Lagrangian densities and derived formulas.

Node kinds form a closed grammar: complex constants, named parameters,
coordinates, field values, field derivatives (lower index), complex
conjugation, n-ary sums and products, integer powers, and domain means
(``mean(g)`` = the average of g over the whole space-time box).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

Number = Union[int, float, complex]


class Expr:
    """Base class for all expression nodes. Instances are immutable."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Expr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Coord(Expr):
    axis: int

    def __post_init__(self):
        if self.axis < 0:
            raise ValueError(f"coordinate axis must be >= 0, got {self.axis}")


@dataclass(frozen=True)
class Field(Expr):
    name: str


@dataclass(frozen=True)
class FieldDeriv(Expr):
    """Partial derivative of a field along one axis (lower index)."""

    name: str
    axis: int

    def __post_init__(self):
        if self.axis < 0:
            raise ValueError(f"derivative axis must be >= 0, got {self.axis}")


@dataclass(frozen=True)
class Conj(Expr):
    child: Expr


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("Sum requires at least one term")


@dataclass(frozen=True)
class Product(Expr):
    factors: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("Product requires at least one factor")


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or isinstance(self.exponent, bool):
            raise ValueError(f"Power exponent must be an integer, got {self.exponent!r}")
        if self.exponent == 0:
            raise ValueError("Power exponent must be nonzero")


@dataclass(frozen=True)
class Mean(Expr):
    """Domain mean of the child over the whole space-time box."""

    child: Expr

    def __post_init__(self):
        if contains_mean(self.child):
            raise ValueError("mean() may not contain another mean()")


ONE = Const(1.0)
ZERO = Const(0.0)
MINUS_ONE = Const(-1.0)

# Reserved parameter bound to the physical volume of the domain at
# evaluation time; appears in the weights of nonlocal derivative terms.
VOLUME_PARAM = "V_Omega"


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, Sum):
        return e.terms
    if isinstance(e, Product):
        return e.factors
    if isinstance(e, (Conj, Mean)):
        return (e.child,)
    if isinstance(e, Power):
        return (e.base,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    """Depth-first pre-order traversal."""
    yield e
    for c in children(e):
        yield from walk(c)


def contains_mean(e: Expr) -> bool:
    return any(isinstance(n, Mean) for n in walk(e))


def is_constantlike(e: Expr) -> bool:
    """True if e carries no per-site dependence (fields, derivatives, coords).

    Mean nodes count as constant: their value is a single number per domain,
    so field references inside a Mean do not make e site-dependent.
    """
    if isinstance(e, Mean):
        return True
    if isinstance(e, (Field, FieldDeriv, Coord)):
        return False
    return all(is_constantlike(c) for c in children(e))


def conj_of(e: Expr) -> Expr:
    """Complex conjugate, pushed down to atoms.

    Sums, products, powers, and means conjugate elementwise; coordinates
    are real; conj(conj(x)) collapses. Only fields, field derivatives, and
    parameters keep an explicit Conj wrapper.
    """
    if isinstance(e, Const):
        return Const(e.value.conjugate())
    if isinstance(e, Coord):
        return e
    if isinstance(e, (Field, FieldDeriv, Param)):
        return Conj(e)
    if isinstance(e, Conj):
        return e.child
    if isinstance(e, Sum):
        return Sum(tuple(conj_of(t) for t in e.terms))
    if isinstance(e, Product):
        return Product(tuple(conj_of(f) for f in e.factors))
    if isinstance(e, Power):
        return Power(conj_of(e.base), e.exponent)
    if isinstance(e, Mean):
        return Mean(conj_of(e.child))
    raise TypeError(f"unknown node kind: {type(e).__name__}")


def normalize_conj(e: Expr) -> Expr:
    """Rewrite so Conj only wraps Field/FieldDeriv/Param atoms."""
    if isinstance(e, Conj):
        return conj_of(normalize_conj(e.child))
    if isinstance(e, Sum):
        return Sum(tuple(normalize_conj(t) for t in e.terms))
    if isinstance(e, Product):
        return Product(tuple(normalize_conj(f) for f in e.factors))
    if isinstance(e, Power):
        return Power(normalize_conj(e.base), e.exponent)
    if isinstance(e, Mean):
        return Mean(normalize_conj(e.child))
    return e


_KIND_RANK = {
    Const: 0,
    Param: 1,
    Coord: 2,
    Field: 3,
    FieldDeriv: 4,
    Conj: 5,
    Power: 6,
    Product: 7,
    Sum: 8,
    Mean: 9,
}


def sort_key(e: Expr) -> tuple:
    """Deterministic total order used for canonical child ordering."""
    rank = _KIND_RANK[type(e)]
    if isinstance(e, Const):
        return (rank, e.value.real, e.value.imag)
    if isinstance(e, Param):
        return (rank, e.name)
    if isinstance(e, Coord):
        return (rank, e.axis)
    if isinstance(e, Field):
        return (rank, e.name)
    if isinstance(e, FieldDeriv):
        return (rank, e.name, e.axis)
    if isinstance(e, Conj):
        return (rank, sort_key(e.child))
    if isinstance(e, Power):
        return (rank, sort_key(e.base), e.exponent)
    if isinstance(e, (Product, Sum)):
        return (rank, tuple(sort_key(c) for c in children(e)))
    if isinstance(e, Mean):
        return (rank, sort_key(e.child))
    raise TypeError(f"unknown node kind: {type(e).__name__}")


def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _fmt_const(value: complex) -> str:
    re, im = value.real, value.imag
    if im == 0.0:
        return _fmt_real(re)
    if re == 0.0:
        return _fmt_real(im) + "i"
    # mixed constants fall outside the literal grammar; emit an
    # evaluation-equivalent parenthesized sum
    return f"({_fmt_real(re)} + {_fmt_real(im)}i)"


def to_text(e: Expr) -> str:
    """Render an expression in the DSL syntax.

    For trees whose constants are real or pure-imaginary (everything the
    grammar itself can produce), parsing the result reproduces the tree
    structurally.
    """
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Coord):
        return f"x{e.axis}"
    if isinstance(e, Field):
        return e.name
    if isinstance(e, FieldDeriv):
        return f"d({e.name},{e.axis})"
    if isinstance(e, Conj):
        return f"conj({to_text(e.child)})"
    if isinstance(e, Mean):
        return f"mean({to_text(e.child)})"
    if isinstance(e, Sum):
        return " + ".join(_wrap(t, parent="sum") for t in e.terms)
    if isinstance(e, Product):
        return " * ".join(_wrap(f, parent="product") for f in e.factors)
    if isinstance(e, Power):
        return f"{_wrap(e.base, parent='power')}^{e.exponent}"
    raise TypeError(f"unknown node kind: {type(e).__name__}")


def _wrap(e: Expr, parent: str) -> str:
    text = to_text(e)
    if isinstance(e, Sum):
        return f"({text})"
    if isinstance(e, Product) and parent in ("product", "power"):
        return f"({text})"
    if isinstance(e, Power) and parent == "power":
        return f"({text})"
    if isinstance(e, Const):
        v = e.value
        if v.imag != 0.0 and v.real != 0.0:
            return text  # already parenthesized
        if parent == "power" and (v.real < 0 or v.imag < 0):
            return f"({text})"
    return text
