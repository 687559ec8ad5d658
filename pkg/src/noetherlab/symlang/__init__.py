"""Lagrangian expression DSL: parsing, symbolic calculus, evaluation."""

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
    conj_of,
    contains_mean,
    is_constantlike,
    normalize_conj,
    to_text,
    walk,
)
from .parser import ParseError, parse
from .calculus import (
    DerivResult,
    EvaluationError,
    NonlocalTerm,
    SymbolBinding,
    collect_means,
    differentiate,
    evaluate,
    simplify,
    variational_expr,
)

__all__ = [
    "Conj",
    "Const",
    "Coord",
    "DerivResult",
    "EvaluationError",
    "Expr",
    "Field",
    "FieldDeriv",
    "Mean",
    "NonlocalTerm",
    "Param",
    "ParseError",
    "Power",
    "Product",
    "Sum",
    "SymbolBinding",
    "VOLUME_PARAM",
    "collect_means",
    "conj_of",
    "contains_mean",
    "differentiate",
    "evaluate",
    "is_constantlike",
    "normalize_conj",
    "parse",
    "simplify",
    "to_text",
    "variational_expr",
    "walk",
]
