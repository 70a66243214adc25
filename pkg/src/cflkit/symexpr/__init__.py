"""Symbolic expression kernel: trees, normal forms, parsing, probing."""

from .expr import (
    Add,
    Div,
    EvalDomainError,
    Expr,
    ExprError,
    Func,
    Mul,
    NormalForm,
    Opaque,
    Pow,
    Rat,
    Var,
    ONE,
    ZERO,
    as_expr,
    depends_on,
    diff,
    expr_of_nf,
    expr_of_poly,
    free_vars,
    normalize,
    opaque_symbols,
    subst,
    subst_opaques,
)
from .parser import ParseError, parse
from .poly import ExactDivisionError, Poly, poly_gcd
from .probe import (
    DEFAULT_PROBE,
    FALSE,
    PROBABLY_EQUAL,
    TRUE,
    UNDECIDED,
    ProbeConfig,
    Verdict,
    equals,
    eval_expr,
    is_zero,
    sample_value,
    set_default_probe,
)

__all__ = [
    "Add",
    "Div",
    "EvalDomainError",
    "Expr",
    "ExprError",
    "Func",
    "Mul",
    "NormalForm",
    "Opaque",
    "ParseError",
    "Poly",
    "ExactDivisionError",
    "Pow",
    "Rat",
    "Var",
    "ONE",
    "ZERO",
    "DEFAULT_PROBE",
    "FALSE",
    "PROBABLY_EQUAL",
    "TRUE",
    "UNDECIDED",
    "ProbeConfig",
    "Verdict",
    "as_expr",
    "depends_on",
    "diff",
    "equals",
    "eval_expr",
    "expr_of_nf",
    "expr_of_poly",
    "free_vars",
    "is_zero",
    "normalize",
    "opaque_symbols",
    "parse",
    "poly_gcd",
    "sample_value",
    "set_default_probe",
    "subst",
    "subst_opaques",
]
