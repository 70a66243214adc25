"""Numeric probing: randomized evaluation and the four-valued equality verdict.

Normalization alone cannot prove identities that mix kernels (for example
sin^2 + cos^2 = 1), so equality testing falls back to evaluating both sides
at random rational points.  Verdicts:

    TRUE             difference normalizes to literal zero
    PROBABLY_EQUAL   nonzero normal form, but all probe points agree
    FALSE            a probe point separates the two sides
    UNDECIDED        not enough admissible probe points (poles, domains)

TRUE and PROBABLY_EQUAL are truthy; the other two are falsy.  All sampling
is driven by an explicit seed, so verdicts are reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    Add,
    Div,
    EvalDomainError,
    Expr,
    Func,
    Mul,
    Opaque,
    Pow,
    Rat,
    Var,
    as_expr,
    free_vars,
    opaque_symbols,
)


class Verdict:
    __slots__ = ("name", "truthy")

    def __init__(self, name: str, truthy: bool):
        self.name = name
        self.truthy = truthy

    def __bool__(self) -> bool:
        return self.truthy

    def __repr__(self) -> str:
        return self.name


TRUE = Verdict("TRUE", True)
PROBABLY_EQUAL = Verdict("PROBABLY_EQUAL", True)
FALSE = Verdict("FALSE", False)
UNDECIDED = Verdict("UNDECIDED", False)


@dataclass(frozen=True)
class ProbeConfig:
    seed: int = 0
    points: int = 5
    tol: float = 1e-9
    retries: int = 20

    def rng(self) -> random.Random:
        return random.Random(self.seed)


DEFAULT_PROBE = ProbeConfig()


def set_default_probe(config: ProbeConfig) -> ProbeConfig:
    """Swap the process-wide default probe; returns the previous one."""
    global DEFAULT_PROBE
    old = DEFAULT_PROBE
    DEFAULT_PROBE = config
    return old


_DIV_EPS = 1e-12


def sample_value(rng: random.Random) -> Fraction:
    """A small nonzero rational: numerator in +-1..10, denominator in 1..3."""
    num = rng.randint(1, 10) * rng.choice((1, -1))
    den = rng.choice((1, 2, 3))
    return Fraction(num, den)


def eval_expr(e: Expr, env: dict, opaque_env: dict | None = None) -> float:
    """Evaluate over floats; env maps variable names to numbers, opaque_env
    maps (fname, order) pairs.  Raises EvalDomainError at poles and domain
    boundaries, carrying the offending subterm."""
    opaque_env = opaque_env or {}
    return _eval(e, env, opaque_env)


def _eval(e: Expr, env: dict, oenv: dict) -> float:
    if isinstance(e, Rat):
        return float(e.value)
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise EvalDomainError(f"unbound variable {e.name}", e) from None
    if isinstance(e, Opaque):
        key = (e.fname, e.order)
        try:
            return float(oenv[key])
        except KeyError:
            raise EvalDomainError(f"unbound opaque symbol {e}", e) from None
    if isinstance(e, Func):
        a = _eval(e.arg, env, oenv)
        if e.name == "sin":
            return math.sin(a)
        if e.name == "cos":
            return math.cos(a)
        if e.name == "tan":
            return math.tan(a)
        if e.name == "arctan":
            return math.atan(a)
        if e.name == "exp":
            if a > 700.0:
                raise EvalDomainError("exp overflow", e)
            return math.exp(a)
        if e.name == "ln":
            if a <= 0.0:
                raise EvalDomainError("ln of non-positive value", e)
            return math.log(a)
        if e.name == "sqrt":
            if a < 0.0:
                raise EvalDomainError("sqrt of negative value", e)
            return math.sqrt(a)
        raise EvalDomainError(f"unknown function {e.name}", e)  # pragma: no cover
    if isinstance(e, Add):
        return sum(_eval(t, env, oenv) for t in e.terms)
    if isinstance(e, Mul):
        out = 1.0
        for f in e.factors:
            out *= _eval(f, env, oenv)
        return out
    if isinstance(e, Pow):
        b = _eval(e.base, env, oenv)
        if e.exp < 0 and abs(b) < _DIV_EPS:
            raise EvalDomainError("pole in negative power", e)
        return b ** e.exp
    if isinstance(e, Div):
        num = _eval(e.num_e, env, oenv)
        den = _eval(e.den_e, env, oenv)
        if abs(den) < _DIV_EPS:
            raise EvalDomainError("division by zero at probe point", e)
        return num / den
    raise EvalDomainError(f"cannot evaluate {type(e).__name__}", e)  # pragma: no cover


def _probe_environments(names, opaques, rng: random.Random):
    env = {n: sample_value(rng) for n in sorted(names)}
    oenv = {k: sample_value(rng) for k in sorted(opaques)}
    return env, oenv


def _term_values(p, env: dict, oenv: dict) -> list:
    """Evaluate each monomial of a kernel polynomial separately.

    Monomials are pure products, so they never cancel internally; the
    caller compares their sum against the largest magnitude.  That keeps
    the verdict honest when individually huge terms cancel, which is
    exactly the situation exact normalization could not resolve.
    """
    vals = []
    for mono, coeff in p.sorted_terms():
        v = float(coeff)
        for k, e in mono:
            v *= _eval(k, env, oenv) ** e
        vals.append(v)
    return vals


def equals(a, b, config: ProbeConfig | None = None) -> Verdict:
    """Four-valued equality of two expressions (see module docstring)."""
    cfg = config or DEFAULT_PROBE
    a = as_expr(a)
    b = as_expr(b)
    delta = (a - b).nf.sqrt_reduced()
    if delta.is_zero:
        return TRUE
    if delta.is_const:
        return FALSE
    names = set()
    opaques = set()
    for k in delta.num.kernels():
        names |= free_vars(k)
        opaques |= opaque_symbols(k)
    rng = cfg.rng()
    accepted = 0
    attempts = 0
    budget = cfg.points * (cfg.retries + 1)
    while accepted < cfg.points and attempts < budget:
        attempts += 1
        env, oenv = _probe_environments(names, opaques, rng)
        try:
            vals = _term_values(delta.num, env, oenv)
        except (EvalDomainError, OverflowError):
            continue
        if not all(math.isfinite(v) for v in vals):
            continue
        scale = max(1.0, *(abs(v) for v in vals))
        if abs(sum(vals)) > cfg.tol * scale:
            return FALSE
        accepted += 1
    if accepted < cfg.points:
        return UNDECIDED
    return PROBABLY_EQUAL


def is_zero(e, config: ProbeConfig | None = None) -> Verdict:
    return equals(e, 0, config)
