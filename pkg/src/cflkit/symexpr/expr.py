"""Immutable expression trees and their rational-function normal form.

Normalization maps every expression onto a quotient of multivariate
polynomials over Q whose generators ("kernels") are chart variables,
elementary-function applications with normalized arguments, and opaque
symbols f^(d)(t).  Distinct kernels are treated as algebraically
independent: no trigonometric or exponential identities are applied, so
sin(x)^2 + cos(x)^2 - 1 normalizes to a nonzero form and is only caught
by numeric probing (see probe.equals).

The only kernel-level rewrite is sqrt(a)^2 -> a, which keeps derivative
closure (d sqrt = 1/(2 sqrt)) from leaking half-integer powers.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .poly import Poly, poly_gcd

FUNCTIONS = ("sin", "cos", "tan", "arctan", "exp", "ln", "sqrt")


class ExprError(Exception):
    pass


class EvalDomainError(ExprError):
    """Raised when a probe point hits a pole or domain boundary."""

    def __init__(self, message: str, subterm: "Expr | None" = None):
        super().__init__(message)
        self.subterm = subterm


# ---------------------------------------------------------------------------
# normal form
# ---------------------------------------------------------------------------


class NormalForm:
    """num/den with den integer-primitive, positive leading coefficient,
    and gcd(num, den) a unit."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        self.num = num
        self.den = den

    @staticmethod
    def make(num: Poly, den: Poly) -> "NormalForm":
        if den.is_zero:
            raise ExprError("division by zero in normalization")
        if num.is_zero:
            return NF_ZERO
        if not den.is_const:
            g = poly_gcd(num, den)
            if not g.is_const:
                num = num.exact_div(g)
                den = den.exact_div(g)
        scale, den = den.int_normalized()
        if den.is_const:
            num = num.scale(scale / den.const_value())
            den = Poly.const(1)
        else:
            num = num.scale(scale)
        return NormalForm(num, den)

    @staticmethod
    def const(c) -> "NormalForm":
        return NormalForm(Poly.const(c), Poly.const(1))

    @staticmethod
    def kernel(k) -> "NormalForm":
        return NormalForm(Poly.kernel(k), Poly.const(1))

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_const(self) -> bool:
        return self.num.is_const and self.den.is_const

    def const_value(self) -> Fraction:
        return self.num.const_value() / self.den.const_value()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NormalForm)
            and self.num == other.num
            and self.den == other.den
        )

    def __hash__(self):
        return hash((self.num, self.den))

    def __add__(self, other: "NormalForm") -> "NormalForm":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.den == other.den:
            return NormalForm.make(self.num + other.num, self.den)
        return NormalForm.make(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    def __neg__(self) -> "NormalForm":
        return NormalForm(-self.num, self.den)

    def __sub__(self, other: "NormalForm") -> "NormalForm":
        return self + (-other)

    def __mul__(self, other: "NormalForm") -> "NormalForm":
        if self.is_zero or other.is_zero:
            return NF_ZERO
        return NormalForm.make(self.num * other.num, self.den * other.den)

    def inv(self) -> "NormalForm":
        if self.is_zero:
            raise ExprError("division by zero expression")
        return NormalForm.make(self.den, self.num)

    def __truediv__(self, other: "NormalForm") -> "NormalForm":
        return self * other.inv()

    def pow(self, n: int) -> "NormalForm":
        if n == 0:
            return NF_ONE
        if n < 0:
            return self.inv().pow(-n)
        return NormalForm.make(self.num.pow(n), self.den.pow(n))

    def sqrt_reduced(self) -> "NormalForm":
        """Apply sqrt(a)^2 -> a monomial-wise; identity when no sqrt kernel."""
        changed = False
        for part in (self.num, self.den):
            for m in part.terms:
                for k, e in m:
                    if isinstance(k, Func) and k.name == "sqrt" and e >= 2:
                        changed = True
                        break
        if not changed:
            return self
        return _sqrt_reduce_poly(self.num) / _sqrt_reduce_poly(self.den)


def _sqrt_reduce_poly(p: Poly) -> NormalForm:
    out = NF_ZERO
    for m, c in p.terms.items():
        term = NormalForm.const(c)
        for k, e in m:
            if isinstance(k, Func) and k.name == "sqrt" and e >= 2:
                arg_nf = k.arg.nf
                term = term * arg_nf.pow(e // 2)
                if e % 2:
                    term = term * NormalForm.kernel(k)
            else:
                term = term * NormalForm.kernel(k).pow(e)
        out = out + term
    return out


NF_ZERO = NormalForm(Poly.zero(), Poly.const(1))
NF_ONE = NormalForm(Poly.const(1), Poly.const(1))


# ---------------------------------------------------------------------------
# expression nodes
# ---------------------------------------------------------------------------


class Expr:
    __slots__ = ("_nf", "_hash", "_canonical", "_str")

    def __init__(self):
        self._nf = None
        self._hash = None
        self._canonical = None
        self._str = None

    @property
    def nf(self) -> NormalForm:
        if self._nf is None:
            self._nf = self._compute_nf()
        return self._nf

    def _compute_nf(self) -> NormalForm:
        raise NotImplementedError

    def normalized(self) -> "Expr":
        if self._canonical is None:
            self._canonical = expr_of_nf(self.nf)
        return self._canonical

    @property
    def is_zero(self) -> bool:
        return self.nf.is_zero

    @property
    def sort_key(self) -> str:
        raise ExprError(f"{type(self).__name__} is not a kernel")

    def __str__(self) -> str:
        if self._str is None:
            self._str = _print(self)
        return self._str

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self}>"

    # arithmetic builds flattened raw nodes; normal forms combine eagerly so
    # repeated arithmetic on normalized operands stays cheap
    def __add__(self, other):
        other = as_expr(other)
        node = _add_flat(self, other)
        if node._nf is None:
            node._nf = self.nf + other.nf
        return node

    __radd__ = __add__

    def __neg__(self):
        return Rat(Fraction(-1)) * self

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        other = as_expr(other)
        node = _mul_flat(self, other)
        if node._nf is None:
            node._nf = self.nf * other.nf
        return node

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_expr(other)
        if isinstance(self, Rat) and isinstance(other, Rat):
            return Rat(self.value / other.value)
        node = Div(self, other)
        node._nf = self.nf / other.nf
        return node

    def __rtruediv__(self, other):
        return as_expr(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise ExprError("only integer powers are supported")
        node = Pow(self, n)
        node._nf = self.nf.pow(n).sqrt_reduced()
        return node

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def _key(self):
        raise NotImplementedError


class Rat(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = Fraction(value)
        self._nf = NormalForm.const(self.value)

    def _key(self):
        return ("rat", self.value)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__()
        self.name = name
        self._nf = NormalForm.kernel(self)

    @property
    def sort_key(self) -> str:
        return "v:" + self.name

    def _key(self):
        return ("var", self.name)


class Opaque(Expr):
    """Opaque function of t: f(t), f'(t), ..., f^(k)(t)."""

    __slots__ = ("fname", "order")

    def __init__(self, fname: str, order: int = 0):
        super().__init__()
        self.fname = fname
        self.order = order
        self._nf = NormalForm.kernel(self)

    @property
    def sort_key(self) -> str:
        return f"o:{self.fname}:{self.order:03d}"

    def _key(self):
        return ("opq", self.fname, self.order)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        super().__init__()
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def _compute_nf(self) -> NormalForm:
        carg = self.arg.normalized()
        if carg is self.arg or carg == self.arg:
            return _func_nf(self.name, self.arg, node=self)
        return _func_nf(self.name, carg)

    @property
    def sort_key(self) -> str:
        return f"f:{self.name}:{self.arg}"

    def _key(self):
        return ("fn", self.name, self.arg._key())


_AT_ZERO = {"sin": 0, "tan": 0, "arctan": 0, "exp": 1, "cos": 1, "sqrt": 0}


def _exact_sqrt(c: Fraction):
    if c < 0:
        return None
    p, q = c.numerator, c.denominator
    rp, rq = math.isqrt(p), math.isqrt(q)
    if rp * rp == p and rq * rq == q:
        return Fraction(rp, rq)
    return None


def _func_nf(name: str, arg: Expr, node: "Func | None" = None) -> NormalForm:
    """Register a function kernel, folding exact rational special points.

    Kernels stay algebraically independent otherwise; this only catches
    arguments that collapse to a constant, usually after substitution.
    """
    nf = arg.nf
    if nf.is_const:
        c = nf.const_value()
        if c == 0 and name in _AT_ZERO:
            return NormalForm.const(_AT_ZERO[name])
        if name == "ln" and c == 1:
            return NF_ZERO
        if name == "sqrt":
            root = _exact_sqrt(c)
            if root is not None:
                return NormalForm.const(root)
    return NormalForm.kernel(node if node is not None else Func(name, arg))


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        super().__init__()
        self.terms = terms

    def _compute_nf(self) -> NormalForm:
        out = NF_ZERO
        for t in self.terms:
            out = out + t.nf
        return out

    def _key(self):
        return ("add", tuple(t._key() for t in self.terms))


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        super().__init__()
        self.factors = factors

    def _compute_nf(self) -> NormalForm:
        out = NF_ONE
        for f in self.factors:
            out = out * f.nf
        return out.sqrt_reduced()

    def _key(self):
        return ("mul", tuple(f._key() for f in self.factors))


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        super().__init__()
        self.base = base
        self.exp = exp

    def _compute_nf(self) -> NormalForm:
        return self.base.nf.pow(self.exp).sqrt_reduced()

    def _key(self):
        return ("pow", self.base._key(), self.exp)


class Div(Expr):
    __slots__ = ("num_e", "den_e")

    def __init__(self, num_e: Expr, den_e: Expr):
        super().__init__()
        self.num_e = num_e
        self.den_e = den_e

    def _compute_nf(self) -> NormalForm:
        return self.num_e.nf / self.den_e.nf

    def _key(self):
        return ("div", self.num_e._key(), self.den_e._key())


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Rat(Fraction(x))
    raise ExprError(f"cannot coerce {x!r} to Expr")


def _add_flat(a: Expr, b: Expr) -> Add:
    terms = []
    for x in (a, b):
        if isinstance(x, Add):
            terms.extend(x.terms)
        else:
            terms.append(x)
    return Add(tuple(terms))


def _mul_flat(a: Expr, b: Expr) -> Mul:
    factors = []
    for x in (a, b):
        if isinstance(x, Mul):
            factors.extend(x.factors)
        else:
            factors.append(x)
    return Mul(tuple(factors))


ZERO = Rat(0)
ONE = Rat(1)


# ---------------------------------------------------------------------------
# canonical tree reconstruction
# ---------------------------------------------------------------------------


def _expr_of_mono(coeff: Fraction, mono) -> Expr:
    factors = []
    if coeff != 1 or not mono:
        factors.append(Rat(coeff))
    for k, e in mono:
        factors.append(k if e == 1 else Pow(k, e))
    if len(factors) == 1:
        return factors[0]
    return Mul(tuple(factors))


def expr_of_poly(p: Poly) -> Expr:
    if p.is_zero:
        return ZERO
    terms = [_expr_of_mono(c, m) for m, c in p.sorted_terms()]
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def expr_of_nf(nf: NormalForm) -> Expr:
    if nf.den.is_const:
        e = expr_of_poly(nf.num)
    else:
        e = Div(expr_of_poly(nf.num), expr_of_poly(nf.den))
    e._nf = nf
    e._canonical = e
    return e


def normalize(e: Expr) -> Expr:
    """Canonical representative of e; idempotent."""
    return e.normalized()


# ---------------------------------------------------------------------------
# printing (canonical trees round-trip through the parser)
# ---------------------------------------------------------------------------


def _print_opaque(o: Opaque) -> str:
    if o.order <= 3:
        return o.fname + "'" * o.order + "(t)"
    return f"{o.fname}^({o.order})(t)"


def _atom_str(e: Expr) -> str:
    s = _print(e)
    if isinstance(e, (Var, Opaque, Func)):
        return s
    if isinstance(e, Rat) and e.value >= 0 and e.value.denominator == 1:
        return s
    return "(" + s + ")"


def _mul_str(factors) -> tuple:
    """Render a factor sequence, returning (sign, body)."""
    sign = ""
    bits = []
    for f in factors:
        if isinstance(f, Rat):
            v = f.value
            if v < 0:
                sign = "" if sign else "-"
                v = -v
            if v != 1:
                bits.append(str(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}")
        elif isinstance(f, Pow):
            bits.append(_atom_str(f.base) + "^" + str(f.exp))
        elif isinstance(f, (Add, Div)):
            bits.append("(" + _print(f) + ")")
        else:
            bits.append(_print(f))
    if not bits:
        bits = ["1"]
    return sign, "*".join(bits)


def _term_str(t: Expr) -> tuple:
    if isinstance(t, Mul):
        return _mul_str(t.factors)
    if isinstance(t, Rat):
        v = t.value
        if v < 0:
            return "-", str(-v) if v.denominator == 1 else f"{-v.numerator}/{v.denominator}"
        return "", str(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(t, Pow):
        return "", _atom_str(t.base) + "^" + str(t.exp)
    return "", _print(t)


def _print(e: Expr) -> str:
    if isinstance(e, Rat):
        v = e.value
        return str(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Opaque):
        return _print_opaque(e)
    if isinstance(e, Func):
        return f"{e.name}({_print(e.arg)})"
    if isinstance(e, Add):
        out = ""
        for i, t in enumerate(e.terms):
            sign, body = _term_str(t)
            if i == 0:
                out = sign + body
            else:
                out += (" - " if sign == "-" else " + ") + body
        return out
    if isinstance(e, Mul):
        sign, body = _mul_str(e.factors)
        return sign + body
    if isinstance(e, Pow):
        if e.exp < 0:
            return _atom_str(e.base) + "^(" + str(e.exp) + ")"
        return _atom_str(e.base) + "^" + str(e.exp)
    if isinstance(e, Div):
        num, den = e.num_e, e.den_e
        ns = _print(num)
        if isinstance(num, Add):
            ns = "(" + ns + ")"
        elif isinstance(num, Mul) and _term_str(num)[0] == "-":
            ns = "(" + ns + ")"
        ds = _print(den)
        if not isinstance(den, (Var, Opaque, Func, Pow)) and not (
            isinstance(den, Rat) and den.value.denominator == 1 and den.value > 0
        ):
            ds = "(" + ds + ")"
        return ns + "/" + ds
    raise ExprError(f"cannot print {type(e).__name__}")


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def _kernel_diff(k: Expr, v: str) -> NormalForm:
    if isinstance(k, Var):
        return NF_ONE if k.name == v else NF_ZERO
    if isinstance(k, Opaque):
        if v == "t":
            return NormalForm.kernel(Opaque(k.fname, k.order + 1))
        return NF_ZERO
    if isinstance(k, Func):
        da = diff_nf(k.arg.nf, v)
        if da.is_zero:
            return NF_ZERO
        a = k.arg
        if k.name == "sin":
            outer = NormalForm.kernel(Func("cos", a))
        elif k.name == "cos":
            outer = -NormalForm.kernel(Func("sin", a))
        elif k.name == "tan":
            outer = NF_ONE + NormalForm.kernel(Func("tan", a)).pow(2)
        elif k.name == "arctan":
            outer = NF_ONE / (NF_ONE + a.nf.pow(2))
        elif k.name == "exp":
            outer = NormalForm.kernel(k)
        elif k.name == "ln":
            outer = a.nf.inv()
        elif k.name == "sqrt":
            outer = NF_ONE / (NormalForm.const(2) * NormalForm.kernel(k))
        else:  # pragma: no cover
            raise ExprError(f"no derivative rule for {k.name}")
        return outer * da
    raise ExprError(f"not a kernel: {k!r}")  # pragma: no cover


def _poly_diff(p: Poly, v: str) -> NormalForm:
    out = NF_ZERO
    for k in p.kernels():
        dk = _kernel_diff(k, v)
        if dk.is_zero:
            continue
        partial = p.diff_kernel(k)
        if partial.is_zero:
            continue
        out = out + NormalForm(partial, Poly.const(1)) * dk
    return out


def diff_nf(nf: NormalForm, v: str) -> NormalForm:
    dn = _poly_diff(nf.num, v)
    if nf.den.is_const:
        return dn * NormalForm.make(Poly.const(1), nf.den)
    dd = _poly_diff(nf.den, v)
    den_nf = NormalForm(nf.den, Poly.const(1))
    num_nf = NormalForm(nf.num, Poly.const(1))
    return (dn * den_nf - num_nf * dd) / den_nf.pow(2)


def diff(e: Expr, v: str) -> Expr:
    """Partial derivative; opaque symbols advance their order under d/dt."""
    return expr_of_nf(diff_nf(e.nf, v).sqrt_reduced())


def depends_on(e: Expr, v: str) -> bool:
    """True iff the derivative with respect to v is not identically zero."""
    return not diff_nf(e.nf, v).is_zero


# ---------------------------------------------------------------------------
# tree utilities
# ---------------------------------------------------------------------------


def free_vars(e: Expr) -> set:
    out: set = set()
    _walk_vars(e, out)
    return out


def _walk_vars(e: Expr, out: set):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, Opaque):
        out.add("t")
    elif isinstance(e, Func):
        _walk_vars(e.arg, out)
    elif isinstance(e, Add):
        for t in e.terms:
            _walk_vars(t, out)
    elif isinstance(e, Mul):
        for f in e.factors:
            _walk_vars(f, out)
    elif isinstance(e, Pow):
        _walk_vars(e.base, out)
    elif isinstance(e, Div):
        _walk_vars(e.num_e, out)
        _walk_vars(e.den_e, out)


def opaque_symbols(e: Expr) -> set:
    """All (name, order) opaque occurrences in e."""
    out: set = set()
    _walk_opaque(e, out)
    return out


def _walk_opaque(e: Expr, out: set):
    if isinstance(e, Opaque):
        out.add((e.fname, e.order))
    elif isinstance(e, Func):
        _walk_opaque(e.arg, out)
    elif isinstance(e, Add):
        for t in e.terms:
            _walk_opaque(t, out)
    elif isinstance(e, Mul):
        for f in e.factors:
            _walk_opaque(f, out)
    elif isinstance(e, Pow):
        _walk_opaque(e.base, out)
    elif isinstance(e, Div):
        _walk_opaque(e.num_e, out)
        _walk_opaque(e.den_e, out)


def subst(e: Expr, mapping: dict) -> Expr:
    """Substitute chart variables by expressions (names -> Expr), normalized.

    Opaque symbols are untouched; their argument t is not a substitutable slot.
    """
    if not mapping:
        return e.normalized()
    return expr_of_nf(_subst_nf(e.nf, {k: as_expr(v) for k, v in mapping.items()}))


def subst_opaques(e: Expr, curves: dict, time: str = "t") -> Expr:
    """Replace opaque symbols by concrete functions of time.

    curves maps an opaque name to an expression in the time variable; the
    k-th derivative symbol becomes the k-th t-derivative of that expression.
    Symbols not named in curves stay opaque.
    """
    omap = {}
    for fname, base in curves.items():
        derivs = [as_expr(base)]

        def at(order, derivs=derivs):
            while len(derivs) <= order:
                derivs.append(diff(derivs[-1], time))
            return derivs[order].nf

        omap[fname] = at
    return expr_of_nf(_subst_nf(e.nf, {}, omap))


def _subst_nf(nf: NormalForm, mapping: dict, omap: dict | None = None) -> NormalForm:
    num = _subst_poly(nf.num, mapping, omap)
    if nf.den.is_const:
        return num * NormalForm.make(Poly.const(1), nf.den)
    return num / _subst_poly(nf.den, mapping, omap)


def _subst_poly(p: Poly, mapping: dict, omap: dict | None = None) -> NormalForm:
    out = NF_ZERO
    for m, c in p.terms.items():
        term = NormalForm.const(c)
        for k, e in m:
            term = term * _subst_kernel(k, mapping, omap).pow(e)
        out = out + term
    return out.sqrt_reduced()


def _subst_kernel(k: Expr, mapping: dict, omap: dict | None = None) -> NormalForm:
    if isinstance(k, Var):
        r = mapping.get(k.name)
        return k.nf if r is None else r.nf
    if isinstance(k, Opaque):
        if omap and k.fname in omap:
            return omap[k.fname](k.order)
        return k.nf
    if isinstance(k, Func):
        arg_nf = _subst_nf(k.arg.nf, mapping, omap)
        return _func_nf(k.name, expr_of_nf(arg_nf))
    raise ExprError(f"not a kernel: {k!r}")  # pragma: no cover
