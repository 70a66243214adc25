"""Sparse multivariate polynomials over Q in "kernel" generators.

A kernel is any hashable object exposing a string attribute ``sort_key``
(chart variables, elementary-function applications, opaque symbols).  The
arithmetic here never looks inside a kernel: kernels are treated as
algebraically independent generators, which is exactly the normalization
policy the rest of the toolkit is built on.

Monomials are tuples of (kernel, exponent) pairs sorted by ``sort_key``;
coefficients are ``fractions.Fraction``.  Division and gcd are exact; gcd
uses the primitive PRS so rational functions can be kept reduced.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

Mono = tuple  # tuple[tuple[kernel, int], ...]

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        ka, ea = a[i]
        kb, eb = b[j]
        if ka == kb:
            e = ea + eb
            if e:
                out.append((ka, e))
            i += 1
            j += 1
        elif ka.sort_key < kb.sort_key:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _mono_degree(m: Mono) -> int:
    return sum(e for _, e in m)


def _mono_key(m: Mono):
    # graded lexicographic: total degree first, then kernel-wise
    return (_mono_degree(m), tuple((k.sort_key, e) for k, e in m))


def _mono_divides(a: Mono, b: Mono) -> bool:
    """True iff monomial a divides b."""
    db = dict(b)
    for k, e in a:
        if db.get(k, 0) < e:
            return False
    return True


def _mono_div(b: Mono, a: Mono) -> Mono:
    da = dict(a)
    out = []
    for k, e in b:
        r = e - da.get(k, 0)
        if r:
            out.append((k, r))
    return tuple(out)


class Poly:
    """Immutable sparse polynomial: dict monomial -> Fraction."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict):
        self.terms = terms

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero() -> "Poly":
        return _POLY_ZERO

    @staticmethod
    def const(c) -> "Poly":
        c = Fraction(c)
        if c == 0:
            return _POLY_ZERO
        return Poly({(): c})

    @staticmethod
    def kernel(k) -> "Poly":
        return Poly({((k, 1),): _ONE})

    # -- predicates ------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and () in self.terms)

    def const_value(self) -> Fraction:
        if self.is_zero:
            return _ZERO
        return self.terms[()]

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, _ZERO) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        if self.is_zero or other.is_zero:
            return _POLY_ZERO
        if other.is_const:
            return self.scale(other.const_value())
        if self.is_const:
            return other.scale(self.const_value())
        out: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = _mono_mul(ma, mb)
                s = out.get(m, _ZERO) + ca * cb
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Poly(out)

    def scale(self, c) -> "Poly":
        c = Fraction(c)
        if c == 0:
            return _POLY_ZERO
        if c == 1:
            return self
        return Poly({m: cc * c for m, cc in self.terms.items()})

    def pow(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("Poly.pow expects n >= 0")
        result = Poly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- structure ---------------------------------------------------------

    def kernels(self) -> set:
        out = set()
        for m in self.terms:
            for k, _ in m:
                out.add(k)
        return out

    def total_degree(self) -> int:
        if self.is_zero:
            return 0
        return max(_mono_degree(m) for m in self.terms)

    def degree_in(self, k) -> int:
        d = 0
        for m in self.terms:
            for kk, e in m:
                if kk == k and e > d:
                    d = e
        return d

    def sorted_terms(self) -> list:
        """Terms in descending graded-lex order (leading term first)."""
        return sorted(self.terms.items(), key=lambda t: _mono_key(t[0]), reverse=True)

    def leading(self) -> tuple:
        return self.sorted_terms()[0]

    def diff_kernel(self, k) -> "Poly":
        """Formal partial derivative with respect to kernel k."""
        out: dict = {}
        for m, c in self.terms.items():
            for idx, (kk, e) in enumerate(m):
                if kk == k:
                    if e == 1:
                        mm = m[:idx] + m[idx + 1:]
                    else:
                        mm = m[:idx] + ((kk, e - 1),) + m[idx + 1:]
                    s = out.get(mm, _ZERO) + c * e
                    if s:
                        out[mm] = s
                    else:
                        out.pop(mm, None)
                    break
        return Poly(out)

    # -- univariate views ----------------------------------------------------

    def as_univariate(self, k) -> dict:
        """View as a polynomial in k with Poly coefficients: {deg: Poly}."""
        out: dict = {}
        for m, c in self.terms.items():
            e_k = 0
            rest = []
            for kk, e in m:
                if kk == k:
                    e_k = e
                else:
                    rest.append((kk, e))
            rest = tuple(rest)
            coeff = out.setdefault(e_k, {})
            s = coeff.get(rest, _ZERO) + c
            if s:
                coeff[rest] = s
            else:
                coeff.pop(rest, None)
        return {d: Poly(t) for d, t in out.items() if t}

    @staticmethod
    def from_univariate(k, coeffs: dict) -> "Poly":
        out: dict = {}
        for d, p in coeffs.items():
            if d == 0:
                for m, c in p.terms.items():
                    s = out.get(m, _ZERO) + c
                    if s:
                        out[m] = s
                    else:
                        out.pop(m, None)
            else:
                km = ((k, d),)
                for m, c in p.terms.items():
                    mm = _mono_mul(m, km)
                    s = out.get(mm, _ZERO) + c
                    if s:
                        out[mm] = s
                    else:
                        out.pop(mm, None)
        return Poly(out)

    # -- exact division ---------------------------------------------------------

    def exact_div(self, other: "Poly") -> "Poly":
        """Exact division; raises ExactDivisionError if not divisible."""
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero:
            return _POLY_ZERO
        if other.is_const:
            return self.scale(1 / other.const_value())
        ks = sorted(other.kernels(), key=lambda k: k.sort_key)
        k = ks[-1]
        num = self.as_univariate(k)
        den = other.as_univariate(k)
        dd = max(den)
        dlead = den[dd]
        quo: dict = {}
        while num:
            dn = max(num)
            if dn < dd:
                raise ExactDivisionError("not divisible")
            q = num[dn].exact_div(dlead)
            quo[dn - dd] = q
            for d, p in den.items():
                t = d + dn - dd
                r = num.get(t, _POLY_ZERO) - p * q
                if r.is_zero:
                    num.pop(t, None)
                else:
                    num[t] = r
        return Poly.from_univariate(k, quo)

    # -- normalization helpers -----------------------------------------------------

    def int_normalized(self) -> tuple:
        """Return (scale, P') with P' = scale * self, P' integer-primitive,
        leading coefficient positive.  scale is a positive or negative Fraction."""
        if self.is_zero:
            return (_ONE, self)
        from math import gcd as igcd

        num_gcd = 0
        den_lcm = 1
        for c in self.terms.values():
            num_gcd = igcd(num_gcd, abs(c.numerator))
            den_lcm = den_lcm // igcd(den_lcm, c.denominator) * c.denominator
        scale = Fraction(den_lcm, num_gcd)
        lead = self.leading()[1]
        if lead < 0:
            scale = -scale
        return (scale, self.scale(scale))

    def __repr__(self):
        if self.is_zero:
            return "Poly(0)"
        bits = []
        for m, c in self.sorted_terms():
            ms = "*".join(
                f"{k.sort_key}^{e}" if e != 1 else f"{k.sort_key}" for k, e in m
            )
            bits.append(f"{c}{'*' + ms if ms else ''}")
        return "Poly(" + " + ".join(bits) + ")"


class ExactDivisionError(ArithmeticError):
    pass


_POLY_ZERO = Poly({})


# -- gcd ----------------------------------------------------------------------


def _content_primitive(p: Poly, k) -> tuple:
    """Content/primitive split of p viewed in the kernel k."""
    uni = p.as_univariate(k)
    cont = _POLY_ZERO
    for coeff in uni.values():
        cont = poly_gcd(cont, coeff)
        if cont.is_const and not cont.is_zero:
            break
    if cont.is_zero or cont.is_const:
        cont = Poly.const(1)
    prim = p.exact_div(cont)
    return cont, prim


def _pseudo_rem(a: dict, b: dict, k) -> dict:
    """Pseudo-remainder of univariate views a, b (dict deg -> Poly)."""
    da = max(a)
    db = max(b)
    lead_b = b[db]
    r = dict(a)
    while r:
        dr = max(r)
        if dr < db:
            break
        lead_r = r[dr]
        # r = lead_b * r - lead_r * x^(dr-db) * b
        new: dict = {}
        for d, p in r.items():
            new[d] = p * lead_b
        for d, p in b.items():
            t = d + dr - db
            new[t] = new.get(t, _POLY_ZERO) - p * lead_r
        r = {d: p for d, p in new.items() if not p.is_zero}
    return r


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Gcd over Q, returned integer-primitive with positive leading coefficient.
    Gcd of anything with a nonzero constant is 1."""
    if a.is_zero and b.is_zero:
        return _POLY_ZERO
    if a.is_zero:
        return b.int_normalized()[1]
    if b.is_zero:
        return a.int_normalized()[1]
    if a.is_const or b.is_const:
        return Poly.const(1)
    ks = sorted(a.kernels() | b.kernels(), key=lambda k: k.sort_key)
    k = ks[-1]
    da = a.degree_in(k)
    db = b.degree_in(k)
    if da == 0 and db == 0:
        # k not actually in either (can't happen given kernel collection), fall through
        return Poly.const(1)
    if da == 0:
        cont_b, _ = _content_primitive(b, k)
        return poly_gcd(a, cont_b)
    if db == 0:
        cont_a, _ = _content_primitive(a, k)
        return poly_gcd(cont_a, b)
    cont_a, prim_a = _content_primitive(a, k)
    cont_b, prim_b = _content_primitive(b, k)
    cont = poly_gcd(cont_a, cont_b)
    A = prim_a.as_univariate(k)
    B = prim_b.as_univariate(k)
    if max(A) < max(B):
        A, B = B, A
    while True:
        R = _pseudo_rem(A, B, k)
        if not R:
            g = Poly.from_univariate(k, B)
            break
        if max(R) == 0:
            g = Poly.const(1)
            break
        _, prim = _content_primitive(Poly.from_univariate(k, R), k)
        A, B = B, prim.as_univariate(k)
    if not g.is_const:
        _, g = _content_primitive(g, k)
    out = cont * g
    return out.int_normalized()[1]
