"""Cascade linearizability tests on partial prolongations with a group fiber.

A partial prolongation carries jet chains z^i_0, ..., z^i_{sigma_i}; its
contact forms dz^i_l - z^i_{l+1} dt make a Brunovsky block.  A contact
sub-connection adjoins fiber coordinates eps_a driven by functions
p^b(t, z) through a matrix rho(eps):

    d eps_a - rho^a_b(eps) p^b dt.

Freezing a subset of the chains along fixed curves f_i(t), kept as opaque
symbols, leaves a reduced system on the remaining chains and the fiber.
Whether a codimension-one reduction is static feedback linearizable is
controlled by the p functions alone:

  * necessity: the truncated Euler operator of order sigma_i applied to
    the frozen p must not touch any positive-order jet of the retained
    chain, and must not vanish;
  * sufficiency: an explicit presentation p = sum of iterated chain total
    derivatives D_{t,i}^l A_l, with every A_l free of t and of the
    positive-order jets of chain i, certifies linearizability.

The Q sequence ties the two together: Q_0 = 0, and

    Q_k = D_t(Q_{k-1}) + (-1)^k dp/dz^i_{sigma-k+1},

so Q_{sigma+1} = (-1)^(sigma-1) E_sigma(p) and the Cauchy characteristics
of the derived flag downstairs are spanned by Q_k d_eps + (-1)^k d_{z_{sigma-k}}.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

from .geomcore import Chart, ControlSystem, VectorField
from .goursat import GoursatReport, recognize
from .symexpr import (
    Expr,
    Func,
    NormalForm,
    Opaque,
    Poly,
    Var,
    as_expr,
    depends_on,
    diff,
    equals,
    expr_of_nf,
    free_vars,
    normalize,
    poly_gcd,
    subst,
)


class CascadeError(Exception):
    pass


def slot(i: int, l: int) -> str:
    """Chart name of jet l on chain i."""
    return f"z{i}_{l}"


def fiber_name(a: int) -> str:
    return f"eps{a}"


def signature_orders(kappa) -> tuple:
    """Chain orders from a signature: kappa[j-1] chains of order j."""
    orders = []
    for j, count in enumerate(kappa, start=1):
        if count < 0:
            raise CascadeError("negative multiplicity in signature")
        orders.extend([j] * count)
    return tuple(orders)


def orders_signature(orders) -> tuple:
    if not orders:
        return ()
    top = max(orders)
    return tuple(sum(1 for s in orders if s == j) for j in range(1, top + 1))


@dataclass
class JetChart:
    """Time-extended chart of jet chains plus optional fiber slots.

    orders maps 1-based chain index to top order.  Top slots carry the
    control role so the advance dynamics form a ControlSystem.
    """

    orders: dict
    chart: Chart
    fiber: tuple

    def top(self, i: int) -> str:
        return slot(i, self.orders[i])

    def chain_slots(self, i: int) -> list:
        return [slot(i, l) for l in range(self.orders[i] + 1)]


def jet_chart(orders, fiber: int = 0, time: str = "t") -> JetChart:
    pairs = [(time, "time")]
    for i in sorted(orders):
        s = orders[i]
        if s < 1:
            raise CascadeError(f"chain {i} needs order >= 1")
        for l in range(s + 1):
            pairs.append((slot(i, l), "state" if l < s else "control"))
    eps = tuple(fiber_name(a) for a in range(1, fiber + 1))
    for name in eps:
        pairs.append((name, "state"))
    return JetChart(dict(orders), Chart.build(pairs), eps)


def total_derivative(jets: JetChart) -> VectorField:
    """Truncated total derivative: advances each slot below its chain top.

    The t component is 1, so applying the field also advances opaque
    curve symbols, which is what a reduced chart needs.
    """
    comps = {jets.chart.time: as_expr(1)}
    for i, s in jets.orders.items():
        for l in range(s):
            comps[slot(i, l)] = Var(slot(i, l + 1))
    return VectorField(jets.chart, comps)


def chain_derivative(jets: JetChart, i: int, with_time: bool = True) -> VectorField:
    """Total derivative seeing only chain i (plus t unless disabled)."""
    comps = {}
    if with_time:
        comps[jets.chart.time] = as_expr(1)
    for l in range(jets.orders[i]):
        comps[slot(i, l)] = Var(slot(i, l + 1))
    return VectorField(jets.chart, comps)


def dt_first_integral(jets: JetChart, i: int, k: int) -> Expr:
    """k-th first integral of the truncated total derivative on chain i,

        I_k = sum_{a=0}^{k} (-1)^(k-a)/(k-a)! t^(k-a) z_{sigma-a},

    for 0 <= k <= sigma_i."""
    sigma = jets.orders[i]
    if not 0 <= k <= sigma:
        raise CascadeError(f"first integral index {k} outside 0..{sigma}")
    t = Var(jets.chart.time)
    out = as_expr(0)
    for a in range(k + 1):
        c = Fraction((-1) ** (k - a), math.factorial(k - a))
        out = out + as_expr(c) * t ** (k - a) * Var(slot(i, sigma - a))
    return normalize(out)


def t_free_invariant(jets: JetChart, i: int, k: int) -> Expr:
    """k-th t-independent invariant of the truncated total derivative,
    1 <= k <= sigma_i; J_1 is the top slot."""
    sigma = jets.orders[i]
    if not 1 <= k <= sigma:
        raise CascadeError(f"invariant index {k} outside 1..{sigma}")
    if k == 1:
        return Var(slot(i, sigma))
    z_top = Var(slot(i, sigma))
    z_sub = Var(slot(i, sigma - 1))
    lead = Fraction((-1) ** (k - 1) * (k - 1), math.factorial(k))
    out = as_expr(lead) * z_sub**k
    for a in range(2, k + 1):
        c = Fraction((-1) ** (k - a), math.factorial(k - a))
        out = out + as_expr(c) * Var(slot(i, sigma - a)) * z_top ** (a - 1) * z_sub ** (k - a)
    return normalize(out)


def truncated_euler(jets: JetChart, i: int, tau: int, f) -> Expr:
    """E_tau(f) = sum_{j=0}^{tau} (-1)^j D_t^j (df/dz^i_j)."""
    if tau > jets.orders[i]:
        raise CascadeError(f"order {tau} exceeds chain {i} top {jets.orders[i]}")
    d = total_derivative(jets)
    f = as_expr(f)
    out = as_expr(0)
    for j in range(tau + 1):
        term = diff(f, slot(i, j))
        for _ in range(j):
            term = d(term)
        out = out + as_expr((-1) ** j) * term
    return normalize(out)


def euler_kernel_image(jets: JetChart, i: int, tau: int, g):
    """Both sides of E_tau(D_t g) = (-1)^tau D_t^(tau+1)(dg/dz^i_tau).

    Returns (lhs, rhs, gap); the gap normalizes to zero whenever the
    operators are implemented consistently, so this doubles as a self-test.
    """
    d = total_derivative(jets)
    g = as_expr(g)
    lhs = truncated_euler(jets, i, tau, d(g))
    rhs = diff(g, slot(i, tau))
    for _ in range(tau + 1):
        rhs = d(rhs)
    rhs = normalize(as_expr((-1) ** tau) * rhs)
    return lhs, rhs, normalize(lhs - rhs)


# ---------------------------------------------------------------------------
# sub-connections and curve reductions
# ---------------------------------------------------------------------------


@dataclass
class ContactSubConnection:
    """Brunovsky block plus a driven group fiber on a shared chart."""

    jets: JetChart
    p: tuple
    rho: tuple | None = None

    def __post_init__(self):
        self.p = tuple(as_expr(q) for q in self.p)
        if len(self.p) != len(self.jets.fiber):
            raise CascadeError("one p per fiber coordinate")
        allowed = {self.jets.chart.time}
        for i in self.jets.orders:
            allowed.update(self.jets.chain_slots(i))
        for q in self.p:
            bad = free_vars(q) - allowed
            if bad:
                raise CascadeError(f"p may only use time and jet slots, found {sorted(bad)}")
        if self.rho is not None:
            r = self.r
            rows = tuple(tuple(as_expr(e) for e in row) for row in self.rho)
            if len(rows) != r or any(len(row) != r for row in rows):
                raise CascadeError(f"rho must be a {r} by {r} table")
            eps_ok = set(self.jets.fiber) | {self.jets.chart.time}
            for row in rows:
                for e in row:
                    bad = free_vars(e) - eps_ok
                    if bad:
                        raise CascadeError(f"rho entries live on the fiber, found {sorted(bad)}")
            self.rho = rows

    @property
    def r(self) -> int:
        return len(self.jets.fiber)

    def eps_rates(self, p=None) -> dict:
        """Fiber velocities rho(eps) p, as a name -> Expr map."""
        p = self.p if p is None else tuple(as_expr(q) for q in p)
        rates = {}
        for a, name in enumerate(self.jets.fiber):
            if self.rho is None:
                rates[name] = normalize(p[a])
            else:
                acc = as_expr(0)
                for b in range(self.r):
                    acc = acc + self.rho[a][b] * p[b]
                rates[name] = normalize(acc)
        return rates

    def system(self) -> ControlSystem:
        rhs = {}
        for i, s in self.jets.orders.items():
            for l in range(s):
                rhs[slot(i, l)] = Var(slot(i, l + 1))
        rhs.update(self.eps_rates())
        return ControlSystem(self.jets.chart, rhs)

    def relative_recognition(self) -> GoursatReport:
        """Recognition of the annihilating distribution together with the
        fiber translations, with r = fiber dimension.  Only meaningful for
        identity rho, where the translations are genuine symmetries."""
        if self.rho is not None:
            raise CascadeError("relative recognition needs an identity rho")
        chart = self.jets.chart
        verticals = [VectorField(chart, {name: as_expr(1)}) for name in self.jets.fiber]
        dist = self.system().distribution().plus(*verticals)
        return recognize(dist, r=self.r)


def sub_connection(kappa, p, rho=None) -> ContactSubConnection:
    orders = {i + 1: s for i, s in enumerate(signature_orders(kappa))}
    if not orders:
        raise CascadeError("empty signature")
    jets = jet_chart(orders, fiber=len(tuple(p)))
    return ContactSubConnection(jets, tuple(p), rho)


@dataclass
class ContactCurveSpec:
    """Partition of the chains into retained and dropped, with the curve
    name each dropped chain freezes along."""

    orders: dict
    retained: tuple
    dropped: dict

    @property
    def codimension(self) -> int:
        return sum(self.orders[i] + 1 for i in self.dropped)


@dataclass
class CurveReduction:
    spec: ContactCurveSpec
    jets: JetChart
    system: ControlSystem
    p_bar: tuple
    frozen: dict
    sub: ContactSubConnection


def reduce_along_curves(sub: ContactSubConnection, dropped: dict) -> CurveReduction:
    """Freeze the given chains along opaque curves.

    dropped maps chain index to the curve symbol name; slot z^i_l becomes
    the l-th derivative symbol.  The contact forms of a dropped chain
    vanish identically under the substitution, so the reduced system keeps
    only the retained chains and the fiber.
    """
    for i in dropped:
        if i not in sub.jets.orders:
            raise CascadeError(f"no chain {i} to drop")
    retained = tuple(i for i in sorted(sub.jets.orders) if i not in dropped)
    spec = ContactCurveSpec(dict(sub.jets.orders), retained, dict(dropped))
    frozen = {}
    for i, fname in dropped.items():
        for l in range(sub.jets.orders[i] + 1):
            frozen[slot(i, l)] = Opaque(fname, l)
    p_bar = tuple(subst(q, frozen) for q in sub.p)
    jets = jet_chart({i: sub.jets.orders[i] for i in retained}, fiber=sub.r)
    rhs = {}
    for i in retained:
        for l in range(sub.jets.orders[i]):
            rhs[slot(i, l)] = Var(slot(i, l + 1))
    rhs.update(ContactSubConnection(jets, p_bar, sub.rho).eps_rates())
    return CurveReduction(spec, jets, ControlSystem(jets.chart, rhs), p_bar, frozen, sub)


def _single_retained(red: CurveReduction) -> int:
    if len(red.spec.retained) != 1:
        raise CascadeError("this test needs exactly one retained chain")
    if len(red.p_bar) != 1:
        raise CascadeError("this test needs a one-dimensional fiber")
    return red.spec.retained[0]


# ---------------------------------------------------------------------------
# the Q sequence and the linearizability tests
# ---------------------------------------------------------------------------


@dataclass
class QSequence:
    chain: int
    qs: tuple
    fields: tuple

    @property
    def top(self) -> Expr:
        return self.qs[-1]


def q_sequence(red: CurveReduction) -> QSequence:
    """Q_0 .. Q_{sigma+1} for a codimension-one reduction, together with
    the fields Q_k d_eps + (-1)^k d_{z_{sigma-k}} whose spans are the
    Cauchy bundles of the reduced derived flag."""
    i = _single_retained(red)
    sigma = red.jets.orders[i]
    d = total_derivative(red.jets)
    p_bar = red.p_bar[0]
    qs = [as_expr(0)]
    for k in range(1, sigma + 2):
        nxt = d(qs[-1]) + as_expr((-1) ** k) * diff(p_bar, slot(i, sigma - k + 1))
        qs.append(normalize(nxt))
    eps = red.jets.fiber[0]
    fields = []
    for k in range(sigma + 1):
        comps = {eps: qs[k], slot(i, sigma - k): as_expr((-1) ** k)}
        fields.append(VectorField(red.jets.chart, comps))
    return QSequence(i, tuple(qs), tuple(fields))


def cc_pde_check(red: CurveReduction, q: QSequence | None = None):
    """All compatibility equations

        (-1)^a dQ_k/dz_{sigma-a} + (-1)^(k+1) dQ_a/dz_{sigma-k} = 0

    over 0 <= a <= k <= sigma.  Returns (ok, violations)."""
    q = q or q_sequence(red)
    i = q.chain
    sigma = red.jets.orders[i]
    bad = []
    for k in range(sigma + 1):
        for a in range(k + 1):
            gap = as_expr((-1) ** a) * diff(q.qs[k], slot(i, sigma - a)) + as_expr(
                (-1) ** (k + 1)
            ) * diff(q.qs[a], slot(i, sigma - k))
            gap = normalize(gap)
            if not gap.is_zero and not equals(gap, 0):
                bad.append((a, k, gap))
    return (not bad, bad)


def eoq_identity(red: CurveReduction, k: int):
    """Both sides of

        (-1)^(sigma-1) D_t^(sigma-k) Q_{k+1} = E_sigma(p) - E_{sigma-k-1}(p)

    with E_{-1} = 0 at the k = sigma boundary.  Returns (lhs, rhs, ok)."""
    i = _single_retained(red)
    sigma = red.jets.orders[i]
    if not 0 <= k <= sigma:
        raise CascadeError(f"identity index {k} outside 0..{sigma}")
    q = q_sequence(red)
    d = total_derivative(red.jets)
    lhs = q.qs[k + 1]
    for _ in range(sigma - k):
        lhs = d(lhs)
    lhs = normalize(as_expr((-1) ** (sigma - 1)) * lhs)
    p_bar = red.p_bar[0]
    rhs = truncated_euler(red.jets, i, sigma, p_bar)
    if sigma - k - 1 >= 0:
        rhs = rhs - truncated_euler(red.jets, i, sigma - k - 1, p_bar)
    rhs = normalize(rhs)
    return lhs, rhs, bool(equals(lhs, rhs))


@dataclass
class NecessityReport:
    chain: int
    euler: Expr
    offenders: tuple
    degenerate: bool

    @property
    def verdict(self) -> bool:
        """Necessary condition only; a pass does not certify the reduction."""
        return not self.offenders and not self.degenerate


def necessity_check(red: CurveReduction) -> NecessityReport:
    """Truncated Euler operator of the frozen p on the retained chain.

    Fails when the output still touches a positive-order jet of the chain,
    or vanishes identically (the final Cauchy step must grow rank).
    Offenders are listed from the highest jet down.
    """
    i = _single_retained(red)
    sigma = red.jets.orders[i]
    e = truncated_euler(red.jets, i, sigma, red.p_bar[0])
    offenders = tuple(
        slot(i, k) for k in range(sigma, 0, -1) if depends_on(e, slot(i, k))
    )
    return NecessityReport(i, e, offenders, e.is_zero)


@dataclass
class Decomposition:
    chain: int
    parts: tuple

    def assemble(self, jets: JetChart) -> Expr:
        d = chain_derivative(jets, self.chain)
        out = as_expr(0)
        for l, a in self.parts:
            term = as_expr(a)
            for _ in range(l):
                term = d(term)
            out = out + term
        return normalize(out)


def sufficiency_verify(sub: ContactSubConnection, i: int, parts):
    """Check a proposed presentation p = sum_l D_{t,i}^l A_l.

    Each A_l must avoid t and the positive-order jets of chain i; the sum
    must reproduce p under equals.  Returns (ok, problems).
    """
    if len(sub.p) != 1:
        raise CascadeError("sufficiency applies to a one-dimensional fiber")
    sigma = sub.jets.orders[i]
    problems = []
    seen = set()
    for l, a in parts:
        if not 0 <= l <= sigma:
            problems.append(f"derivative power {l} outside 0..{sigma}")
        if l in seen:
            problems.append(f"duplicate derivative power {l}")
        seen.add(l)
        a = as_expr(a)
        if depends_on(a, sub.jets.chart.time):
            problems.append(f"A_{l} depends on t")
        for k in range(1, sigma + 1):
            if depends_on(a, slot(i, k)):
                problems.append(f"A_{l} depends on {slot(i, k)}")
    total = Decomposition(i, tuple(parts)).assemble(sub.jets)
    if not equals(total, sub.p[0]):
        problems.append(f"sum of derivatives is {total}, not p")
    return (not problems, problems)


def _antiderivative(g: Expr, v: str):
    """Antiderivative of g in the variable v, or None.

    Handles polynomials in v over the other kernels and integrands of the
    shape c dB/dv / B^n.  Every candidate is checked by differentiation,
    so a non-None result is correct.
    """
    nf = normalize(g).nf
    num, den = nf.num, nf.den
    den_expr = expr_of_nf(NormalForm.make(den, Poly.const(1)))
    cand = None
    if not depends_on(den_expr, v):
        cand = _poly_antiderivative(num, den, v)
    else:
        cand = _power_antiderivative(num, den, den_expr, v)
    if cand is None:
        return None
    if not normalize(diff(cand, v) - g).is_zero:
        return None
    return cand


def _poly_antiderivative(num: Poly, den: Poly, v: str):
    vk = Var(v)
    terms = {}
    for mono, coeff in num.sorted_terms():
        e_v = 0
        rest = []
        for k, e in mono:
            if k == vk:
                e_v = e
            elif depends_on(k, v):
                return None
            else:
                rest.append((k, e))
        new_mono = tuple(sorted(rest + [(vk, e_v + 1)], key=lambda p: p[0].sort_key))
        terms[new_mono] = terms.get(new_mono, Fraction(0)) + coeff / (e_v + 1)
    out = Poly({m: c for m, c in terms.items() if c != 0})
    return expr_of_nf(NormalForm.make(out, den))


def _power_antiderivative(num: Poly, den: Poly, den_expr: Expr, v: str):
    for k in den.kernels():
        if k != Var(v) and depends_on(k, v):
            return None
    dden_nf = diff(den_expr, v).nf
    if not dden_nf.den.is_const:
        return None
    base = den
    g = poly_gcd(den, dden_nf.num)
    if not g.is_const:
        try:
            base = den.exact_div(g)
        except Exception:
            return None
    base_expr = expr_of_nf(NormalForm.make(base, Poly.const(1)))
    n = 0
    probe = den
    while True:
        if probe.is_const:
            scale = probe.const_value()
            break
        try:
            probe = probe.exact_div(base)
        except Exception:
            return None
        n += 1
        if n > 64:
            return None
    if n == 0 or scale == 0:
        return None
    dbase = diff(base_expr, v)
    if normalize(dbase).is_zero:
        return None
    num_expr = expr_of_nf(NormalForm.make(num, Poly.const(1)))
    c = normalize(num_expr / (as_expr(scale) * dbase))
    if depends_on(c, v):
        return None
    if n == 1:
        return normalize(c * Func("ln", base_expr))
    return normalize(-c / (as_expr(n - 1) * base_expr ** (n - 1)))


def sufficiency_search(sub: ContactSubConnection, i: int):
    """Best-effort hunt for a total-derivative presentation of p.

    Peels the highest retained jet: the coefficient dp/dz^i_N must avoid t
    and the positive jets, its antiderivative in z^i_0 gives A_N, and the
    remainder recurses downward.  Returns a verified Decomposition or
    None; absence is inconclusive.
    """
    if len(sub.p) != 1:
        raise CascadeError("sufficiency applies to a one-dimensional fiber")
    sigma = sub.jets.orders[i]
    t = sub.jets.chart.time
    d = chain_derivative(sub.jets, i)
    rest = normalize(sub.p[0])
    parts = []
    for n in range(sigma, 0, -1):
        if not depends_on(rest, slot(i, n)):
            continue
        g = diff(rest, slot(i, n))
        if depends_on(g, t):
            return None
        if any(depends_on(g, slot(i, k)) for k in range(1, sigma + 1)):
            return None
        a = _antiderivative(g, slot(i, 0))
        if a is None:
            return None
        term = as_expr(a)
        for _ in range(n):
            term = d(term)
        rest = normalize(rest - term)
        if depends_on(rest, slot(i, n)):
            return None
        parts.append((n, a))
    if depends_on(rest, t):
        return None
    if any(depends_on(rest, slot(i, k)) for k in range(1, sigma + 1)):
        return None
    if not rest.is_zero:
        parts.append((0, rest))
    parts.sort()
    dec = Decomposition(i, tuple(parts))
    ok, _ = sufficiency_verify(sub, i, dec.parts)
    return dec if ok else None


def pushdown_identity(sub: ContactSubConnection, i: int, a_expr, r: int, dropped: dict):
    """Reduction of p = D_{t,i}^r A computed two ways.

    Directly: build p upstairs and freeze the dropped chains.  Through the
    reduced chart: freeze A first, then apply r times the reduced total
    derivative minus its pure time part (the curve symbols stay put, only
    retained slots advance).  Returns (direct, pushed, ok).
    """
    a_expr = as_expr(a_expr)
    d_up = chain_derivative(sub.jets, i)
    p = as_expr(a_expr)
    for _ in range(r):
        p = d_up(p)
    frozen = {}
    for j, fname in dropped.items():
        for l in range(sub.jets.orders[j] + 1):
            frozen[slot(j, l)] = Opaque(fname, l)
    direct = subst(p, frozen)
    retained = [j for j in sorted(sub.jets.orders) if j not in dropped]
    jets = jet_chart({j: sub.jets.orders[j] for j in retained})
    comps = {}
    for j in retained:
        for l in range(sub.jets.orders[j]):
            comps[slot(j, l)] = Var(slot(j, l + 1))
    advance = VectorField(jets.chart, comps)
    pushed = subst(a_expr, frozen)
    for _ in range(r):
        pushed = advance(pushed)
    pushed = normalize(pushed)
    return direct, pushed, bool(equals(direct, pushed))


# ---------------------------------------------------------------------------
# trajectory reconstruction
# ---------------------------------------------------------------------------


@dataclass
class ReconstructionResult:
    times: list
    eps: list
    residual: float

    @property
    def final(self) -> tuple:
        return self.eps[-1]


def reconstruct_fiber(sub: ContactSubConnection, curves: dict, eps0, t0: float, t1: float, steps: int) -> ReconstructionResult:
    """Integrate the fiber motion along a prescribed contact curve.

    curves maps each chain index to an expression in t for its base
    function; jet slots become t-derivatives.  Classic fixed-step
    fourth-order integration; the residual is the largest difference
    against a half-step rerun over the shared grid points.
    """
    missing = [i for i in sub.jets.orders if i not in curves]
    if missing:
        raise CascadeError(f"no curve given for chains {missing}")
    t = sub.jets.chart.time
    zmap = {}
    for i, s in sub.jets.orders.items():
        base = as_expr(curves[i])
        derivs = [normalize(base)]
        for l in range(1, s + 1):
            derivs.append(normalize(diff(derivs[-1], t)))
        for l in range(s + 1):
            zmap[slot(i, l)] = derivs[l]
    rates = [subst(e, zmap) for e in sub.eps_rates().values()]
    names = list(sub.jets.fiber)
    if len(eps0) != len(names):
        raise CascadeError("initial fiber point has the wrong dimension")

    compiled = [_compile_rate(q, t, names) for q in rates]

    def rate(tv: float, ev: list) -> list:
        return [f(tv, *ev) for f in compiled]

    coarse_t, coarse = _rk4(rate, list(map(float, eps0)), t0, t1, steps)
    _, fine = _rk4(rate, list(map(float, eps0)), t0, t1, 2 * steps)
    residual = 0.0
    for j in range(steps + 1):
        for a in range(len(names)):
            residual = max(residual, abs(coarse[j][a] - fine[2 * j][a]))
    return ReconstructionResult(coarse_t, coarse, residual)


_PY_FUNC = {
    "sin": "math.sin",
    "cos": "math.cos",
    "tan": "math.tan",
    "arctan": "math.atan",
    "exp": "math.exp",
    "ln": "math.log",
    "sqrt": "math.sqrt",
}


def _py_source(e: Expr, var_map: dict) -> str:
    if isinstance(e, Var):
        try:
            return var_map[e.name]
        except KeyError:
            raise CascadeError(f"cannot evaluate free variable {e.name}") from None
    if isinstance(e, Func):
        return f"{_PY_FUNC[e.name]}({_py_source(e.arg, var_map)})"
    nf = e.nf
    if nf.is_const:
        c = nf.const_value()
        return f"({c.numerator}/{c.denominator})"
    num = _py_poly(nf.num, var_map)
    if nf.den.is_const and nf.den.const_value() == 1:
        return num
    return f"({num})/({_py_poly(nf.den, var_map)})"


def _py_poly(p: Poly, var_map: dict) -> str:
    terms = []
    for mono, coeff in p.sorted_terms():
        parts = [f"({coeff.numerator}/{coeff.denominator})"]
        for k, exp in mono:
            base = _py_source(k, var_map)
            parts.append(f"({base})**{exp}" if exp != 1 else f"({base})")
        terms.append("*".join(parts))
    return " + ".join(terms) if terms else "0.0"


def _compile_rate(e: Expr, time: str, names):
    """Turn a rate expression into a plain Python function of (t, *eps).

    The tree walk of the generic evaluator costs too much inside a
    fixed-step integration loop; generated source touches only float
    arithmetic and math calls on our own chart names.
    """
    args = [time] + list(names)
    var_map = {n: f"_a{j}" for j, n in enumerate(args)}
    src = _py_source(normalize(e), var_map)
    params = ", ".join(var_map[n] for n in args)
    return eval(f"lambda {params}: {src}", {"math": math})


def _rk4(rate, y0: list, t0: float, t1: float, steps: int):
    h = (t1 - t0) / steps
    ts = [t0 + j * h for j in range(steps + 1)]
    out = [tuple(y0)]
    y = list(y0)
    for j in range(steps):
        tj = ts[j]
        k1 = rate(tj, y)
        k2 = rate(tj + h / 2, [y[a] + h / 2 * k1[a] for a in range(len(y))])
        k3 = rate(tj + h / 2, [y[a] + h / 2 * k2[a] for a in range(len(y))])
        k4 = rate(tj + h, [y[a] + h * k3[a] for a in range(len(y))])
        y = [y[a] + h / 6 * (k1[a] + 2 * k2[a] + 2 * k3[a] + k4[a]) for a in range(len(y))]
        out.append(tuple(y))
    return ts, out
