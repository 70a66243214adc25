"""Derived flags, Cauchy characteristic bundles, refined derived type.

The derived flag of a distribution V is V = V^(0) subset V^(1) subset ...
with V^(l+1) = V^(l) + [V^(l), V^(l)], computed until the flag stabilizes
or fills the tangent space.  Each step keeps the previous basis and appends
only those brackets that enlarge the exact row span, so downstream code can
speak about "the appended directions at step l" deterministically.

The refined derived type collects, per step, the rank m_j, the rank of the
Cauchy characteristic bundle Char V^(j), and the rank of the intersection
Char(V^(j)) with V^(j-1).  These integers are the complete local invariants
used by the Goursat-bundle recognition in :mod:`cflkit.goursat`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import linalg
from .geomcore import Distribution, GeomError, VectorField, bracket, intersection
from .symexpr import Expr, NormalForm, Poly, as_expr, expr_of_nf, poly_gcd

MAX_FLAG_STEPS = 16


@dataclass(frozen=True)
class DerivedFlag:
    """Steps of a derived flag, with the brackets appended at each step."""

    steps: tuple
    appended: tuple

    @property
    def depth(self) -> int:
        return len(self.steps) - 1

    def step(self, j: int) -> Distribution:
        return self.steps[j]

    @property
    def ranks(self) -> tuple:
        return tuple(v.rank for v in self.steps)

    @property
    def fills_tangent_space(self) -> bool:
        last = self.steps[-1]
        return last.rank == last.chart.dim


def derived_flag(dist: Distribution, max_steps: int = MAX_FLAG_STEPS) -> DerivedFlag:
    """Derived flag of ``dist`` with deterministic basis growth.

    At each step the candidate brackets [X_j, X_i] run over index pairs
    i < j of the current basis in lexicographic order, and a candidate is
    appended exactly when it enlarges the exact rank.  The previous basis
    is always kept as a prefix.
    """
    steps = [dist]
    appended: list = [()]
    current = list(dist.generators)
    rows = [list(g.comps) for g in current]
    rank = linalg.rank(rows)
    dim = dist.chart.dim
    for _ in range(max_steps):
        if rank == dim:
            break
        new_fields = []
        n = len(current)
        for i in range(n):
            for j in range(i + 1, n):
                cand = bracket(current[j], current[i])
                if cand.is_zero:
                    continue
                trial = rows + [list(cand.comps)]
                trial_rank = linalg.rank(trial)
                if trial_rank > rank:
                    current.append(cand)
                    new_fields.append(cand)
                    rows = trial
                    rank = trial_rank
        if not new_fields:
            break
        steps.append(Distribution(dist.chart, current))
        appended.append(tuple(new_fields))
        current = list(current)
    else:
        raise GeomError(f"derived flag did not stabilize in {max_steps} steps")
    return DerivedFlag(tuple(steps), tuple(appended))


def cauchy_characteristic(dist: Distribution) -> Distribution:
    """Char(V) = {Z in V : [Z, V] subset V}.

    Writing Z = sum_i c_i X_i over the given generators, the condition is
    pointwise linear in the c_i: for every generator X_j and annihilator
    form theta_a, sum_i c_i theta_a([X_i, X_j]) = 0.  The nullspace of that
    system gives the characteristic fields.
    """
    gens = dist.generators
    ann = dist.annihilator().forms
    if not gens:
        return dist
    if not ann:
        return dist
    n = len(gens)
    brackets = {}
    for i in range(n):
        for j in range(i + 1, n):
            brackets[(i, j)] = bracket(gens[i], gens[j])

    def lie(i: int, j: int) -> VectorField:
        if i < j:
            return brackets[(i, j)]
        return -brackets[(j, i)]

    rows = []
    for j in range(n):
        for theta in ann:
            row = []
            for i in range(n):
                if i == j:
                    row.append(as_expr(0))
                else:
                    row.append(theta.pair(lie(i, j)))
            if any(not e.is_zero for e in row):
                rows.append(row)
    if not rows:
        return dist
    coeff_vectors = linalg.nullspace(rows)
    fields = []
    for vec in coeff_vectors:
        comps = [as_expr(0)] * dist.chart.dim
        for c, g in zip(vec, gens):
            if c.is_zero:
                continue
            for k, gc in enumerate(g.comps):
                comps[k] = comps[k] + c * gc
        fields.append(VectorField(dist.chart, clear_denominators(comps)))
    return Distribution(dist.chart, fields)


@dataclass(frozen=True)
class FlagAnalysis:
    """Derived flag together with its Cauchy data and refined derived type.

    ``char[j]`` is Char(V^(j)); ``char_in_prev[j]`` is Char(V^(j)) meet
    V^(j-1) for 1 <= j <= depth-1 and None at the endpoints.  ``rdt`` is
    [[m_0, chi_0], [m_1, chi_1^0, chi_1], ..., [m_k, m_k]].
    """

    flag: DerivedFlag
    char: tuple
    char_in_prev: tuple
    rdt: tuple

    @property
    def depth(self) -> int:
        return self.flag.depth

    def rdt_lists(self) -> list:
        return [list(entry) for entry in self.rdt]


def analyze_flag(dist: Distribution, max_steps: int = MAX_FLAG_STEPS) -> FlagAnalysis:
    flag = derived_flag(dist, max_steps)
    k = flag.depth
    char: list = []
    char_in_prev: list = [None]
    rdt: list = []
    for j, vj in enumerate(flag.steps):
        cj = cauchy_characteristic(vj)
        char.append(cj)
        if j == 0:
            rdt.append((vj.rank, cj.rank))
        elif j < k:
            meet = intersection(cj, flag.steps[j - 1])
            char_in_prev.append(meet)
            rdt.append((vj.rank, meet.rank, cj.rank))
        else:
            char_in_prev.append(None)
            rdt.append((vj.rank, cj.rank))
    if k == 0:
        # Frobenius input: single entry [m_0, m_0].
        rdt = [(flag.steps[0].rank, char[0].rank)]
    return FlagAnalysis(flag, tuple(char), tuple(char_in_prev), tuple(rdt))


def growth(rdt) -> list:
    """Rank increments m_j - m_{j-1} along the flag."""
    ranks = [entry[0] for entry in rdt]
    return [b - a for a, b in zip(ranks, ranks[1:])]


def signature(rdt) -> list:
    """Brunovsky signature <rho_1, ..., rho_k> read off the rank increments.

    rho_j counts the chains of length exactly j, so rho_j is the drop in
    growth from step j to step j+1 (with growth 0 past the last step).
    """
    deltas = growth(rdt)
    if not deltas:
        return []
    deltas = deltas + [0]
    return [deltas[i] - deltas[i + 1] for i in range(len(deltas) - 1)]


def clear_denominators(coeffs) -> list:
    """Scale a coefficient vector to primitive polynomial form.

    Multiplies through by the least common denominator, divides out the
    common content, and flips signs so the first nonzero entry has positive
    leading coefficient.  Purely cosmetic: the span is unchanged.
    """
    exprs = [c if isinstance(c, Expr) else as_expr(c) for c in coeffs]
    nfs = [c.nf for c in exprs]
    nonzero = [nf for nf in nfs if not nf.num.is_zero]
    if not nonzero:
        return exprs
    lcd = nonzero[0].den
    for nf in nonzero[1:]:
        g = poly_gcd(lcd, nf.den)
        lcd = (lcd * nf.den).exact_div(g)
    nums = []
    for nf in nfs:
        if nf.num.is_zero:
            nums.append(nf.num)
        else:
            nums.append(nf.num * lcd.exact_div(nf.den))
    content = None
    for p in nums:
        if p.is_zero:
            continue
        content = p if content is None else poly_gcd(content, p)
    scaled = [p if p.is_zero else p.exact_div(content) for p in nums]
    for p in scaled:
        if p.is_zero:
            continue
        if p.sorted_terms()[0][1] < 0:
            scaled = [q.scale(Fraction(-1)) for q in scaled]
        break
    one = Poly.const(1)
    return [expr_of_nf(NormalForm.make(p, one)) for p in scaled]
