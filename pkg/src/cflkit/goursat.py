"""Goursat bundle recognition and contact coordinate construction.

Recognition checks three things against the refined derived type of a
distribution: the integer relations that characterise partial prolongations
of the contact system on J^1(R, R^m), integrability of the intersections
Char(V^(i)) with V^(i-1), and (when the final growth exceeds one) existence
and integrability of the resolvent bundle cut out by the polar matrix.

Contact coordinates are then built by procedure contact: fundamental
functions of order j are first integrals of Char(V^(j))_{j-1} independent
modulo ann Char(V^(j)); the top-order functions come from the resolvent
bundle (procedure A) or the fundamental bundle Pi^{k-1} (procedure B), and
the chains are generated by a transverse section Z with Z(x) = 1.

First integrals are found symbolically only when a bundle is spanned by
coordinate directions; anything else must be supplied as verified hints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import linalg
from .flags import FlagAnalysis, analyze_flag, clear_denominators, growth, signature
from .geomcore import (
    ControlSystem,
    Distribution,
    VectorField,
    bracket,
    differential,
)
from .symexpr import Expr, NormalForm, Poly, Var, as_expr, expr_of_nf, poly_gcd


class GoursatError(Exception):
    pass


def type_relations(rdt, r: int = 0):
    """Signature and violated relations for a refined derived type.

    ``r`` is the rank of an attached integrable (group) direction bundle;
    the plain control case is r = 0.  Returns (kappa, violations) where
    violations is a list of human-readable strings, empty exactly when the
    type numbers are those of a partial prolongation.
    """
    violations = []
    ranks = [entry[0] for entry in rdt]
    k = len(rdt) - 1
    if k < 1:
        return [], ["derived length is zero"]
    deltas = growth(rdt)
    kappa = signature(rdt)
    for j, rho in enumerate(kappa, start=1):
        if rho < 0:
            violations.append(
                f"growth increases from step {j} to {j + 1}: "
                f"Delta_{j} = {deltas[j - 1]} < Delta_{j + 1} = {deltas[j]}"
            )
    if any(d < 1 for d in deltas):
        violations.append("derived flag has a non-growing step")
    expected_m0 = 1 + deltas[0] + r
    if ranks[0] != expected_m0:
        violations.append(
            f"m_0 = {ranks[0]}, expected 1 + m + r = {expected_m0}"
        )
    for j in range(k):
        chi = rdt[j][-1]
        expected = 2 * ranks[j] - ranks[j + 1] - 1
        if chi != expected:
            violations.append(
                f"chi^{j} = {chi}, expected 2*m_{j} - m_{j + 1} - 1 = {expected}"
            )
    for i in range(1, k):
        chi_prev = rdt[i][1]
        expected = ranks[i - 1] - 1
        if chi_prev != expected:
            violations.append(
                f"chi^{i}_{i - 1} = {chi_prev}, expected m_{i - 1} - 1 = {expected}"
            )
    if rdt[-1][-1] != ranks[-1]:
        violations.append(
            f"chi^{k} = {rdt[-1][-1]}, expected m_{k} = {ranks[-1]}"
        )
    return kappa, violations


# ---------------------------------------------------------------------------
# Resolvent bundle


@dataclass
class ResolventData:
    quotient_basis: list
    complement: list
    a_vars: list
    polar: list
    minor_gcd: Poly | None
    lam: list | None
    singular_coeffs: list
    singular: list
    bundle: Distribution | None
    violations: list


def _independent_mod(base_rows, fields):
    kept = []
    rows = list(base_rows)
    current = linalg.rank(rows) if rows else 0
    for f in fields:
        trial = rows + [list(f.comps)]
        trial_rank = linalg.rank(trial)
        if trial_rank > current:
            kept.append(f)
            rows = trial
            current = trial_rank
    return kept


def _split_linear(g: Poly, a_vars):
    """Write g = sum lam_c * a_c, or None if g is not linear homogeneous."""
    index = {}
    for i, v in enumerate(a_vars):
        index[v] = i
    lam_terms: list = [dict() for _ in a_vars]
    for mono, coeff in g.terms.items():
        hits = []
        rest = []
        for kern, exp in mono:
            if kern in index:
                hits.append((index[kern], exp))
            else:
                rest.append((kern, exp))
        if len(hits) != 1 or hits[0][1] != 1:
            return None
        lam_terms[hits[0][0]][tuple(rest)] = coeff
    return [Poly(terms) for terms in lam_terms]


def resolvent_bundle(analysis: FlagAnalysis, chart) -> ResolventData:
    """Singular/resolvent bundle of the penultimate derived distribution.

    The polar matrix of E = sum a_c B_c is taken over the flag basis of
    V^(k-1) reduced modulo Char(V^(k-1)); its rows are the directions
    appended at the last flag step.  The common linear factor of the
    maximal minors cuts out the singular subbundle, and the resolvent is
    the singular bundle together with Char(V^(k-1)).
    """
    flag = analysis.flag
    k = flag.depth
    char = analysis.char[k - 1]
    violations = []
    char_rows = char.component_matrix()
    quotient = _independent_mod(char_rows, flag.steps[k - 1].generators)
    complement = list(flag.appended[k])
    delta_k = flag.steps[k].rank - flag.steps[k - 1].rank
    if len(quotient) != delta_k + 1:
        violations.append(
            f"polar matrix is {len(complement)} x {len(quotient)}, "
            f"expected {delta_k} x {delta_k + 1}"
        )
        return ResolventData(quotient, complement, [], [], None, None, [], [], None, violations)
    taken = set(chart.names)
    a_vars = []
    for c in range(len(quotient)):
        name = f"a{c}"
        while name in taken:
            name = "_" + name
        a_vars.append(Var(name))
    e_comps = [as_expr(0)] * chart.dim
    for a, b in zip(a_vars, quotient):
        for i, comp in enumerate(b.comps):
            e_comps[i] = e_comps[i] + a * comp
    e_field = VectorField(chart, e_comps)
    full_rows = [list(g.comps) for g in flag.steps[k].generators]
    n_full = len(full_rows)
    polar = []
    for r_idx in range(len(complement)):
        polar.append([None] * len(quotient))
    for c, b in enumerate(quotient):
        w = bracket(e_field, b)
        coords = linalg.coordinates(full_rows, list(w.comps))
        if coords is None:
            raise GoursatError("bracket left the final derived distribution")
        for r_idx in range(len(complement)):
            polar[r_idx][c] = coords[n_full - len(complement) + r_idx]
    minors = linalg.maximal_minors(polar)
    numerators = [m.nf.num for m in minors if not m.nf.num.is_zero]
    if not numerators:
        violations.append("all maximal minors of the polar matrix vanish")
        return ResolventData(
            quotient, complement, a_vars, polar, None, None, [], [], None, violations
        )
    g = numerators[0]
    for p in numerators[1:]:
        g = poly_gcd(g, p)
    lam = _split_linear(g, a_vars)
    if lam is None:
        violations.append(
            "common factor of the polar minors is not linear homogeneous"
        )
        return ResolventData(
            quotient, complement, a_vars, polar, g, None, [], [], None, violations
        )
    one = Poly.const(1)
    lam_exprs = [expr_of_nf(NormalForm.make(p, one)) for p in lam]
    coeff_vectors = [
        clear_denominators(vec) for vec in linalg.nullspace([lam_exprs])
    ]
    singular = []
    for vec in coeff_vectors:
        comps = [as_expr(0)] * chart.dim
        for coeff, b in zip(vec, quotient):
            if coeff.is_zero:
                continue
            for i, comp in enumerate(b.comps):
                comps[i] = comps[i] + coeff * comp
        singular.append(VectorField(chart, comps))
    bundle = Distribution(chart, singular + list(char.generators))
    chi = analysis.rdt[k - 1][-1]
    if bundle.rank != delta_k + chi:
        violations.append(
            f"resolvent bundle has rank {bundle.rank}, expected "
            f"Delta_k + chi^(k-1) = {delta_k + chi}"
        )
    if not bundle.is_frobenius():
        violations.append("resolvent bundle is not integrable")
    return ResolventData(
        quotient,
        complement,
        a_vars,
        polar,
        g,
        lam_exprs,
        coeff_vectors,
        singular,
        bundle,
        violations,
    )


# ---------------------------------------------------------------------------
# Recognition


@dataclass
class GoursatReport:
    analysis: FlagAnalysis
    r: int
    kappa: list
    violations: list
    resolvent: ResolventData | None

    @property
    def is_goursat(self) -> bool:
        return not self.violations

    @property
    def derived_length(self) -> int:
        return self.analysis.depth

    @property
    def final_growth(self) -> int:
        deltas = growth(self.analysis.rdt)
        return deltas[-1] if deltas else 0


def recognize(dist: Distribution, r: int = 0) -> GoursatReport:
    analysis = analyze_flag(dist)
    flag = analysis.flag
    violations = []
    if not flag.fills_tangent_space:
        violations.append(
            f"derived flag stabilizes at rank {flag.steps[-1].rank} "
            f"< dim M = {dist.chart.dim}"
        )
        return GoursatReport(analysis, r, [], violations, None)
    kappa, relation_violations = type_relations(analysis.rdt, r)
    violations.extend(relation_violations)
    k = flag.depth
    for i in range(1, k):
        meet = analysis.char_in_prev[i]
        if not meet.is_frobenius():
            violations.append(f"Char(V^({i})) meet V^({i - 1}) is not integrable")
    resolvent = None
    deltas = growth(analysis.rdt)
    if not violations and deltas[-1] > 1:
        resolvent = resolvent_bundle(analysis, dist.chart)
        violations.extend(resolvent.violations)
    return GoursatReport(analysis, r, kappa, violations, resolvent)


# ---------------------------------------------------------------------------
# ESFL conditions


@dataclass
class EsflReport:
    goursat: GoursatReport
    controls_in_char: bool
    dt_condition: bool
    reasons: list

    @property
    def verdict(self) -> bool:
        return self.goursat.is_goursat and self.controls_in_char and self.dt_condition


def _dt_annihilates(bundle: Distribution, time_name: str) -> bool:
    return all(g.comp(time_name).is_zero for g in bundle.generators)


def esfl_check(cs: ControlSystem) -> EsflReport:
    dist = cs.distribution()
    report = recognize(dist)
    reasons = list(report.violations)
    time_name = cs.chart.time
    controls_ok = False
    dt_ok = False
    if report.is_goursat:
        analysis = report.analysis
        k = analysis.depth
        meet = analysis.char_in_prev[1] if k >= 2 else analysis.char[0]
        controls_ok = meet.contains_all(cs.control_directions())
        if not controls_ok:
            reasons.append(
                "control directions are not Cauchy characteristics of V^(1) inside V"
            )
        if report.final_growth > 1:
            dt_ok = _dt_annihilates(report.resolvent.bundle, time_name)
            if not dt_ok:
                reasons.append("dt does not annihilate the resolvent bundle")
        else:
            dt_ok = _dt_annihilates(analysis.char[k - 1], time_name)
            if not dt_ok:
                reasons.append(
                    "dt does not annihilate Char(V^(k-1))"
                )
    return EsflReport(report, controls_ok, dt_ok, reasons)


# ---------------------------------------------------------------------------
# Procedure contact


@dataclass
class IntegralHints:
    """First integrals supplied from outside, verified before use.

    ``order`` maps j to candidates for the fundamental functions of order
    j; ``top`` holds order-k candidates (resolvent integrals for final
    growth > 1, the fundamental-bundle integral otherwise); ``x`` holds
    candidates for the independence coordinate.
    """

    order: dict = field(default_factory=dict)
    top: list = field(default_factory=list)
    x: list = field(default_factory=list)


@dataclass
class ContactChain:
    order: int
    values: list

    @property
    def base(self) -> Expr:
        return self.values[0]


@dataclass
class ContactCoordinates:
    procedure: str
    x: Expr
    section: VectorField
    chains: list
    kappa: list

    def all_functions(self) -> list:
        out = [self.x]
        for chain in self.chains:
            out.extend(chain.values)
        return out


def _coordinate_complement(dist: Distribution):
    """Names of coordinates spanning the complement, or None.

    Only meaningful when the reduced basis consists of coordinate
    directions; in that case the complementary coordinates are a complete
    independent set of first integrals.
    """
    rows, pivots = linalg.rref(dist.component_matrix())
    hit = set()
    for i in range(len(pivots)):
        row = rows[i]
        nonzero = [c for c, e in enumerate(row) if not e.is_zero]
        if len(nonzero) != 1:
            return None
        hit.add(nonzero[0])
    names = dist.chart.names
    return [names[c] for c in range(dist.chart.dim) if c not in hit]


def _annihilates(f: Expr, bundle: Distribution) -> bool:
    return all(g(f).is_zero for g in bundle.generators)


def _verified_integrals(candidates, bundle: Distribution, label: str):
    out = []
    for f in candidates:
        if not _annihilates(f, bundle):
            raise GoursatError(
                f"hint for {label} is not a first integral: {f}"
            )
        out.append(f)
    return out


def _fundamental_functions(analysis, j, rho_j, hints, chart):
    """rho_j first integrals of Char(V^(j))_{j-1} independent mod Xi^(j)."""
    meet = analysis.char_in_prev[j]
    xi_rows = [list(f.comps) for f in analysis.char[j].annihilator().forms]
    candidates = []
    names = _coordinate_complement(meet)
    if names is not None:
        candidates = [Var(n) for n in names]
    hinted = hints.order.get(j, [])
    if hinted:
        candidates = _verified_integrals(hinted, meet, f"order {j}")
    elif names is None:
        raise GoursatError(
            f"Char(V^({j}))_{j - 1} is not coordinate-spanned; "
            f"supply integrals of order {j}"
        )
    chosen = []
    rows = list(xi_rows)
    current = linalg.rank(rows) if rows else 0
    for f in candidates:
        df = differential(f, chart)
        trial = rows + [list(df.comps)]
        trial_rank = linalg.rank(trial)
        if trial_rank > current:
            chosen.append(f)
            rows = trial
            current = trial_rank
        if len(chosen) == rho_j:
            break
    if len(chosen) != rho_j:
        raise GoursatError(
            f"found {len(chosen)} fundamental functions of order {j}, "
            f"expected {rho_j}"
        )
    return chosen


def _transverse_section(dist: Distribution, x: Expr) -> VectorField:
    for g in dist.generators:
        gx = g(x)
        if not gx.is_zero:
            return g.scaled(as_expr(1) / gx)
    raise GoursatError(f"no section of V is transverse to x = {x}")


def _pick_x(candidates, dist, bundle, chart, label):
    """First candidate that integrates ``bundle`` and admits a section."""
    for f in candidates:
        if not _annihilates(f, bundle):
            raise GoursatError(f"hint for {label} is not a first integral: {f}")
        try:
            section = _transverse_section(dist, f)
        except GoursatError:
            continue
        return f, section
    raise GoursatError(f"no usable independence coordinate among {label}")


def procedure_contact(
    cs: ControlSystem,
    report: GoursatReport | None = None,
    hints: IntegralHints | None = None,
) -> ContactCoordinates:
    """Contact coordinates for the Goursat bundle of a control system.

    Follows procedure A when the final growth exceeds one (top-order
    functions from the resolvent bundle) and procedure B otherwise
    (independence coordinate from Char(V^(k-1)), final function from the
    fundamental bundle).
    """
    hints = hints or IntegralHints()
    dist = cs.distribution()
    if report is None:
        report = recognize(dist)
    if not report.is_goursat:
        raise GoursatError(
            "not a Goursat bundle: " + "; ".join(report.violations)
        )
    analysis = report.analysis
    chart = cs.chart
    k = analysis.depth
    kappa = report.kappa
    fundamentals = []
    for j in range(1, k):
        rho_j = kappa[j - 1]
        if rho_j == 0:
            continue
        for f in _fundamental_functions(analysis, j, rho_j, hints, chart):
            fundamentals.append((j, f))
    delta_k = report.final_growth
    if delta_k > 1:
        procedure = "A"
        bundle = report.resolvent.bundle
        top_candidates = hints.top
        names = _coordinate_complement(bundle)
        if not top_candidates and names is not None:
            top_candidates = [Var(n) for n in names]
        top = _verified_integrals(top_candidates, bundle, "order k")
        x_candidates = hints.x or [Var(n) for n in (names or [])]
        x, section = _pick_x(x_candidates, dist, bundle, chart, "x")
        rho_k = kappa[-1]
        chosen = [f for f in top if f != x][:rho_k]
        if len(chosen) != rho_k:
            raise GoursatError(
                f"found {len(chosen)} top-order functions, expected {rho_k}"
            )
        all_top = [x] + chosen
        rows = [list(differential(f, chart).comps) for f in all_top]
        if linalg.rank(rows) != rho_k + 1:
            raise GoursatError("top-order functions are not independent")
        for f in chosen:
            fundamentals.append((k, f))
    else:
        procedure = "B"
        char_last = analysis.char[k - 1]
        time_name = chart.time
        if hints.x:
            x, section = _pick_x(hints.x, dist, char_last, chart, "x")
        elif time_name is not None and _dt_annihilates(char_last, time_name):
            x = Var(time_name)
            section = _transverse_section(dist, x)
        else:
            names = _coordinate_complement(char_last)
            if names is None:
                raise GoursatError(
                    "Char(V^(k-1)) is not coordinate-spanned; supply x"
                )
            x, section = _pick_x([Var(n) for n in names], dist, char_last, chart, "x")
        pi = analysis.char_in_prev[1] if k >= 2 else analysis.char[0]
        for _ in range(k - 1):
            new = [bracket(g, section) for g in pi.generators]
            pi = pi.plus(*[g for g in new if not g.is_zero])
        pi = pi.reduced_basis()
        if hints.top:
            phi = _verified_integrals(hints.top, pi, "order k")[0]
        else:
            names = _coordinate_complement(pi)
            if names is None:
                raise GoursatError(
                    "fundamental bundle is not coordinate-spanned; "
                    "supply its first integral"
                )
            phi = None
            for n in names:
                cand = Var(n)
                dx = differential(x, chart)
                dphi = differential(cand, chart)
                if linalg.rank([list(dx.comps), list(dphi.comps)]) == 2:
                    phi = cand
                    break
            if phi is None:
                raise GoursatError("no fundamental-bundle integral transverse to x")
        fundamentals.append((k, phi))
    fundamentals.sort(key=lambda item: item[0])
    chains = []
    for j, f in fundamentals:
        values = [f]
        for _ in range(j):
            values.append(section(values[-1]))
        chains.append(ContactChain(j, values))
    return ContactCoordinates(procedure, x, section, chains, list(kappa))


def verify_contact_coordinates(cs: ControlSystem, coords: ContactCoordinates):
    """Check that constructed coordinates identify V with a contact system.

    Verifies the dimension count, independence of the full coordinate
    tuple, and that every contact form dz_s - z_{s+1} dx annihilates the
    system distribution.  Returns (ok, problems).
    """
    problems = []
    chart = cs.chart
    total = 1 + sum(len(chain.values) for chain in coords.chains)
    if total != chart.dim:
        problems.append(
            f"{total} contact functions for a {chart.dim}-dimensional chart"
        )
    rows = [list(differential(f, chart).comps) for f in coords.all_functions()]
    if linalg.rank(rows) != min(total, chart.dim):
        problems.append("contact functions are dependent")
    gens = cs.distribution().generators
    for chain in coords.chains:
        for s in range(chain.order):
            zs, znext = chain.values[s], chain.values[s + 1]
            for g in gens:
                residual = g(zs) - znext * g(coords.x)
                if not residual.is_zero:
                    problems.append(
                        f"contact form for order-{chain.order} chain fails at "
                        f"level {s}"
                    )
                    break
    return not problems, problems
