"""Symmetry reduction of control systems.

A Lie algebra of vector fields on the time-extended space (t, x, u) that
preserves the contact codistribution and acts with full rank on states
descends the control system to a quotient in invariant coordinates
(t, y, v).  The quotient is again a control system, and questions about
the original system (notably linearizability by a dynamic extension) can
be settled downstairs where they become static ones.

The workflow implemented here:

  1. check_admissible: Cartan symmetry test, bracket closure, trivial
     action on time, full projected rank on the state columns.
  2. quotient_construct: given invariant functions tagged as states or
     controls plus a cross-section, produce the reduced system by pushing
     the drift derivatives of the state invariants through the section.
  3. quotient_verify: independent route.  Pull every reduced contact form
     back through the invariant map and confirm it lands in the span of
     the original contact forms.  Uses no section data.
  4. relative_goursat: recognition of the extended bundle spanned by the
     system distribution together with the symmetry generators.
"""

from dataclasses import dataclass

from . import linalg
from .geomcore import (
    Chart,
    ControlSystem,
    Distribution,
    OneForm,
    PfaffianSystem,
    VectorField,
    bracket,
    differential,
    lie_derivative,
)
from .goursat import GoursatReport, recognize
from .symexpr import FALSE, Var, as_expr, equals, free_vars, normalize, subst
from .symexpr import is_zero as probe_zero


class SymmetryError(Exception):
    pass


def is_infinitesimal_symmetry(system: PfaffianSystem, field: VectorField) -> bool:
    """Cartan criterion: L_X theta lies in the system span for each theta."""
    mat = system.coefficient_matrix()
    for theta in system.forms:
        lied = lie_derivative(field, theta)
        if not linalg.in_row_span(mat, list(lied.comps)):
            return False
    return True


def is_strongly_transverse(cs: ControlSystem, fields) -> bool:
    """Full rank of the generators after dropping the control columns.

    Symmetries may move the controls, but the induced action on (t, x)
    has to keep dimension len(fields) for the quotient to carry a chart
    of state invariants.
    """
    chart = cs.chart
    cols = [chart.index(n) for n in (chart.time,) + chart.states]
    rows = [[f.comps[c] for c in cols] for f in fields]
    return linalg.generic_rank(rows) == len(fields)


@dataclass
class AdmissibilityReport:
    symmetry_ok: tuple
    fixes_time: tuple
    closes: bool
    transverse: bool
    locally_free: bool
    problems: tuple

    @property
    def admissible(self) -> bool:
        return not self.problems


def check_admissible(cs: ControlSystem, fields) -> AdmissibilityReport:
    """Screen a candidate symmetry algebra for quotient construction.

    Freeness of the group action is only probed: we require the generator
    matrix to have rank len(fields) over the function field, which rules
    out generic isotropy but says nothing about special orbits.
    """
    if not fields:
        raise SymmetryError("no symmetry generators given")
    chart = cs.chart
    system = cs.pfaffian()
    problems = []

    sym = tuple(is_infinitesimal_symmetry(system, f) for f in fields)
    for i, ok in enumerate(sym):
        if not ok:
            problems.append(f"generator {i + 1} does not preserve the contact system")

    fixes = tuple(f.comp(chart.time).is_zero for f in fields)
    for i, ok in enumerate(fixes):
        if not ok:
            problems.append(f"generator {i + 1} moves time")

    closes = True
    gamma = Distribution(chart, fields)
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            if not gamma.contains(bracket(fields[i], fields[j])):
                closes = False
                problems.append(f"bracket of generators {i + 1}, {j + 1} leaves the span")

    free = gamma.rank == len(fields)
    if not free:
        problems.append("generators are dependent over the function field")

    transverse = is_strongly_transverse(cs, fields)
    if not transverse:
        problems.append("projected action on (t, x) drops rank")

    return AdmissibilityReport(sym, fixes, closes, transverse, free, tuple(problems))


@dataclass
class QuotientData:
    """Reduced system plus the maps used to build and check it.

    invariants maps quotient names to upstairs expressions; section maps
    upstairs states and controls to expressions in the quotient names.
    """

    system: ControlSystem
    invariants: dict
    section: dict
    problems: tuple


def _invariant_rows(chart: Chart, exprs) -> list:
    rows = [list(differential(as_expr(e), chart).comps) for e in exprs]
    t_row = [as_expr(0)] * chart.dim
    t_row[chart.index(chart.time)] = as_expr(1)
    return [t_row] + rows


def quotient_construct(cs: ControlSystem, fields, invariants, section) -> QuotientData:
    """Build the quotient control system in invariant coordinates.

    invariants: list of (name, role, expr) with role "state" or "control",
    expr written upstairs.  section: dict mapping every upstairs state and
    control to an expression in (t, quotient names); it selects one point
    per orbit, and the reduced velocities are the drift derivatives of the
    state invariants pushed through it.
    """
    chart = cs.chart
    t = chart.time
    problems = []

    for name, role, _ in invariants:
        if role not in ("state", "control"):
            raise SymmetryError(f"invariant {name}: unknown role {role!r}")
        if name in chart.names:
            raise SymmetryError(f"invariant name {name} shadows an upstairs coordinate")

    expected = chart.dim - 1 - len(fields)
    if len(invariants) != expected:
        problems.append(
            f"need {expected} invariants for a {len(fields)}-dimensional algebra, got {len(invariants)}"
        )

    for name, _, e in invariants:
        e = as_expr(e)
        for i, g in enumerate(fields):
            if not normalize(g(e)).is_zero:
                problems.append(f"{name} is not killed by generator {i + 1}")

    rows = _invariant_rows(chart, [e for _, _, e in invariants])
    if linalg.rank(rows) != len(invariants) + 1:
        problems.append("invariants are not independent together with t")

    missing = [n for n in chart.states + chart.controls if n not in section]
    if missing:
        raise SymmetryError(f"cross-section leaves {missing} unassigned")
    if t in section:
        raise SymmetryError("cross-section must fix t")

    qnames = [t] + [n for n, _, _ in invariants]
    for up, e in section.items():
        bad = free_vars(as_expr(e)) - set(qnames)
        if bad:
            raise SymmetryError(f"section for {up} uses non-quotient names {sorted(bad)}")

    # the section must land back on the chosen invariant values
    for name, _, e in invariants:
        back = subst(as_expr(e), section)
        if equals(back, Var(name)) is FALSE:
            problems.append(f"section is inconsistent with invariant {name}")

    drift = cs.drift()
    qpairs = [(t, "time")]
    qpairs += [(n, "state") for n, r, _ in invariants if r == "state"]
    qpairs += [(n, "control") for n, r, _ in invariants if r == "control"]
    qchart = Chart.build(qpairs)

    rhs = {}
    for name, role, e in invariants:
        if role != "state":
            continue
        vel = subst(drift(as_expr(e)), section)
        stray = free_vars(vel) - set(qnames)
        if stray:
            problems.append(f"velocity of {name} does not reduce: {sorted(stray)} survive")
            vel = as_expr(0)
        rhs[name] = vel

    qsystem = ControlSystem(qchart, rhs)
    inv_map = {n: as_expr(e) for n, _, e in invariants}
    return QuotientData(qsystem, inv_map, dict(section), tuple(problems))


def quotient_verify(cs: ControlSystem, data: QuotientData):
    """Check the reduction without the section data.

    The upstairs contact forms span exactly the annihilator of the ambient
    distribution, so each reduced form pulled back through the invariant
    map must pair to zero with the drift and with every control direction.
    Pairings go through the probing equality, which sees through kernels
    the exact algebra keeps separate, exp(-u)^5 against exp(-5*u) say.
    Returns (ok, problems).
    """
    chart = cs.chart
    ambient = cs.distribution()
    labels = ["drift"] + [f"d_{u}" for u in chart.controls]
    problems = []
    for name, theta in zip(data.system.chart.states, data.system.pfaffian().forms):
        pulled = _pullback(theta, data.invariants, chart)
        for g, label in zip(ambient.generators, labels):
            verdict = probe_zero(pulled.pair(g))
            if not verdict:
                problems.append(f"pullback of the {name} form pairs {verdict} with {label}")
    return (not problems, problems)


def _pullback(theta: OneForm, inv_map: dict, chart: Chart) -> OneForm:
    comps = [as_expr(0)] * chart.dim
    out = OneForm(chart, comps)
    for name, coeff in zip(theta.chart.names, theta.comps):
        if coeff.is_zero:
            continue
        coeff_up = subst(coeff, inv_map)
        if name in inv_map:
            base = differential(inv_map[name], chart)
        else:
            base = differential(Var(name), chart)
        out = out + base.scaled(coeff_up)
    return out


def relative_goursat(cs: ControlSystem, fields) -> GoursatReport:
    """Recognition of the bundle spanned by the system and the symmetry.

    The symmetry directions join the distribution and the type relations
    are tested with r = len(fields).  A pass here certifies that the
    quotient is a genuine Goursat bundle before it is ever constructed.
    """
    dist = cs.distribution().plus(*fields)
    return recognize(dist, r=len(fields))
