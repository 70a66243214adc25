"""Charts, vector fields, differential forms, distributions, Pfaffian systems.

Everything is expressed in a single fixed chart.  A Chart lists coordinate
names in order together with a role per coordinate (time, state, control,
fiber, aux); the time coordinate, when present, is an ordinary coordinate
named t, and d/dt additionally advances opaque symbols f^(k)(t).

Distributions and Pfaffian systems are dual through exact annihilators
computed over the rational function field, so V.annihilator().annihilator()
spans V again (as a subbundle on the generic stratum).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import linalg
from .symexpr import Expr, ZERO, as_expr, diff, expr_of_nf, normalize


class GeomError(Exception):
    pass


ROLES = ("time", "state", "control", "fiber", "aux")


@dataclass(frozen=True)
class Chart:
    names: tuple
    roles: tuple

    def __post_init__(self):
        if len(self.names) != len(self.roles):
            raise GeomError("chart names and roles must align")
        if len(set(self.names)) != len(self.names):
            raise GeomError("duplicate coordinate name")
        for r in self.roles:
            if r not in ROLES:
                raise GeomError(f"unknown coordinate role {r!r}")

    @staticmethod
    def build(pairs) -> "Chart":
        names, roles = zip(*pairs) if pairs else ((), ())
        return Chart(tuple(names), tuple(roles))

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise GeomError(f"no coordinate {name!r} in chart") from None

    def role(self, name: str) -> str:
        return self.roles[self.index(name)]

    def with_role(self, role: str) -> tuple:
        return tuple(n for n, r in zip(self.names, self.roles) if r == role)

    @property
    def time(self) -> str | None:
        ts = self.with_role("time")
        return ts[0] if ts else None

    @property
    def states(self) -> tuple:
        return self.with_role("state")

    @property
    def controls(self) -> tuple:
        return self.with_role("control")

    def __str__(self) -> str:
        return "(" + ", ".join(self.names) + ")"


def _normalize_comps(chart: Chart, comps) -> tuple:
    if isinstance(comps, dict):
        vec = [ZERO] * chart.dim
        for name, val in comps.items():
            vec[chart.index(name)] = as_expr(val)
        comps = vec
    if len(comps) != chart.dim:
        raise GeomError("component count does not match chart dimension")
    return tuple(normalize(as_expr(c)) for c in comps)


class VectorField:
    __slots__ = ("chart", "comps")

    def __init__(self, chart: Chart, comps):
        self.chart = chart
        self.comps = _normalize_comps(chart, comps)

    def comp(self, name: str) -> Expr:
        return self.comps[self.chart.index(name)]

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.comps)

    def __call__(self, f) -> Expr:
        """Directional derivative X(f)."""
        f = as_expr(f)
        out = ZERO
        for name, c in zip(self.chart.names, self.comps):
            if c.is_zero:
                continue
            df = diff(f, name)
            if not df.is_zero:
                out = out + c * df
        return normalize(out)

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(self.chart, [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(self.chart, [a - b for a, b in zip(self.comps, other.comps)])

    def __neg__(self) -> "VectorField":
        return VectorField(self.chart, [-c for c in self.comps])

    def scaled(self, f) -> "VectorField":
        f = as_expr(f)
        return VectorField(self.chart, [f * c for c in self.comps])

    def _check(self, other):
        if self.chart is not other.chart and self.chart != other.chart:
            raise GeomError("vector fields live in different charts")

    def __str__(self) -> str:
        bits = []
        for name, c in zip(self.chart.names, self.comps):
            if c.is_zero:
                continue
            cs = str(c)
            if cs == "1":
                bits.append(f"d_{name}")
            else:
                if not _is_atomic(cs):
                    cs = "(" + cs + ")"
                bits.append(f"{cs}*d_{name}")
        return " + ".join(bits) if bits else "0"

    def __repr__(self) -> str:
        return f"<VectorField {self}>"


def _is_atomic(s: str) -> bool:
    return all(ch not in s for ch in "+- ")


def bracket(x: VectorField, y: VectorField) -> VectorField:
    """Lie bracket [X, Y]."""
    x._check(y)
    comps = []
    for i, name in enumerate(x.chart.names):
        comps.append(x(y.comps[i]) - y(x.comps[i]))
    return VectorField(x.chart, comps)


class OneForm:
    __slots__ = ("chart", "comps")

    def __init__(self, chart: Chart, comps):
        self.chart = chart
        self.comps = _normalize_comps(chart, comps)

    def comp(self, name: str) -> Expr:
        return self.comps[self.chart.index(name)]

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.comps)

    def pair(self, x: VectorField) -> Expr:
        out = ZERO
        for a, b in zip(self.comps, x.comps):
            if not (a.is_zero or b.is_zero):
                out = out + a * b
        return normalize(out)

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(self.chart, [a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: "OneForm") -> "OneForm":
        return OneForm(self.chart, [a - b for a, b in zip(self.comps, other.comps)])

    def __neg__(self) -> "OneForm":
        return OneForm(self.chart, [-c for c in self.comps])

    def scaled(self, f) -> "OneForm":
        f = as_expr(f)
        return OneForm(self.chart, [f * c for c in self.comps])

    def __str__(self) -> str:
        bits = []
        for name, c in zip(self.chart.names, self.comps):
            if c.is_zero:
                continue
            cs = str(c)
            if cs == "1":
                bits.append(f"d_{name}")
            else:
                if not _is_atomic(cs):
                    cs = "(" + cs + ")"
                bits.append(f"{cs}*d_{name}")
        return " + ".join(bits) if bits else "0"

    def __repr__(self) -> str:
        return f"<OneForm {self}>"


def differential(f, chart: Chart) -> OneForm:
    """Exterior derivative of a function."""
    f = as_expr(f)
    return OneForm(chart, [diff(f, name) for name in chart.names])


class TwoForm:
    """Skew form stored as {(i, j): coeff} with i < j chart indices."""

    __slots__ = ("chart", "comps")

    def __init__(self, chart: Chart, comps: dict):
        self.chart = chart
        clean = {}
        for (i, j), c in comps.items():
            if i == j:
                continue
            if i > j:
                i, j, c = j, i, -as_expr(c)
            c = normalize(as_expr(c))
            if c.is_zero:
                continue
            if (i, j) in clean:
                s = normalize(clean[(i, j)] + c)
                if s.is_zero:
                    del clean[(i, j)]
                else:
                    clean[(i, j)] = s
            else:
                clean[(i, j)] = c
        self.comps = clean

    @property
    def is_zero(self) -> bool:
        return not self.comps

    def pair(self, x: VectorField, y: VectorField) -> Expr:
        out = ZERO
        for (i, j), c in self.comps.items():
            out = out + c * (x.comps[i] * y.comps[j] - x.comps[j] * y.comps[i])
        return normalize(out)

    def contract(self, x: VectorField) -> OneForm:
        """Interior product iota_X."""
        comps = [ZERO] * self.chart.dim
        for (i, j), c in self.comps.items():
            comps[j] = comps[j] + c * x.comps[i]
            comps[i] = comps[i] - c * x.comps[j]
        return OneForm(self.chart, comps)


def exterior_derivative(theta: OneForm) -> TwoForm:
    chart = theta.chart
    comps = {}
    for j, a in enumerate(theta.comps):
        if a.is_zero:
            continue
        for i, name in enumerate(chart.names):
            if i == j:
                continue
            da = diff(a, name)
            if da.is_zero:
                continue
            if i < j:
                comps[(i, j)] = comps.get((i, j), ZERO) + da
            else:
                comps[(j, i)] = comps.get((j, i), ZERO) - da
    return TwoForm(chart, comps)


def lie_derivative(x: VectorField, theta: OneForm) -> OneForm:
    """Cartan formula: L_X theta = iota_X d theta + d(theta(X))."""
    return exterior_derivative(theta).contract(x) + differential(theta.pair(x), theta.chart)


# ---------------------------------------------------------------------------
# distributions and Pfaffian systems
# ---------------------------------------------------------------------------


class Distribution:
    """Span of vector fields over the rational function field."""

    __slots__ = ("chart", "generators", "_rank")

    def __init__(self, chart: Chart, generators):
        self.chart = chart
        self.generators = tuple(generators)
        for g in self.generators:
            if g.chart != chart:
                raise GeomError("generator chart mismatch")
        self._rank = None

    def component_matrix(self) -> list:
        return [list(g.comps) for g in self.generators]

    @property
    def rank(self) -> int:
        if self._rank is None:
            self._rank = linalg.generic_rank(self.component_matrix())
        return self._rank

    def contains(self, x: VectorField) -> bool:
        if x.is_zero:
            return True
        return linalg.in_row_span(self.component_matrix(), list(x.comps))

    def contains_all(self, fields) -> bool:
        return all(self.contains(x) for x in fields)

    def plus(self, *others) -> "Distribution":
        gens = list(self.generators)
        for o in others:
            if isinstance(o, Distribution):
                gens.extend(o.generators)
            else:
                gens.append(o)
        return Distribution(self.chart, gens)

    def reduced_basis(self) -> "Distribution":
        """Distribution spanned by the RREF rows of the component matrix."""
        rows, pivots = linalg.rref(self.component_matrix())
        gens = [VectorField(self.chart, rows[i]) for i in range(len(pivots))]
        return Distribution(self.chart, gens)

    def annihilator(self) -> "PfaffianSystem":
        """All one-forms vanishing on the distribution."""
        mat = self.component_matrix()
        if not mat:
            forms = []
            for i, name in enumerate(self.chart.names):
                comps = [ZERO] * self.chart.dim
                comps[i] = as_expr(1)
                forms.append(OneForm(self.chart, comps))
            return PfaffianSystem(self.chart, forms)
        vecs = linalg.nullspace(mat)
        return PfaffianSystem(self.chart, [OneForm(self.chart, v) for v in vecs])

    def is_frobenius(self) -> bool:
        """Closure under Lie bracket of the given generators."""
        gens = self.generators
        for i in range(len(gens)):
            for j in range(i + 1, len(gens)):
                if not self.contains(bracket(gens[i], gens[j])):
                    return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return (
            self.chart == other.chart
            and self.rank == other.rank
            and all(self.contains(g) for g in other.generators)
            and all(other.contains(g) for g in self.generators)
        )

    def __hash__(self):  # pragma: no cover
        raise TypeError("Distribution is unhashable")

    def __repr__(self) -> str:
        return f"<Distribution rank {self.rank} on {self.chart}>"


def intersection(v: Distribution, w: Distribution) -> Distribution:
    """Intersection via stacked annihilators."""
    if v.chart != w.chart:
        raise GeomError("distributions live in different charts")
    forms = list(v.annihilator().forms) + list(w.annihilator().forms)
    return PfaffianSystem(v.chart, forms).annihilator()


class PfaffianSystem:
    __slots__ = ("chart", "forms", "_rank")

    def __init__(self, chart: Chart, forms):
        self.chart = chart
        self.forms = tuple(forms)
        for f in self.forms:
            if f.chart != chart:
                raise GeomError("form chart mismatch")
        self._rank = None

    def coefficient_matrix(self) -> list:
        return [list(f.comps) for f in self.forms]

    @property
    def rank(self) -> int:
        if self._rank is None:
            self._rank = linalg.generic_rank(self.coefficient_matrix())
        return self._rank

    def contains(self, theta: OneForm) -> bool:
        if theta.is_zero:
            return True
        return linalg.in_row_span(self.coefficient_matrix(), list(theta.comps))

    def annihilator(self) -> Distribution:
        """All vector fields annihilated by every form."""
        mat = self.coefficient_matrix()
        if not mat:
            gens = []
            for i in range(self.chart.dim):
                comps = [ZERO] * self.chart.dim
                comps[i] = as_expr(1)
                gens.append(VectorField(self.chart, comps))
            return Distribution(self.chart, gens)
        vecs = linalg.nullspace(mat)
        return Distribution(self.chart, [VectorField(self.chart, v) for v in vecs])

    def __repr__(self) -> str:
        return f"<PfaffianSystem rank {self.rank} on {self.chart}>"


# ---------------------------------------------------------------------------
# control systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlSystem:
    """First order system dx/dt = F(t, x, u) on a time-extended chart.

    The chart carries t (role time), states, and controls; rhs maps each
    state name to its velocity.
    """

    chart: Chart
    rhs: dict

    def __post_init__(self):
        if self.chart.time is None:
            raise GeomError("control system chart needs a time coordinate")
        missing = [s for s in self.chart.states if s not in self.rhs]
        if missing:
            raise GeomError(f"missing right-hand side for {missing}")

    def drift(self) -> VectorField:
        """d_t + sum F_i d_xi."""
        comps = {self.chart.time: as_expr(1)}
        for s in self.chart.states:
            comps[s] = as_expr(self.rhs[s])
        return VectorField(self.chart, comps)

    def control_directions(self) -> list:
        out = []
        for u in self.chart.controls:
            out.append(VectorField(self.chart, {u: as_expr(1)}))
        return out

    def distribution(self) -> Distribution:
        """The ambient distribution <d_t + F d_x, d_u1, ..., d_um>."""
        return Distribution(self.chart, [self.drift()] + self.control_directions())

    def pfaffian(self) -> PfaffianSystem:
        """Contact forms dx_i - F_i dt."""
        forms = []
        t = self.chart.time
        for s in self.chart.states:
            comps = {s: as_expr(1), t: -as_expr(self.rhs[s])}
            forms.append(OneForm(self.chart, comps))
        return PfaffianSystem(self.chart, forms)


def kalman_controllable(a_rows, b_rows) -> tuple:
    """Kalman test for dx = Ax + Bu; returns (controllable, rank)."""
    n = len(a_rows)
    blocks = [[as_expr(x) for x in row] for row in b_rows]
    cols = [list(col) for col in zip(*blocks)]
    out_cols = list(cols)
    cur = cols
    for _ in range(n - 1):
        nxt = []
        for col in cur:
            newcol = []
            for i in range(n):
                acc = ZERO
                for j in range(n):
                    acc = acc + as_expr(a_rows[i][j]) * col[j]
                newcol.append(normalize(acc))
            nxt.append(newcol)
        out_cols.extend(nxt)
        cur = nxt
    mat = [list(row) for row in zip(*out_cols)]
    r = linalg.generic_rank(mat)
    return (r == n, r)


def brunovsky_pair(kappa) -> tuple:
    """Brunovsky normal form (A, B) for controllability indices kappa.

    kappa lists chain lengths; a length-k chain contributes a k-step
    integrator block, and the total state dimension is sum(kappa).
    """
    n = sum(kappa)
    m = len(kappa)
    a = [[Fraction(0)] * n for _ in range(n)]
    b = [[Fraction(0)] * m for _ in range(n)]
    base = 0
    for ci, k in enumerate(kappa):
        for s in range(k - 1):
            a[base + s][base + s + 1] = Fraction(1)
        b[base + k - 1][ci] = Fraction(1)
        base += k
    return a, b
