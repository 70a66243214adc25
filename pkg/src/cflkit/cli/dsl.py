"""System-definition files.

Line-oriented, UTF-8, LF, comments with ``#``.  One directive per line:

    system NAME
    time t
    states x1 x2 ...
    controls u1 ...
    ode VAR = EXPR
    pfaff NAME = EXPR              # one-form, d_<coord> markers
    symmetry NAME = EXPR           # vector field, d_<coord> markers
    invariant NAME : ROLE = EXPR   # role is state or control
    crosssection VAR = EXPR
    integrals TAG = EXPR, EXPR     # tag is top, x, or order<j>
    subconnection kappa = 0 2
    subconnection p1 = EXPR
    subconnection rho = [a, b; c, d]
    reduce drop N with NAME
    flatfn N = EXPR
    eps0 = 0 0
    grid = 0 1 1000

Vector fields and one-forms are written as expressions linear in marker
variables d_<coord>, so ``x2*d_x1 + d_u1`` is the field x2 d/dx1 + d/du1.
The same notation covers forms, where d_t is also legal.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from ..cascade import CascadeError, ContactSubConnection, signature_orders, sub_connection
from ..geomcore import Chart, ControlSystem, Distribution, GeomError, OneForm, PfaffianSystem, VectorField
from ..goursat import IntegralHints
from ..symexpr import ExprError, ParseError, Var, as_expr, diff, free_vars, normalize, parse

ROLES = ("state", "control")


class DslError(Exception):
    """Parse or validation failure, carrying file and line position."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
        self.message = message


@dataclass
class SubConnectionData:
    kappa: tuple
    p: dict
    rho: tuple | None = None


@dataclass
class SystemFile:
    path: str
    name: str
    time: str | None = None
    states: tuple = ()
    controls: tuple = ()
    ode: dict = field(default_factory=dict)
    pfaff: tuple = ()
    symmetries: tuple = ()
    invariants: tuple = ()
    crosssection: tuple = ()
    integrals: dict = field(default_factory=dict)
    subconn: SubConnectionData | None = None
    reduces: tuple = ()
    flatfns: dict = field(default_factory=dict)
    eps0: tuple = ()
    grid: tuple | None = None

    # -- materialization --------------------------------------------------

    def chart(self) -> Chart:
        if not self.states:
            raise DslError(self.path, 0, "file declares no state variables")
        pairs = [(self.time or "t", "time")]
        pairs += [(s, "state") for s in self.states]
        pairs += [(u, "control") for u in self.controls]
        return Chart.build(pairs)

    def control_system(self) -> ControlSystem:
        if not self.ode:
            raise DslError(self.path, 0, "file declares no ode block")
        return ControlSystem(self.chart(), dict(self.ode))

    def pfaffian_system(self) -> PfaffianSystem:
        if self.pfaff:
            chart = self.chart()
            forms = [OneForm(chart, comps) for _, comps in self.pfaff]
            return PfaffianSystem(chart, forms)
        return self.control_system().pfaffian()

    def distribution(self) -> Distribution:
        if self.ode:
            return self.control_system().distribution()
        return self.pfaffian_system().annihilator()

    def symmetry_fields(self) -> list:
        chart = self.chart()
        return [VectorField(chart, comps) for _, comps in self.symmetries]

    def hints(self) -> IntegralHints:
        order = {}
        top = []
        x = []
        for tag, exprs in self.integrals.items():
            if tag == "top":
                top = list(exprs)
            elif tag == "x":
                x = list(exprs)
            else:
                order[int(tag[5:])] = list(exprs)
        return IntegralHints(order=order, top=top, x=x)

    def sub_connection(self) -> ContactSubConnection:
        if self.subconn is None:
            raise DslError(self.path, 0, "file declares no subconnection block")
        sc = self.subconn
        p = tuple(sc.p[i] for i in sorted(sc.p))
        return sub_connection(sc.kappa, p, sc.rho)

    def reduce_fnames(self) -> dict:
        return dict(self.reduces)

    def curve_for(self, chain: int) -> str:
        """Curve name for freezing a chain: the reduce block's if present,
        else f<chain>."""
        return self.reduce_fnames().get(chain, f"f{chain}")


# ---------------------------------------------------------------------------
# parsing


def _split_eq(path, n, rest, directive):
    if "=" not in rest:
        raise DslError(path, n, f"{directive} needs '='")
    lhs, rhs = rest.split("=", 1)
    return lhs.strip(), rhs.strip()


def _parse_expr(path, n, text):
    try:
        return parse(text)
    except (ParseError, ExprError) as exc:
        raise DslError(path, n, f"bad expression {text!r}: {exc}") from None


def _split_list(text: str) -> list:
    """Split on top-level commas."""
    out = []
    depth = 0
    cur = []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        out.append("".join(cur))
    return [s.strip() for s in out if s.strip()]


def _int(path, n, text, what):
    try:
        return int(text)
    except ValueError:
        raise DslError(path, n, f"{what} must be an integer, got {text!r}") from None


def _number(path, n, text, what):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise DslError(path, n, f"{what} must be a number, got {text!r}") from None


def _linear_in_markers(path, n, e, names, kind):
    """Extract d_<coord> coefficients from a marker-linear expression."""
    comps = {}
    residual = e
    for name in names:
        marker = f"d_{name}"
        c = diff(e, marker)
        if not c.is_zero:
            comps[name] = c
            residual = residual - c * Var(marker)
    residual = normalize(residual)
    if not residual.is_zero:
        raise DslError(path, n, f"{kind} must be linear in d_<coord> markers")
    for name, c in comps.items():
        stray = {v for v in free_vars(c) if v.startswith("d_")}
        if stray:
            raise DslError(
                path, n, f"{kind} coefficient of d_{name} contains markers {sorted(stray)}"
            )
    return comps


def load(path: str) -> SystemFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DslError(path, 0, str(exc)) from None
    sf = SystemFile(path=path, name="")
    declared: set = set()
    kappa = None
    ps: dict = {}
    rho = None
    crosssection = []
    reduces = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        if word == "system":
            if not rest or len(rest.split()) != 1:
                raise DslError(path, n, "system needs a single name")
            sf.name = rest
        elif word == "time":
            if sf.time is not None:
                raise DslError(path, n, "duplicate time declaration")
            if len(rest.split()) != 1:
                raise DslError(path, n, "time needs a single name")
            sf.time = rest
            declared.add(rest)
        elif word in ("states", "controls"):
            new = tuple(rest.split())
            if not new:
                raise DslError(path, n, f"{word} needs at least one name")
            for v in new:
                if v in declared:
                    raise DslError(path, n, f"duplicate variable {v!r}")
                declared.add(v)
            if word == "states":
                sf.states += new
            else:
                sf.controls += new
        elif word == "ode":
            var, expr = _split_eq(path, n, rest, "ode")
            if var in sf.ode:
                raise DslError(path, n, f"duplicate ode for {var!r}")
            sf.ode[var] = _parse_expr(path, n, expr)
        elif word == "pfaff":
            name, expr = _split_eq(path, n, rest, "pfaff")
            e = _parse_expr(path, n, expr)
            sf.pfaff += ((name, e),)
        elif word == "symmetry":
            name, expr = _split_eq(path, n, rest, "symmetry")
            e = _parse_expr(path, n, expr)
            sf.symmetries += ((name, e),)
        elif word == "invariant":
            head, expr = _split_eq(path, n, rest, "invariant")
            if ":" not in head:
                raise DslError(path, n, "invariant needs 'name : role = expr'")
            name, role = (s.strip() for s in head.split(":", 1))
            if role not in ROLES:
                raise DslError(path, n, f"invariant role must be one of {ROLES}")
            sf.invariants += ((name, role, _parse_expr(path, n, expr)),)
        elif word == "crosssection":
            var, expr = _split_eq(path, n, rest, "crosssection")
            crosssection.append((var, _parse_expr(path, n, expr)))
        elif word == "integrals":
            tag, expr = _split_eq(path, n, rest, "integrals")
            if tag != "top" and tag != "x" and not (tag.startswith("order") and tag[5:].isdigit()):
                raise DslError(path, n, f"integrals tag must be top, x, or order<j>, got {tag!r}")
            if tag in sf.integrals:
                raise DslError(path, n, f"duplicate integrals tag {tag!r}")
            sf.integrals[tag] = tuple(_parse_expr(path, n, s) for s in _split_list(expr))
        elif word == "subconnection":
            key, expr = _split_eq(path, n, rest, "subconnection")
            if key == "kappa":
                if kappa is not None:
                    raise DslError(path, n, "duplicate kappa")
                kappa = tuple(_int(path, n, s, "kappa entry") for s in expr.split())
                if not kappa or any(c < 0 for c in kappa):
                    raise DslError(path, n, "kappa needs nonnegative multiplicities")
            elif key == "rho":
                if not (expr.startswith("[") and expr.endswith("]")):
                    raise DslError(path, n, "rho needs [row; row] syntax")
                rows = []
                for row in expr[1:-1].split(";"):
                    rows.append(tuple(_parse_expr(path, n, s) for s in _split_list(row)))
                rho = tuple(rows)
            elif key.startswith("p") and key[1:].isdigit():
                idx = int(key[1:])
                if idx in ps:
                    raise DslError(path, n, f"duplicate subconnection p{idx}")
                ps[idx] = _parse_expr(path, n, expr)
            else:
                raise DslError(path, n, f"unknown subconnection key {key!r}")
        elif word == "reduce":
            parts = rest.split()
            if len(parts) != 4 or parts[0] != "drop" or parts[2] != "with":
                raise DslError(path, n, "reduce needs 'drop N with NAME'")
            chain = _int(path, n, parts[1], "chain")
            if any(c == chain for c, _ in reduces):
                raise DslError(path, n, f"duplicate reduce block for chain {chain}")
            reduces.append((chain, parts[3]))
        elif word == "flatfn":
            key, expr = _split_eq(path, n, rest, "flatfn")
            chain = _int(path, n, key, "flatfn chain")
            if chain in sf.flatfns:
                raise DslError(path, n, f"duplicate flatfn for chain {chain}")
            sf.flatfns[chain] = _parse_expr(path, n, expr)
        elif word == "eps0":
            expr = rest.lstrip("=").strip()
            sf.eps0 = tuple(_number(path, n, s, "eps0 entry") for s in expr.split())
        elif word == "grid":
            expr = rest.lstrip("=").strip()
            parts = expr.split()
            if len(parts) != 3:
                raise DslError(path, n, "grid needs 't0 t1 steps'")
            t0 = _number(path, n, parts[0], "t0")
            t1 = _number(path, n, parts[1], "t1")
            steps = _int(path, n, parts[2], "steps")
            if not t0 < t1 or steps < 1:
                raise DslError(path, n, "grid needs t0 < t1 and steps >= 1")
            sf.grid = (t0, t1, steps)
        else:
            raise DslError(path, n, f"unknown directive {word!r}")
    sf.crosssection = tuple(crosssection)
    sf.reduces = tuple(reduces)
    if kappa is not None or ps or rho is not None:
        if kappa is None:
            raise DslError(path, 0, "subconnection needs a kappa line")
        if sorted(ps) != list(range(1, len(ps) + 1)):
            raise DslError(path, 0, "subconnection p indices must run 1..r")
        if not ps:
            raise DslError(path, 0, "subconnection needs at least p1")
        sf.subconn = SubConnectionData(kappa, ps, rho)
    _validate(sf)
    return sf


def _validate(sf: SystemFile):
    path = sf.path
    if not sf.name:
        raise DslError(path, 0, "missing system name")
    if sf.ode or sf.pfaff:
        if sf.time is None:
            raise DslError(path, 0, "missing time declaration")
        if not sf.states:
            raise DslError(path, 0, "missing states declaration")
        chart_names = {sf.time, *sf.states, *sf.controls}
        for var, e in sf.ode.items():
            if var not in sf.states:
                raise DslError(path, 0, f"ode target {var!r} is not a declared state")
            stray = free_vars(e) - chart_names
            if stray:
                raise DslError(path, 0, f"ode for {var!r} uses undeclared {sorted(stray)}")
        if sf.ode:
            missing = [s for s in sf.states if s not in sf.ode]
            if missing:
                raise DslError(path, 0, f"states without ode: {missing}")
        marker_names = chart_names | {f"d_{v}" for v in chart_names}
        for label, kind, rows in (
            ("pfaff", "one-form", sf.pfaff),
            ("symmetry", "vector field", sf.symmetries),
        ):
            cooked = []
            for name, e in rows:
                stray = free_vars(e) - marker_names
                if stray:
                    raise DslError(path, 0, f"{label} {name!r} uses undeclared {sorted(stray)}")
                cooked.append((name, _linear_in_markers(path, 0, e, sorted(chart_names), kind)))
            if label == "pfaff":
                sf.pfaff = tuple(cooked)
            else:
                sf.symmetries = tuple(cooked)
        for name, comps in sf.symmetries:
            if sf.time in comps:
                raise DslError(path, 0, f"symmetry {name!r} moves the time variable")
        inv_names = set()
        for name, role, e in sf.invariants:
            if name in chart_names or name in inv_names:
                raise DslError(path, 0, f"invariant name {name!r} shadows another variable")
            inv_names.add(name)
            stray = free_vars(e) - chart_names
            if stray:
                raise DslError(path, 0, f"invariant {name!r} uses undeclared {sorted(stray)}")
        section_names = inv_names | {sf.time}
        for var, e in sf.crosssection:
            if var not in sf.states and var not in sf.controls:
                raise DslError(path, 0, f"crosssection target {var!r} is not declared")
            stray = free_vars(e) - section_names
            if stray:
                raise DslError(
                    path, 0, f"crosssection for {var!r} must use invariant names, found {sorted(stray)}"
                )
    if sf.subconn is not None:
        try:
            orders = signature_orders(sf.subconn.kappa)
        except CascadeError as exc:
            raise DslError(path, 0, str(exc)) from None
        chains = set(range(1, len(orders) + 1))
        for chain, _ in sf.reduces:
            if chain not in chains:
                raise DslError(path, 0, f"reduce names chain {chain}, file has {sorted(chains)}")
        for chain in sf.flatfns:
            if chain not in chains:
                raise DslError(path, 0, f"flatfn names chain {chain}, file has {sorted(chains)}")
        try:
            sf.sub_connection()
        except (CascadeError, GeomError) as exc:
            raise DslError(path, 0, f"bad subconnection: {exc}") from None
    elif sf.reduces or sf.flatfns or sf.eps0 or sf.grid:
        raise DslError(path, 0, "reduce/flatfn/eps0/grid need a subconnection block")
    if not (sf.ode or sf.pfaff or sf.subconn):
        raise DslError(path, 0, "file defines no system (ode, pfaff, or subconnection)")
