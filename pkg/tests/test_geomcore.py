"""Charts, fields, forms, distributions, and the exact linear algebra."""

from fractions import Fraction

import pytest

from cflkit import linalg
from cflkit.geomcore import (
    Chart,
    ControlSystem,
    Distribution,
    GeomError,
    OneForm,
    PfaffianSystem,
    VectorField,
    bracket,
    brunovsky_pair,
    differential,
    exterior_derivative,
    intersection,
    kalman_controllable,
    lie_derivative,
)
from cflkit.symexpr import Var, as_expr, normalize, parse


def chart3():
    return Chart(("x", "y", "z"), ("state", "state", "state"))


# -- charts ------------------------------------------------------------------


def test_chart_validation():
    with pytest.raises(GeomError):
        Chart(("x", "x"), ("state", "state"))
    with pytest.raises(GeomError):
        Chart(("x",), ("state", "state"))
    with pytest.raises(GeomError):
        Chart(("x",), ("banana",))


def test_time_extended_chart():
    ch = Chart(("t", "x", "u"), ("time", "state", "control"))
    assert ch.time == "t"
    assert ch.states == ("x",)
    assert ch.controls == ("u",)
    assert ch.dim == 3


# -- vector fields and brackets ------------------------------------------------


def test_vector_field_application():
    ch = chart3()
    v = VectorField(ch, {"x": parse("y"), "y": parse("-x")})
    out = v(parse("x^2 + y^2"))
    assert normalize(out).is_zero


def test_bracket_coordinate_fields_commute():
    ch = chart3()
    dx = VectorField(ch, {"x": as_expr(1)})
    dy = VectorField(ch, {"y": as_expr(1)})
    assert bracket(dx, dy).is_zero


def test_bracket_known_value():
    ch = chart3()
    a = VectorField(ch, {"x": as_expr(1)})
    b = VectorField(ch, {"y": parse("x")})
    c = bracket(a, b)
    assert normalize(c.comp("y") - 1).is_zero
    assert normalize(c.comp("x")).is_zero


def test_bracket_antisymmetry():
    ch = chart3()
    a = VectorField(ch, {"x": parse("y*z"), "z": parse("x^2")})
    b = VectorField(ch, {"y": parse("x + z"), "z": parse("sin(y)")})
    lhs = bracket(a, b)
    rhs = bracket(b, a)
    for name in ch.names:
        assert normalize(lhs.comp(name) + rhs.comp(name)).is_zero


# -- forms ---------------------------------------------------------------------


def test_one_form_pairing():
    ch = chart3()
    theta = differential(parse("x*y"), ch)
    v = VectorField(ch, {"x": as_expr(1), "y": parse("-y/x")})
    assert normalize(theta.pair(v)).is_zero


def test_exterior_derivative_of_exact_form_vanishes():
    ch = chart3()
    theta = differential(parse("sin(x)*z + y^2"), ch)
    assert exterior_derivative(theta).is_zero


def test_exterior_derivative_nonclosed():
    ch = chart3()
    theta = OneForm(ch, {"y": parse("x")})
    d = exterior_derivative(theta)
    dx = VectorField(ch, {"x": as_expr(1)})
    dy = VectorField(ch, {"y": as_expr(1)})
    assert normalize(d.pair(dx, dy) - 1).is_zero


def test_lie_derivative_cartan():
    ch = chart3()
    v = VectorField(ch, {"x": parse("y")})
    theta = differential(parse("x^2"), ch)
    out = lie_derivative(v, theta)
    expect = differential(parse("2*x*y"), ch)
    for a, b in zip(out.comps, expect.comps):
        assert normalize(a - b).is_zero


# -- distributions ---------------------------------------------------------------


def test_distribution_rank_and_annihilator():
    ch = chart3()
    d = Distribution(ch, [VectorField(ch, {"x": as_expr(1), "z": parse("y")})])
    assert d.rank == 1
    ann = d.annihilator()
    assert ann.rank == 2
    for theta in ann.forms:
        for g in d.generators:
            assert normalize(theta.pair(g)).is_zero


def test_annihilator_involution_roundtrip():
    ch = chart3()
    d = Distribution(
        ch,
        [
            VectorField(ch, {"x": as_expr(1), "y": parse("z")}),
            VectorField(ch, {"z": as_expr(1)}),
        ],
    )
    dd = d.annihilator().annihilator()
    assert dd == d


def test_frobenius_detection():
    ch = chart3()
    flat = Distribution(
        ch,
        [VectorField(ch, {"x": as_expr(1)}), VectorField(ch, {"y": as_expr(1)})],
    )
    assert flat.is_frobenius()
    contact = Distribution(
        ch,
        [
            VectorField(ch, {"x": as_expr(1), "z": parse("y")}),
            VectorField(ch, {"y": as_expr(1)}),
        ],
    )
    assert not contact.is_frobenius()


def test_intersection():
    ch = chart3()
    a = Distribution(
        ch,
        [VectorField(ch, {"x": as_expr(1)}), VectorField(ch, {"y": as_expr(1)})],
    )
    b = Distribution(
        ch,
        [VectorField(ch, {"y": as_expr(1)}), VectorField(ch, {"z": as_expr(1)})],
    )
    meet = intersection(a, b)
    assert meet.rank == 1
    assert meet.contains(VectorField(ch, {"y": as_expr(1)}))


# -- control systems --------------------------------------------------------------


def test_control_system_requires_time():
    ch = chart3()
    with pytest.raises(GeomError):
        ControlSystem(ch, {"x": as_expr(0), "y": as_expr(0), "z": as_expr(0)})


def test_control_system_distribution(hsm):
    cs = hsm.control_system()
    assert len(cs.chart.states) == 5
    assert len(cs.chart.controls) == 2
    dist = cs.distribution()
    assert dist.rank == 3
    forms = cs.pfaffian().forms
    drift = cs.drift()
    for theta in forms:
        assert normalize(theta.pair(drift)).is_zero


# -- linear algebra ----------------------------------------------------------------


def test_rank_rational_entries():
    rows = [
        [parse("1/(1 + x)"), parse("x")],
        [parse("1"), parse("x*(1 + x)")],
    ]
    assert linalg.rank(rows) == 1
    rows[1][1] = parse("x^2")
    assert linalg.rank(rows) == 2


def test_rank_matches_rref_pivots():
    import random

    rng = random.Random(11)
    names = ("x", "y")
    for _ in range(25):
        rows = []
        for _ in range(rng.randrange(1, 4)):
            row = []
            for _ in range(3):
                c0 = rng.randrange(-2, 3)
                c1 = rng.randrange(-2, 3)
                row.append(parse(f"{c0} + {c1}*{rng.choice(names)}"))
            rows.append(row)
        _, pivots = linalg.rref(rows)
        assert linalg.rank(rows) == len(pivots)


def test_nullspace_exact():
    rows = [[parse("1"), parse("x"), parse("0")], [parse("0"), parse("1"), parse("y")]]
    basis = linalg.nullspace(rows)
    assert len(basis) == 1
    vec = basis[0]
    for row in rows:
        acc = as_expr(0)
        for a, b in zip(row, vec):
            acc = acc + a * b
        assert normalize(acc).is_zero
    assert normalize(vec[2] - 1).is_zero


def test_nullspace_full_rank_is_empty():
    rows = [[as_expr(1), as_expr(0)], [as_expr(0), as_expr(1)]]
    assert linalg.nullspace(rows) == []


def test_in_row_span():
    rows = [[as_expr(1), parse("x")], [as_expr(0), as_expr(1)]]
    assert linalg.in_row_span(rows, [parse("2"), parse("2*x + 5")])
    assert not linalg.in_row_span([[as_expr(1), parse("x")]], [as_expr(0), as_expr(1)])


def test_coordinates():
    rows = [[as_expr(1), parse("x")], [as_expr(0), as_expr(1)]]
    vec = [parse("3"), parse("3*x + y")]
    lam = linalg.coordinates(rows, vec)
    assert lam is not None
    for c in range(2):
        acc = as_expr(0)
        for coef, row in zip(lam, rows):
            acc = acc + coef * row[c]
        assert normalize(acc - vec[c]).is_zero


def test_det_and_minors():
    rows = [[parse("x"), parse("1")], [parse("1"), parse("x")]]
    assert normalize(linalg.det(rows) - parse("x^2 - 1")).is_zero
    minors = linalg.maximal_minors([[parse("x"), parse("1"), parse("0")]])
    assert [str(m) for m in minors] == ["x", "1", "0"]


def test_generic_rank_agrees():
    rows = [[parse("sin(x)"), parse("cos(x)")], [parse("2*sin(x)"), parse("2*cos(x)")]]
    assert linalg.generic_rank(rows) == 1


# -- Kalman and Brunovsky -----------------------------------------------------------


def test_kalman_simple():
    a = [[0, 1], [0, 0]]
    b = [[0], [1]]
    ok, r = kalman_controllable(a, b)
    assert ok and r == 2


def test_kalman_uncontrollable():
    a = [[1, 0], [0, 1]]
    b = [[1], [0]]
    ok, r = kalman_controllable(a, b)
    assert not ok and r == 1


def test_brunovsky_pair_shape():
    a, b = brunovsky_pair((2, 3))
    assert len(a) == 5 and len(a[0]) == 5
    assert len(b) == 5 and len(b[0]) == 2
    assert a[0][1] == Fraction(1) and b[1][0] == Fraction(1)
    ok, r = kalman_controllable(a, b)
    assert ok and r == 5
