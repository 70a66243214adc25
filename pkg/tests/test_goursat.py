"""Goursat recognition, procedure contact, ESFL conditions."""

import pytest

from cflkit.geomcore import VectorField, bracket
from cflkit.goursat import (
    GoursatError,
    esfl_check,
    procedure_contact,
    recognize,
    type_relations,
    verify_contact_coordinates,
)
from cflkit.symexpr import Var, as_expr, equals, normalize, parse


# -- type relations ----------------------------------------------------------


def test_type_relations_contact_system():
    # kappa = <0,1,1>: one chain of order 2 and one of order 3.
    rdt = ((3, 0), (5, 2, 2), (7, 4, 5), (8, 8))
    kappa, violations = type_relations(rdt)
    assert violations == []
    assert list(kappa) == [0, 1, 1]


def test_type_relations_violation():
    rdt = ((3, 0), (5, 2, 2), (7, 3, 3), (8, 8))
    _, violations = type_relations(rdt)
    assert violations


# -- recognition ---------------------------------------------------------------


def test_recognize_hsm(hsm):
    rep = recognize(hsm.control_system().distribution())
    assert rep.is_goursat
    assert list(rep.kappa) == [0, 1, 1]
    assert rep.final_growth == 1
    assert rep.resolvent is None


def test_recognize_lin1_fails(lin1):
    rep = recognize(lin1.control_system().distribution())
    assert not rep.is_goursat
    assert any("stabilizes" in v for v in rep.violations)


def test_recognize_sluis_builds_resolvent(sluis):
    rep = recognize(sluis.control_system().distribution())
    assert rep.is_goursat
    assert list(rep.kappa) == [0, 2]
    assert rep.final_growth == 2
    assert rep.resolvent is not None and rep.resolvent.bundle is not None


def test_sluis_resolvent_span(sluis):
    cs = sluis.control_system()
    dist = cs.distribution()
    rep = recognize(dist)
    bundle = rep.resolvent.bundle
    x = cs.drift()
    du1, du2 = cs.control_directions()
    y1 = bracket(du1, x)
    y2 = bracket(du2, x)
    u1 = Var("u1")
    expected = [x - u1 * y1, y2, du1, du2]
    assert bundle.rank == 4
    for f in expected:
        assert bundle.contains(f)


# -- procedure contact ------------------------------------------------------------


def test_procedure_contact_hsm(hsm):
    cs = hsm.control_system()
    coords = procedure_contact(cs, hints=hsm.hints())
    assert coords.procedure == "B"
    assert normalize(coords.x - Var("t")).is_zero
    orders = sorted(chain.order for chain in coords.chains)
    assert orders == [2, 3]
    ok, problems = verify_contact_coordinates(cs, coords)
    assert ok, problems


def test_procedure_contact_hsm_values(hsm):
    cs = hsm.control_system()
    coords = procedure_contact(cs, hints=hsm.hints())
    by_order = {chain.order: chain.values for chain in coords.chains}
    expect2 = [
        "x4",
        "x5 + x4^3 - x1^10",
        "u2 + 3*x4^2*(x5 + x4^3 - x1^10) - 10*x1^9*sin(x2)",
    ]
    expect3 = [
        "x1",
        "sin(x2)",
        "cos(x2)*sin(x3)",
        "-sin(x2)*sin(x3)^2 + (x4^3 + u1)*cos(x2)*cos(x3)",
    ]
    for got, want in zip(by_order[2], expect2):
        assert equals(got, parse(want))
    for got, want in zip(by_order[3], expect3):
        assert equals(got, parse(want))


def test_procedure_contact_rejects_non_goursat(lin1):
    with pytest.raises(GoursatError):
        procedure_contact(lin1.control_system())


# -- ESFL --------------------------------------------------------------------------


def test_esfl_hsm(hsm):
    rep = esfl_check(hsm.control_system())
    assert rep.verdict
    assert rep.goursat.is_goursat and rep.controls_in_char and rep.dt_condition


def test_esfl_sluis_fails_on_dt(sluis):
    rep = esfl_check(sluis.control_system())
    assert not rep.verdict
    assert rep.goursat.is_goursat
    assert not rep.dt_condition
    assert any("dt" in r and "resolvent" in r for r in rep.reasons)


def test_esfl_lin1_fails(lin1):
    rep = esfl_check(lin1.control_system())
    assert not rep.verdict
