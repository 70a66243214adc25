"""Derived flags, Cauchy characteristics, refined derived types."""

import pytest

from cflkit.flags import (
    analyze_flag,
    cauchy_characteristic,
    clear_denominators,
    derived_flag,
    growth,
    signature,
)
from cflkit.geomcore import Chart, Distribution, VectorField, bracket
from cflkit.symexpr import as_expr, parse


def test_derived_flag_monotone(hsm):
    dist = hsm.control_system().distribution()
    flag = derived_flag(dist)
    ranks = flag.ranks
    assert ranks == (3, 5, 7, 8)
    assert all(a < b for a, b in zip(ranks, ranks[1:]))
    for small, big in zip(flag.steps, flag.steps[1:]):
        for g in small.generators:
            assert big.contains(g)
    assert flag.fills_tangent_space


def test_derived_flag_stabilizes(lin1):
    dist = lin1.control_system().distribution()
    flag = derived_flag(dist)
    assert flag.ranks == (3, 5, 6)
    assert not flag.fills_tangent_space


def test_frobenius_flag_has_depth_zero():
    ch = Chart(("x", "y", "z"), ("state", "state", "state"))
    d = Distribution(
        ch,
        [VectorField(ch, {"x": as_expr(1)}), VectorField(ch, {"y": as_expr(1)})],
    )
    flag = derived_flag(d)
    assert flag.depth == 0
    assert flag.ranks == (2,)


def test_cauchy_characteristic_is_characteristic(hsm):
    dist = hsm.control_system().distribution()
    v1 = derived_flag(dist).steps[1]
    char = cauchy_characteristic(v1)
    assert char.rank == 2
    for z in char.generators:
        assert v1.contains(z)
        for g in v1.generators:
            assert v1.contains(bracket(z, g))


def test_rdt_hsm(hsm):
    fa = analyze_flag(hsm.control_system().distribution())
    assert fa.rdt == ((3, 0), (5, 2, 2), (7, 4, 5), (8, 8))
    assert growth(fa.rdt) == [2, 2, 1]
    assert signature(fa.rdt) == [0, 1, 1]


def test_rdt_lin1(lin1):
    fa = analyze_flag(lin1.control_system().distribution())
    assert fa.rdt == ((3, 0), (5, 2, 3), (6, 6))


def test_rdt_sluis(sluis):
    fa = analyze_flag(sluis.control_system().distribution())
    assert fa.rdt == ((3, 0), (5, 2, 2), (7, 7))
    assert signature(fa.rdt) == [0, 2]


def test_rdt_bc(bc):
    fa = analyze_flag(bc.control_system().distribution())
    assert fa.rdt == ((4, 0), (7, 3, 4), (9, 5, 5), (11, 11))


def test_char_in_prev_nested(hsm):
    fa = analyze_flag(hsm.control_system().distribution())
    for j in range(1, fa.depth):
        meet = fa.char_in_prev[j]
        assert meet is not None
        prev = fa.flag.steps[j - 1]
        cj = fa.char[j]
        for g in meet.generators:
            assert prev.contains(g)
            assert cj.contains(g)


def test_clear_denominators():
    comps = [parse("x/(1 + x)"), parse("1/(1 + x)^2"), as_expr(0)]
    out = clear_denominators(comps)
    assert str(out[0]) == "x^2 + x"
    assert str(out[1]) == "1"
    assert out[2].is_zero
