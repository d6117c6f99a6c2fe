import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from escmeasure import growth
from escmeasure.errors import DomainError, ParameterError
from escmeasure.functions import CuiProduct, ExpFamily, MittagLeffler, PowerPrecompose, SinFamily


def el_closed_form(r):
    # (1/log r) int_1^r (2 pi - 2 arccos(1/t)) dt/t, with int_1^r arcsin(1/t) dt/t done by quadrature-free series
    # int_1^r arcsin(1/t)/t dt = int_{1/r}^1 arcsin(x)/x dx = (pi/2) log 2 - int_0^{1/r} arcsin(x)/x dx
    x = 1.0 / r
    small = x + x**3 / 18 + 3 * x**5 / 200  # arcsin(x)/x integrated term by term
    return (math.pi * math.log(r) + 2 * (math.pi / 2 * math.log(2) - small)) / math.log(r)


def test_max_modulus_exp():
    m = growth.max_modulus(ExpFamily(), 10.0)
    assert math.exp(m.log_value) == pytest.approx(math.exp(10.0), rel=1e-9)
    assert m.closed_form_log == 10.0


def test_max_modulus_sin():
    m = growth.max_modulus(SinFamily(), 10.0)
    assert m.value == pytest.approx((math.exp(10) - math.exp(-10)) / 2, rel=1e-9)
    assert m.value == pytest.approx(math.exp(10) / 2, rel=0.01)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.5, max_value=20.0), st.integers(min_value=0, max_value=10**6))
def test_max_modulus_is_a_max(r, seed):
    spec = PowerPrecompose(2, SinFamily(0.8, 0.3))
    m = growth.max_modulus(spec, r)
    t = np.random.default_rng(seed).uniform(0, 2 * math.pi, 1000)
    vals = growth.circle_log_abs(spec, r, t)
    assert np.all(vals <= m.log_value + 1e-12)


def test_max_modulus_cui_upper_bound(lin, zs_big):
    r = 1e3
    rho = float(lin.rho(r))
    m = growth.max_modulus(CuiProduct(zs_big), r)
    assert m.log_value <= math.pi * r**rho / math.sin(math.pi * rho)
    assert abs(m.angle - math.pi) < 1e-6


@pytest.mark.parametrize("r", [3.0, 100.0, 1e4])
def test_theta_exp_closed_form(r):
    th = growth.theta_measure(ExpFamily(), r, math.e)
    assert th.theta == pytest.approx(2 * math.pi - 2 * math.acos(1 / r), abs=1e-4)
    assert th.theta + th.complement == pytest.approx(2 * math.pi, abs=1e-5)
    assert len(th.crossings) == 2


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.5, max_value=40), st.floats(min_value=0.1, max_value=1e3))
def test_theta_partitions_circle(r, r0):
    th = growth.theta_measure(SinFamily(1.0, 0.5), r, r0)
    assert 0.0 <= th.theta <= 2 * math.pi
    assert th.theta + th.complement == pytest.approx(2 * math.pi, abs=1e-5)


def test_theta_cui(lin, zs_big):
    f = CuiProduct(zs_big)
    lo = growth.circle_log_abs(f, 5.0, np.linspace(0, 2 * math.pi, 512)).min()
    assert growth.theta_measure(f, 5.0, 0.5 * math.exp(lo)).theta == 0.0  # r0 below min |f| on the circle
    assert growth.theta_measure(f, 1e3, math.e).theta >= 2 * float(lin.epsilon(1e3))


def test_theta_validation():
    with pytest.raises(ParameterError):
        growth.theta_measure(ExpFamily(), 1.0, 0.0)
    with pytest.raises(ParameterError):
        growth.theta_measure(ExpFamily(), 1.0, 1.0, n_samples=100)


@pytest.mark.parametrize("r", [2.0, 5.0, 10.0])
def test_characteristic_chain(r):
    f = ExpFamily()
    T = growth.nevanlinna_T(f, r)
    assert abs(T - r / math.pi) <= 1e-6
    assert T <= growth.max_modulus(f, r).log_value + 1e-9
    assert growth.max_modulus(f, r).log_value <= 3 * growth.nevanlinna_T(f, 2 * r) + 1e-6


def test_characteristic_below_log_max_sin():
    for r in (1.0, 4.0, 9.0):
        f = SinFamily(1.0, 0.3)
        assert growth.nevanlinna_T(f, r) <= growth.max_modulus(f, r).log_value + 1e-9


def test_first_fundamental_theorem():
    f = ExpFamily()
    gaps = []
    for r in (2.0, 4.0, 8.0):
        T = growth.nevanlinna_T(f, r)
        gaps.append(T - growth.proximity(f, r, 1.0) - growth.nevanlinna_N(f, r, 1.0))
    # e^z - 1 = z + ..., so the constant is log 1 = 0 and |gap| <= log+|a| + log 2
    assert max(abs(g) for g in gaps) <= math.log(2)


def test_a_point_radii():
    n0, jumps = growth.a_point_radii(ExpFamily(), 8.0, 1.0)
    assert n0 == 1
    assert len(jumps) == 1 and jumps[0][1] == 2
    assert jumps[0][0] == pytest.approx(2 * math.pi, rel=1e-3)


def test_el_condition_exp():
    res = growth.el_condition(ExpFamily(), [10.0, 100.0, 1e4], math.e)
    for r, v in zip(res.r, res.values):
        assert v == pytest.approx(el_closed_form(r), rel=2e-4)
    assert np.all(res.liminf <= res.values)
    with pytest.raises(ParameterError):
        growth.el_condition(ExpFamily(), [10.0, 10.0], math.e)


def test_el_condition_mittag_leffler():
    res = growth.el_condition(MittagLeffler(1.5), np.geomspace(3, 50, 6), math.e, nodes_per_unit=8)
    assert res.liminf.min() > 0.3


def test_cui_condition():
    f = ExpFamily()
    res = growth.cui_condition(f, 1e4, 63 / 65, lambda r: 1.0, math.e)
    assert res.lhs == pytest.approx(math.pi * (1 - 63 / 65), rel=0.05)
    assert res.rhs == 1.0
    with pytest.raises(ParameterError, match="63/65"):
        growth.cui_condition(f, 1e4, 0.9, lambda r: 1.0, math.e)
    with pytest.raises(ParameterError):
        growth.cui_condition(f, 1e4, 1.0, lambda r: 1.0, math.e)


def test_tsuji_integral_closed_forms():
    t = np.geomspace(2.0, 50.0, 50)
    assert growth.tsuji_integral([(x, 2 * math.pi) for x in t], 100.0, 0.5, 2.0) == pytest.approx(0.5 * math.log(25))
    assert growth.tsuji_integral([(x, math.pi) for x in t], 100.0, 0.5) == pytest.approx(math.log(25))
    with pytest.raises(DomainError):
        growth.tsuji_integral([(2.0, 1.0), (3.0, 0.0)], 100.0, 0.5)
    with pytest.raises(ParameterError):
        growth.tsuji_integral([(2.0, 1.0), (3.0, 1.0)], 100.0, 1.5)


def test_tsuji_check_exp():
    gaps = [growth.tsuji_check(ExpFamily(), r, math.e, 0.5, 2.0).gap for r in (1e2, 1e3, 1e4)]
    assert all(g >= 0 for g in gaps)
    assert max(gaps) - min(gaps) < 0.1  # O(1)


def test_growth_report_exp(lin):
    rep = growth.growth_report(ExpFamily(), lin, [1e2, 1e3, 1e4])
    for row in rep.rows:
        assert row[1] == pytest.approx(math.log(row[0]), rel=1e-12)
    assert rep.to_csv().splitlines()[0] == "r,loglogM,ab_bound,cui_bound,dca_floor"
    assert not rep.flags


def test_growth_report_cui(lin, zs_big):
    rep = growth.growth_report(CuiProduct(zs_big), lin, np.geomspace(1e2, 1e4, 5))
    llm = [row[1] for row in rep.rows]
    assert np.all(np.diff(llm) > 0)
    assert rep.cui_constant < 2.0
    assert not rep.flags


def test_growth_report_power(lin, zs_small):
    rep = growth.growth_report(PowerPrecompose(2, CuiProduct(zs_small)), lin, [20.0, 50.0, 100.0])
    assert rep.n_tracts == 2
    assert rep.cui_constant < 2.0
