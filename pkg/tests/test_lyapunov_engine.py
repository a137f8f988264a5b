import mpmath as mp
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from switchlyap import families
from switchlyap.algebra_core import Space
from switchlyap.lyapunov_engine import (InsufficientOrderError, LyapunovTable, ManualBranchRequired,
                                        NotNormalFormError, PolarHalf, brute_force_polar, constant_ladder,
                                        displacement, half_return, param_space, polar_form, polar_half)
from switchlyap.system_model import LienardCoeffs, PerturbationScheme
from switchlyap.trig_series import TrigPoly


@pytest.fixture(scope="module")
def ladder6():
    tab = displacement(families.limit_cycle_family(), 6, 7)
    return constant_ladder(tab, families.limit_cycle_ladder(6))


def p(space, text):
    return space.parse_poly(text)


def test_linear_rotation_has_flat_polar_form():
    sys = families.scaled_lienard({n: 0 for n in ("a2p", "a3p", "b2p", "b3p", "a2m", "a3m", "b2m", "b3m")},
                                  PerturbationScheme(unfolding=1))
    pol = polar_form(sys)
    assert not pol.upper.numerator and not pol.upper.denominator
    tab = displacement(sys, 5, 3)
    assert tab.is_zero()


def test_wrong_linear_part_rejected():
    with pytest.raises(NotNormalFormError):
        polar_form(families.scaled_lienard(scheme=PerturbationScheme(unfolding=0)))


def test_polar_form_against_brute_force():
    sys = families.eps2_family()
    ps = param_space(sys)
    half = polar_half(*sys.upper, ps, ("0", "pi"))
    rdot, rthdot = brute_force_polar(*sys.upper, ps)
    # at r = 1: r' = sum_n A_n and r theta' = 1 + sum_n B_n
    num = sum(half.numerator.values(), TrigPoly(ps))
    den = sum(half.denominator.values(), TrigPoly(ps))
    assert (num - rdot).strip().is_zero()
    assert (den + TrigPoly.from_poly(ps.one()) - rthdot).strip().is_zero()


def test_single_b2_pair():
    sys = families.scaled_lienard({"a2p": 0, "a3p": 0, "b3p": 0, "a2m": 0, "a3m": 0, "b2m": 0, "b3m": 0})
    half = polar_form(sys).upper
    ps = half.space
    c, s = TrigPoly.cos(ps), TrigPoly.sin(ps)
    b = TrigPoly.from_poly(ps.var("b2p"))
    assert set(half.numerator) == {(2, 0)} and set(half.denominator) == {(1, 0)}
    assert (half.numerator[(2, 0)] + b * c * s * s).strip().is_zero()
    assert (half.denominator[(1, 0)] - b * s ** 3).strip().is_zero()


def test_r_squared_cos_layers():
    # r' = r^2 cos(theta) has r = xi / (1 - xi sin(theta))
    S = Space(())
    half = PolarHalf(S, {(2, 0): TrigPoly.cos(S)}, {}, ("0", "pi"))
    res = half_return(half, 6, 1, keep_layers=True)
    s = TrigPoly.sin(S)
    for k in range(1, 6):
        assert (res.layers[k][0] - s ** (k - 1)).strip().is_zero()
    assert res.series.terms == {(1, 0): S.one()}


def test_zero_field_identity_map():
    S = Space(())
    res = half_return(PolarHalf(S, {}, {}, ("0", "pi")), 5, 2)
    assert res.series.terms == {(1, 0): S.one()}


def test_insufficient_order():
    S = Space(())
    with pytest.raises(InsufficientOrderError):
        half_return(PolarHalf(S, {}, {}, ("0", "pi")), 1, 1)
    tab = displacement(families.eps2_family(), 3, 2)
    with pytest.raises(InsufficientOrderError):
        tab.entry(5, 1)


def test_half_return_matches_mpmath_quadrature():
    sys = families.scaled_lienard({"a2p": "1/2", "a3p": "-1", "b2p": "3/4", "b3p": "2", "a2m": 0, "a3m": 0,
                                   "b2m": 0, "b3m": 0}).fix_eps("1/4").compact()
    ser = half_return(polar_half(*sys.upper, param_space(sys), ("0", "pi")), 10, 1).series
    f, g = sys.upper

    def rhs(th, r):
        x, y = r * mp.cos(th), r * mp.sin(th)
        F = f.evaluate({"x": x, "y": y}, mp.pi)
        G = g.evaluate({"x": x, "y": y}, mp.pi)
        return r * (x * F + y * G) / (x * G - y * F)

    errs = []
    with mp.workdps(40):
        for n in (50, 100, 200):
            xi = mp.mpf(1) / n
            exact = mp.odefun(rhs, 0, xi)(mp.pi)
            approx = sum(c.evaluate({}, mp.pi) * xi**k for (k, _), c in ser.terms.items())
            errs.append(abs(exact - approx))
    # remainder is O(xi^10): each halving gains about 2^10
    assert errs[0] < mp.mpf("1e-16")
    assert errs[0] / errs[1] > 500 and errs[1] / errs[2] > 500


def test_first_eps_layer_of_v2():
    tab = displacement(families.scaled_lienard(), 4, 3)
    S = tab.space
    assert tab.entry(2, 1) == p(S, "4/3*(a2m - a2p)")
    assert tab.entry(3, 1) == S.pi() * p(S, "1/4*(a2p*b2p + a2m*b2m)")
    assert tab.entry(1, 1).is_zero()


def test_x_axis_symmetric_system_vanishes():
    # f(x, -y) = -f(x, y), g(x, -y) = g(x, y) on both halves with matching halves
    c = LienardCoeffs.from_mapping({"a2p": 0, "a3p": 0, "a2m": 0, "a3m": 0, "b2p": "b2", "b2m": "-b2",
                                    "b3p": "b3", "b3m": "b3"})
    assert displacement(families.scaled_lienard(c), 6, 5).is_zero()


def test_condition_iv_vanishes():
    assert displacement(families.limit_cycle_family(kmax=0).subs({"delta1": 0}), 7, 6).is_zero()


def test_v11_and_v12():
    tab = displacement(families.limit_cycle_family(), 3, 3)
    S = tab.space
    assert tab.entry(1, 1) == S.pi() * S.var("delta1")
    assert tab.subs({"delta1": 0}).entry(1, 2) == S.pi() * S.var("delta2")


def test_printed_ladder_values(ladder6):
    S = ladder6.table.space
    pi = S.pi()
    sol = ladder6.solved
    assert sol[(2, 2)] == p(S, "4/3*(p12m - p12p)")
    assert sol[(3, 2)] == pi * p(S, "1/4*a2p*(q12m + q12p)")
    assert sol[(2, 3)] == p(S, "4/3*(p22m - p22p)")
    assert sol[(3, 3)] == pi * p(S, "1/4*a2p*(q22m + q22p)")
    assert sol[(4, 4)] == p(S, "-8/45*a2p*(4*q32m*b2p + 4*b2p*q32p + 3*q13m - 3*q13p)")
    assert sol[(4, 5)] == p(S, "-8/45*a2p*(4*q32m*q12p + 4*q42m*b2p + 4*b2p*q42p + 4*q12p*q32p"
                               " + 3*q23m - 3*q23p)")
    assert ladder6.terminal == (5, 6)
    assert ladder6.terminal_value == pi * p(S, "-5/48*(2*a2p*b3p - 3*a3p*b2p)*(q32m + q32p)")


def test_printed_ladder_bindings(ladder6):
    S = ladder6.table.space
    b = ladder6.binding_map()
    for k in range(1, 7):
        assert b[f"delta{k}"] == 0
    assert b["p12m"] == S.var("p12p") and b["q12m"] == -S.var("q12p")
    assert b["p13m"] == p(S, "2/3*a2p*q32m + 2/3*a2p*q32p - p13p")
    assert b["p23m"] == p(S, "2/3*q32m*p12p + 2/3*q42m*a2p + 2/3*a2p*q42p + 2/3*p12p*q32p - p23p")
    assert b["p33m"] == p(S, "2/3*q32m*p22p + 2/3*q42m*p12p + 2/3*q52m*a2p + 2/3*a2p*q52p"
                             " + 2/3*p12p*q42p + 2/3*p22p*q32p - p33p")


def test_case_1i_terminal():
    tab = displacement(families.case_1i_system(), 7, 12)
    res = constant_ladder(tab, families.case_1i_ladder())
    S = tab.space
    b = res.binding_map()
    assert b["p22p"] == S.parse("3/2*(a3p + a3m)/b2p").as_poly()
    assert b["a3m"] == 0
    assert b["b3p"] == p(S, "-7*b3m")
    # leading and next eps layers of -128/(315 b2p^2) a3p b3m (b2p + (q22p + q22m) eps^2)^3 eps^5
    assert res.terminal == (6, 5)
    assert res.terminal_value == p(S, "-128/315*a3p*b3m*b2p")
    assert res.table.entry(6, 7) == p(S, "-128/105*a3p*b3m*(q22p + q22m)")


def test_ladder_refuses_nonlinear_entry():
    tab = displacement(families.scaled_lienard(), 4, 3)
    with pytest.raises(ManualBranchRequired):
        constant_ladder(tab, [(3, 2, "a2p")])


def test_json_round_trip():
    tab = displacement(families.eps2_family(), 4, 4)
    back = LyapunovTable.from_json(tab.to_json())
    assert back.entries == tab.entries
    assert (back.max_j, back.max_k) == (tab.max_j, tab.max_k)
    assert "V_2_1" in tab.to_json_dict()["entries"]


small = st.fractions(min_value=-3, max_value=3, max_denominator=5)


@settings(max_examples=12)
@given(st.lists(small, min_size=12, max_size=12))
def test_reflection_equals_inversion(vals):
    names = ("a2p", "a3p", "b2p", "b3p", "a2m", "a3m", "b2m", "b3m", "p22p", "q22p", "p22m", "q23m")
    data = {n: mpq(v.numerator, v.denominator) for n, v in zip(names, vals)}
    coeffs = {k: v for k, v in data.items() if k[0] in "ab"}
    sys = families.eps2_family(coeffs).subs({k: v for k, v in data.items() if k[0] in "pq"})
    r = displacement(sys, 5, 4, "reflection")
    i = displacement(sys, 5, 4, "inversion")
    assert r.entries == i.entries
