import gmpy2
from gmpy2 import mpq
from hypothesis import given, strategies as st

from switchlyap.algebra_core import Space
from switchlyap.trig_series import TrigPoly, antiderivative, definite_integral

S = Space(("b",))
c = TrigPoly.cos(S)
s = TrigPoly.sin(S)
th = TrigPoly.theta(S)
one = TrigPoly.from_poly(S.one())


def test_sin_antiderivative_anchored_at_zero():
    assert antiderivative(s) == one - c


def test_cos_squared_antiderivative():
    assert antiderivative(c * c) == th * mpq(1, 2) + s * c * mpq(1, 2)


def test_theta_cos_antiderivative():
    got = antiderivative(th * c)
    assert got == th * s + c - one
    assert got.derivative() == th * c


def test_definite_integrals():
    pi = S.pi()
    assert definite_integral(s, ("0", "pi")) == 2 * S.one()
    assert definite_integral(c * c, ("0", "pi")) == pi * mpq(1, 2)
    assert definite_integral(c**3 * s**2, ("0", "pi")).is_zero()


def test_pi_anchor_vanishes_at_pi():
    f = th**2 * c**3 * s + c**4
    F = antiderivative(f, "pi")
    assert F.at("pi").is_zero()
    assert F.derivative() == f


@st.composite
def trig_polys(draw):
    out = TrigPoly(S)
    for _ in range(draw(st.integers(1, 4))):
        out = out + TrigPoly.monomial(S, draw(st.integers(0, 2)), draw(st.integers(0, 4)),
                                      draw(st.integers(0, 1)), mpq(draw(st.integers(-3, 3)), 2))
    return out


@given(trig_polys())
def test_antiderivative_inverts_derivative(f):
    F = antiderivative(f)
    assert F.derivative() == f
    assert F.at("0").is_zero()


@given(trig_polys(), trig_polys())
def test_product_matches_pointwise_evaluation(f, g):
    with gmpy2.context(gmpy2.get_context(), precision=128):
        t = gmpy2.mpfr("0.7")
        pi = gmpy2.const_pi()
        lhs = (f * g).evaluate(t, {}, pi)
        rhs = f.evaluate(t, {}, pi) * g.evaluate(t, {}, pi)
        assert abs(lhs - rhs) <= 1e-30 * (1 + abs(rhs))


@given(trig_polys())
def test_integral_over_full_segment_adds(f):
    a = definite_integral(f, ("0", "pi"))
    b = definite_integral(f, ("pi", "2pi"))
    assert a + b == definite_integral(f, ("0", "2pi"))
