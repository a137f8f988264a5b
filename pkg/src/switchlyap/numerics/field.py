"""Polynomial vector fields at concrete parameters, evaluated in mpfr."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

import gmpy2
from gmpy2 import mpfr, mpq

from ..algebra_core import ParamPoly, to_rational
from ..system_model import SwitchingSystem

DEFAULT_BITS = 256


@contextmanager
def precision(bits: int) -> Iterator[None]:
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        yield


def sci(v, digits: int = 30) -> str:
    """Scientific notation with ``digits`` digits after the point.

    gmpy2 2.3 mangles ``format(mpfr, ".30e")``, so the digits are taken
    from ``mpfr.digits`` instead.
    """
    v = mpfr(v)
    if not gmpy2.is_finite(v):
        return str(v)
    if v == 0:
        return f"{0:.{digits}e}"
    mant, exp, _ = v.digits(10, digits + 1)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    e = exp - 1
    return f"{sign}{mant[0]}.{mant[1:]}e{'-' if e < 0 else '+'}{abs(e):02d}"


def to_mpfr(v) -> mpfr:
    if isinstance(v, type(mpfr(0))):
        return mpfr(v)
    if isinstance(v, str):
        try:
            return mpfr(to_rational(v))
        except (ValueError, TypeError):
            return mpfr(v)
    if isinstance(v, Fraction):
        return mpfr(mpq(v.numerator, v.denominator))
    if isinstance(v, float):
        raise TypeError("binary floats are not accepted; pass strings or rationals")
    return mpfr(to_rational(v))


@dataclass
class NumericField:
    """``x' = sum f_ij x^i y^j``, ``y' = sum g_ij x^i y^j`` with mpfr coefficients."""

    f: list[tuple[int, int, mpfr]]
    g: list[tuple[int, int, mpfr]]

    def __post_init__(self):
        terms = self.f + self.g
        self.dx = max((i for i, _, _ in terms), default=0)
        self.dy = max((j for _, j, _ in terms), default=0)

    def negated(self) -> "NumericField":
        return NumericField([(i, j, -c) for i, j, c in self.f], [(i, j, -c) for i, j, c in self.g])

    def __call__(self, x, y) -> tuple[mpfr, mpfr]:
        return _eval(self.f, x, y), _eval(self.g, x, y)

    def taylor(self, x0, y0, order: int) -> tuple[list, list]:
        """Taylor coefficients of the solution through (x0, y0) up to t**order.

        The coefficients follow from Cauchy products of the running power
        series of x**i and y**j, one order at a time.
        """
        X, Y = [mpfr(x0)], [mpfr(y0)]
        px = [[mpfr(1)]] + [[] for _ in range(self.dx)]
        py = [[mpfr(1)]] + [[] for _ in range(self.dy)]
        zero = mpfr(0)
        for n in range(order):
            for pw, S in ((px, X), (py, Y)):
                if n > 0:
                    pw[0].append(zero)
                for i in range(1, len(pw)):
                    prev = pw[i - 1]
                    pw[i].append(sum((prev[k] * S[n - k] for k in range(n + 1)), zero))
            fx = zero
            fy = zero
            cache = {}
            for terms, which in ((self.f, 0), (self.g, 1)):
                acc = zero
                for i, j, c in terms:
                    key = (i, j)
                    if key not in cache:
                        if j == 0:
                            cache[key] = px[i][n]
                        elif i == 0:
                            cache[key] = py[j][n]
                        else:
                            a, b = px[i], py[j]
                            cache[key] = sum((a[k] * b[n - k] for k in range(n + 1)), zero)
                    acc += c * cache[key]
                if which == 0:
                    fx = acc
                else:
                    fy = acc
            X.append(fx / (n + 1))
            Y.append(fy / (n + 1))
        return X, Y


def _eval(terms, x, y) -> mpfr:
    acc = mpfr(0)
    for i, j, c in terms:
        acc += c * x**i * y**j
    return acc


def horner(coeffs: list, t) -> mpfr:
    acc = mpfr(0)
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def _numeric_terms(p: ParamPoly, values: Mapping[str, mpfr], pi: mpfr) -> list[tuple[int, int, mpfr]]:
    space = p.space
    out: dict[tuple[int, int], mpfr] = {}
    for pk, e, c in p.exponent_items():
        v = mpfr(c) * pi**pk
        for name, k in zip(space.names[2:], e[2:]):
            if k:
                if name not in values:
                    raise KeyError(f"no value for {name}")
                v *= values[name] ** k
        key = (e[0], e[1])
        out[key] = out.get(key, mpfr(0)) + v
    return [(i, j, c) for (i, j), c in sorted(out.items()) if c != 0]


@dataclass
class NumericSystem:
    upper: NumericField
    lower: NumericField
    manifold: str
    bits: int

    @property
    def axis(self) -> int:
        return 0 if self.manifold == "x" else 1

    def half(self, side: str) -> NumericField:
        return self.upper if side in ("upper", "p", "+") else self.lower


def numeric_system(sys: SwitchingSystem, values: Mapping[str, object] | None = None, eps: object = 0,
                   bits: int = DEFAULT_BITS) -> NumericSystem:
    """Bind every parameter and eps to numbers; missing parameters raise KeyError."""
    with precision(bits):
        vals = {n: to_mpfr(v) for n, v in (values or {}).items()}
        vals["eps"] = to_mpfr(eps)
        pi = gmpy2.const_pi()
        upper = NumericField(*(_numeric_terms(p, vals, pi) for p in sys.upper))
        lower = NumericField(*(_numeric_terms(p, vals, pi) for p in sys.lower))
    return NumericSystem(upper, lower, sys.manifold, bits)


def field_from_terms(f: Mapping[tuple[int, int], object], g: Mapping[tuple[int, int], object]) -> NumericField:
    return NumericField([(i, j, to_mpfr(c)) for (i, j), c in sorted(f.items())],
                        [(i, j, to_mpfr(c)) for (i, j), c in sorted(g.items())])
