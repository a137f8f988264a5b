"""Positive-root isolation for truncated displacement polynomials.

Brackets come from Descartes' rule of signs applied exactly to rational
images of the polynomial on each subinterval (Moebius map onto (0, inf)),
then every bracket is certified by the same test on the derivative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
from gmpy2 import mpfr, mpq

from ..algebra_core import format_rational, to_rational


class PrecisionEscalationError(Exception):
    """Roots too close to separate at the requested precision."""

    def __init__(self, message: str, interval: tuple[mpq, mpq]):
        super().__init__(message)
        self.interval = interval


@dataclass
class DisplacementPoly:
    """``d(xi) = sum_j V_j xi**j``; ``guard`` is the xi-order of the neglected remainder."""

    coeffs: list
    guard: int | None = None
    exact: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.q = [_as_mpq(c) for c in self.coeffs]
        while len(self.q) > 1 and self.q[-1] == 0:
            self.q.pop()

    @property
    def degree(self) -> int:
        return len(self.q) - 1

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


def _as_mpq(c) -> mpq:
    if isinstance(c, (mpq, int, Fraction)):
        return mpq(c)
    if isinstance(c, str):
        return to_rational(c)
    if isinstance(c, type(mpfr(0))):
        return mpq(c)
    if isinstance(c, mpmath.mpf):
        m, e = c.man_exp
        return mpq(int(m)) * mpq(2) ** e if e >= 0 else mpq(int(m), 2 ** (-e))
    if isinstance(c, float):
        raise TypeError("binary floats are not accepted")
    return mpq(c)


def _taylor_shift(p: list[mpq], a: mpq) -> list[mpq]:
    """Coefficients of p(x + a)."""
    q = list(p)
    n = len(q)
    for i in range(n):
        for k in range(n - 2, i - 1, -1):
            q[k] += a * q[k + 1]
    return q


def _variations(p: list[mpq]) -> int:
    signs = [c > 0 for c in p if c != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _scale(p: list[mpq], a: mpq, b: mpq) -> list[mpq]:
    """Coefficients in t of p(a + (b - a) t)."""
    q = _taylor_shift(p, a)
    w = b - a
    return [c * w**k for k, c in enumerate(q)]


def _count(p: list[mpq], a: mpq, b: mpq) -> int:
    q = list(reversed(_scale(p, a, b)))
    return _variations(_taylor_shift(q, mpq(1)))


def _eval(p: list[mpq], x: mpq) -> mpq:
    acc = mpq(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _isolate(p: list[mpq], a: mpq, b: mpq, min_width: mpq) -> list[tuple[mpq, mpq]]:
    out = []
    stack = [(a, b)]
    while stack:
        lo, hi = stack.pop()
        v = _count(p, lo, hi)
        if v == 0:
            continue
        if v == 1:
            out.append((lo, hi))
            continue
        if hi - lo < min_width:
            raise PrecisionEscalationError("root cluster below the working resolution", (lo, hi))
        mid = (lo + hi) / 2
        if _eval(p, mid) == 0:
            out.append((mid, mid))
            stack.append((lo, mid - (hi - lo) / 2**20))
            stack.append((mid + (hi - lo) / 2**20, hi))
            continue
        stack.append((mid, hi))
        stack.append((lo, mid))
    return sorted(out)


def _safe_newton(f, df, lo, hi, tol):
    """Newton steps kept inside a sign-changing bracket, bisecting when they leave it."""
    flo = f(lo)
    x = (lo + hi) / 2
    for _ in range(400):
        fx = f(x)
        if fx == 0:
            return x
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
        else:
            hi = x
        d = df(x)
        nx = x - fx / d if d else (lo + hi) / 2
        if not lo < nx < hi:
            nx = (lo + hi) / 2
        if abs(nx - x) <= tol * abs(nx):
            return nx
        x = nx
    return x


@dataclass
class Root:
    value: mpmath.mpf
    bracket: tuple[mpq, mpq]
    residual: mpmath.mpf
    certified: bool

    def to_json_dict(self, digits: int = 20) -> dict:
        return {"value": mpmath.nstr(self.value, digits), "bracket": [format_rational(self.bracket[0]),
                                                                      format_rational(self.bracket[1])],
                "bracket_decimal": [mpmath.nstr(mpmath.mpf(self.bracket[0].numerator) / self.bracket[0].denominator, 12),
                                    mpmath.nstr(mpmath.mpf(self.bracket[1].numerator) / self.bracket[1].denominator, 12)],
                "residual": mpmath.nstr(self.residual, 5), "certified": self.certified}


def displacement_roots(poly: DisplacementPoly | Sequence, domain: tuple = (0, "1/100"), bits: int = 256,
                       rel_tol=None) -> list[Root]:
    """Positive simple roots of ``poly`` in ``domain``.

    Each bracket holds exactly one sign variation of the polynomial and none
    of its derivative, so the root in it exists, is simple and unique.
    """
    if not isinstance(poly, DisplacementPoly):
        poly = DisplacementPoly(list(poly))
    p = poly.q
    a, b = _as_mpq(domain[0]), _as_mpq(domain[1])
    if not b > a:
        raise ValueError("empty domain")
    if all(c == 0 for c in p):
        raise ValueError("zero polynomial")
    dp = [k * c for k, c in enumerate(p)][1:]
    min_width = (b - a) / mpq(2) ** (bits - 8)
    brackets = _isolate(p, a, b, min_width)
    roots = []
    with mpmath.workprec(bits):
        tol = mpmath.mpf(rel_tol) if rel_tol is not None else mpmath.mpf(2) ** (-bits + 16)
        mp_p = [mpmath.mpf(c.numerator) / c.denominator for c in p]

        def f(x):
            return mpmath.polyval(list(reversed(mp_p)), x)

        mp_dp = [k * c for k, c in enumerate(mp_p)][1:]

        def df(x):
            return mpmath.polyval(list(reversed(mp_dp)), x) if mp_dp else mpmath.mpf(0)

        for lo, hi in brackets:
            # tighten until the derivative has no sign variation on the bracket
            certified = not dp or _count(dp, lo, hi) == 0
            while not certified and hi - lo > min_width:
                mid = (lo + hi) / 2
                if _eval(p, mid) == 0:
                    lo = hi = mid
                    certified = True
                    break
                if (_eval(p, lo) > 0) != (_eval(p, mid) > 0):
                    hi = mid
                else:
                    lo = mid
                certified = _count(dp, lo, hi) == 0
            if not certified:
                raise PrecisionEscalationError("could not certify a simple root", (lo, hi))
            x0 = mpmath.mpf(lo.numerator) / lo.denominator
            x1 = mpmath.mpf(hi.numerator) / hi.denominator
            r = x0 if x0 == x1 else _safe_newton(f, df, x0, x1, tol)
            roots.append(Root(r, (lo, hi), abs(f(r)), True))
    return roots
