"""Exact calculus on polynomials in theta, cos(theta) and sin(theta).

Every function is written in the canonical basis ``theta**m * cos**i * sin**s``
with ``s`` in {0, 1}; higher sine powers are reduced with
``sin**2 = 1 - cos**2``.  A ``TrigPoly`` keeps the two sine parities in two
dictionaries whose keys pack ``(m, i, parameter monomial)`` into one integer:
``m + (i << 16) + (monomial_key << 32)``.  The product of two parities is then

    (A0 + s*A1)(B0 + s*B1) = A0*B0 + A1*B1 - cos**2*A1*B1 + s*(A0*B1 + A1*B0)

so no per-term reduction is needed.

Antiderivatives go through the Fourier basis: ``cos**i * sin**s`` is expanded
into ``cos(a*theta)``/``sin(a*theta)``, integrated against ``theta**m`` by
parts and folded back with Chebyshev polynomials.  The resulting linear map
is cached per basis element.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb
from typing import Iterable, Mapping

from gmpy2 import mpq

from .algebra_core import (BITS, BiSeries, ParamPoly, Space, StructureError, _strip,
                           format_rational, is_scalar, to_rational)

MSHIFT = 0
ISHIFT = BITS
PSHIFT = 2 * BITS
TMASK = (1 << BITS) - 1
COS2 = 2 << ISHIFT

ANCHORS = {"0": 0, "pi": 1}
ENDPOINTS = ("0", "pi", "2pi")


def split_key(key: int) -> tuple[int, int, int]:
    """Return ``(m, i, monomial_key)`` of a packed trig key."""
    return key & TMASK, (key >> ISHIFT) & TMASK, key >> PSHIFT


def trig_key(m: int, i: int, pkey: int = 0) -> int:
    return m + (i << ISHIFT) + (pkey << PSHIFT)


def _acc(out: dict, a: dict, b: dict, shift: int = 0, sign: int = 1) -> None:
    get = out.get
    if len(a) < len(b):
        a, b = b, a
    if sign > 0:
        for kb, cb in b.items():
            kb += shift
            for ka, ca in a.items():
                k = ka + kb
                out[k] = get(k, 0) + ca * cb
    else:
        for kb, cb in b.items():
            kb += shift
            for ka, ca in a.items():
                k = ka + kb
                out[k] = get(k, 0) - ca * cb


class TrigPoly:
    """``even + sin(theta) * odd`` with packed-key dictionaries over a Space."""

    __slots__ = ("space", "even", "odd")

    def __init__(self, space: Space, even: dict | None = None, odd: dict | None = None):
        self.space = space
        self.even = even if even is not None else {}
        self.odd = odd if odd is not None else {}

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_poly(cls, poly: ParamPoly) -> "TrigPoly":
        return cls(poly.space, {k << PSHIFT: c for k, c in poly.terms.items()})

    @classmethod
    def monomial(cls, space: Space, m: int = 0, i: int = 0, j: int = 0, coeff=1) -> "TrigPoly":
        """``coeff * theta**m * cos**i * sin**j`` reduced to canonical form."""
        if isinstance(coeff, ParamPoly):
            base = cls.from_poly(coeff)
        else:
            base = cls(space, {0: to_rational(coeff)} if to_rational(coeff) else {})
        out = base._shift_trig(m, i)
        s = cls(space, {}, {0: mpq(1)})
        for _ in range(j):
            out = out * s
        return out

    @classmethod
    def cos(cls, space: Space) -> "TrigPoly":
        return cls(space, {1 << ISHIFT: mpq(1)})

    @classmethod
    def sin(cls, space: Space) -> "TrigPoly":
        return cls(space, {}, {0: mpq(1)})

    @classmethod
    def theta(cls, space: Space) -> "TrigPoly":
        return cls(space, {1: mpq(1)})

    def _shift_trig(self, m: int, i: int) -> "TrigPoly":
        d = m + (i << ISHIFT)
        return TrigPoly(self.space, {k + d: c for k, c in self.even.items()},
                        {k + d: c for k, c in self.odd.items()})

    # -- arithmetic --------------------------------------------------------
    def _coerce(self, other) -> "TrigPoly":
        if isinstance(other, TrigPoly):
            if other.space is not self.space:
                raise StructureError("trig polynomials over different spaces")
            return other
        if isinstance(other, ParamPoly):
            if other.space is not self.space:
                raise StructureError("trig polynomials over different spaces")
            return TrigPoly.from_poly(other)
        if is_scalar(other):
            q = to_rational(other)
            return TrigPoly(self.space, {0: q} if q else {})
        return NotImplemented

    def is_zero(self) -> bool:
        return not self.even and not self.odd

    def __bool__(self):
        return not self.is_zero()

    def copy(self) -> "TrigPoly":
        return TrigPoly(self.space, dict(self.even), dict(self.odd))

    def iadd(self, other: "TrigPoly", scale=None) -> None:
        """In-place ``self += scale * other`` (scale rational), zeros kept."""
        for mine, theirs in ((self.even, other.even), (self.odd, other.odd)):
            get = mine.get
            if scale is None:
                for k, c in theirs.items():
                    mine[k] = get(k, 0) + c
            else:
                for k, c in theirs.items():
                    mine[k] = get(k, 0) + scale * c

    def iadd_product(self, a: "TrigPoly", b: "TrigPoly") -> None:
        """In-place ``self += a * b`` (zeros kept until ``strip``)."""
        ev, od = self.even, self.odd
        if a.even and b.even:
            _acc(ev, a.even, b.even)
        if a.odd and b.odd:
            _acc(ev, a.odd, b.odd)
            _acc(ev, a.odd, b.odd, COS2, -1)
        if a.even and b.odd:
            _acc(od, a.even, b.odd)
        if a.odd and b.even:
            _acc(od, a.odd, b.even)

    def strip(self) -> "TrigPoly":
        self.even = _strip(self.even)
        self.odd = _strip(self.odd)
        return self

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        out = self.copy()
        out.iadd(o)
        return out.strip()

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly(self.space, {k: -c for k, c in self.even.items()},
                        {k: -c for k, c in self.odd.items()})

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        out = self.copy()
        out.iadd(o, -1)
        return out.strip()

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if is_scalar(other):
            q = to_rational(other)
            return TrigPoly(self.space, {k: c * q for k, c in self.even.items() if q},
                            {k: c * q for k, c in self.odd.items() if q})
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        out = TrigPoly(self.space)
        out.iadd_product(self, o)
        return out.strip()

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "TrigPoly":
        out = TrigPoly(self.space, {0: mpq(1)})
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return _strip(self.even) == _strip(o.even) and _strip(self.odd) == _strip(o.odd)

    __hash__ = None

    # -- calculus ----------------------------------------------------------
    def derivative(self) -> "TrigPoly":
        ev: dict = {}
        od: dict = {}
        for k, c in self.even.items():
            m, i, _ = split_key(k)
            if m:
                ev[k - 1] = ev.get(k - 1, 0) + c * m
            if i:
                kk = k - (1 << ISHIFT)
                od[kk] = od.get(kk, 0) - c * i
        for k, c in self.odd.items():
            m, i, _ = split_key(k)
            if m:
                od[k - 1] = od.get(k - 1, 0) + c * m
            if i:
                kk = k - (1 << ISHIFT)
                ev[kk] = ev.get(kk, 0) - c * i
            kk = k + (1 << ISHIFT)
            ev[kk] = ev.get(kk, 0) + c * (i + 1)
        return TrigPoly(self.space, _strip(ev), _strip(od))

    def antiderivative(self, anchor: str = "0") -> "TrigPoly":
        """Antiderivative vanishing at ``anchor`` (``"0"`` or ``"pi"``)."""
        a = ANCHORS[anchor]
        ev: dict = {}
        od: dict = {}
        for parity, src in ((0, self.even), (1, self.odd)):
            for k, c in src.items():
                m = k & TMASK
                i = (k >> ISHIFT) & TMASK
                for s_out, delta, q in _antiderivative_map(m, i, parity, a):
                    tgt = od if s_out else ev
                    kk = k + delta
                    tgt[kk] = tgt.get(kk, 0) + c * q
        return TrigPoly(self.space, _strip(ev), _strip(od))

    def at(self, point: str) -> ParamPoly:
        """Exact value at theta in {0, pi, 2pi}; theta powers become pi powers."""
        out: dict = {}
        for k, c in self.even.items():
            m = k & TMASK
            i = (k >> ISHIFT) & TMASK
            val = _point_value(m, i, point)
            if val is None:
                continue
            p, q = val
            pk = (k >> PSHIFT) + p
            out[pk] = out.get(pk, 0) + c * q
        return ParamPoly._raw(self.space, _strip(out))

    def integral(self, segment: tuple[str, str]) -> ParamPoly:
        lo, hi = segment
        return self.antiderivative(lo).at(hi)

    # -- inspection --------------------------------------------------------
    def items(self):
        """Yield ``(m, i, j, ParamPoly coefficient)``."""
        groups: dict[tuple, dict] = {}
        for j, src in ((0, self.even), (1, self.odd)):
            for k, c in src.items():
                if not c:
                    continue
                m, i, pk = split_key(k)
                groups.setdefault((m, i, j), {})[pk] = c
        for (m, i, j), d in sorted(groups.items()):
            yield m, i, j, ParamPoly._raw(self.space, d)

    def max_theta_power(self) -> int:
        return max((k & TMASK for d in (self.even, self.odd) for k in d), default=0)

    def size(self) -> int:
        return len(self.even) + len(self.odd)

    def evaluate(self, theta, values: Mapping, pi=None):
        """Numeric value at a numeric theta (mpfr or mpmath) for testing."""
        import gmpy2
        c, s = gmpy2.cos(theta), gmpy2.sin(theta)
        total = 0
        for m, i, j, coef in self.items():
            total += coef.evaluate(values, pi) * theta**m * c**i * s**j
        return total

    def to_text(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for m, i, j, coef in self.items():
            basis = "*".join(f for f in (f"theta^{m}" if m else "", f"cos^{i}" if i else "",
                                          "sin^1" if j else "") if f) or "1"
            parts.append(f"({coef.to_text()})*{basis}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"TrigPoly({self.to_text()})"


# ---------------------------------------------------------------------------
# cached linear maps


@lru_cache(maxsize=None)
def _chebyshev_t(a: int) -> tuple[mpq, ...]:
    """Coefficients of T_a in powers of cos."""
    if a == 0:
        return (mpq(1),)
    if a == 1:
        return (mpq(0), mpq(1))
    t1 = _chebyshev_t(a - 1)
    t2 = _chebyshev_t(a - 2)
    out = [mpq(0)] * (a + 1)
    for k, c in enumerate(t1):
        out[k + 1] += 2 * c
    for k, c in enumerate(t2):
        out[k] -= c
    return tuple(out)


@lru_cache(maxsize=None)
def _chebyshev_u(a: int) -> tuple[mpq, ...]:
    """Coefficients of U_a in powers of cos (sin((a+1)t) = sin t * U_a(cos t))."""
    if a == 0:
        return (mpq(1),)
    if a == 1:
        return (mpq(0), mpq(2))
    u1 = _chebyshev_u(a - 1)
    u2 = _chebyshev_u(a - 2)
    out = [mpq(0)] * (a + 1)
    for k, c in enumerate(u1):
        out[k + 1] += 2 * c
    for k, c in enumerate(u2):
        out[k] -= c
    return tuple(out)


@lru_cache(maxsize=None)
def _fourier(i: int, s: int) -> dict[tuple[str, int], mpq]:
    """cos**i * sin**s as a combination of cos(a t) and sin(a t)."""
    cosine: dict[int, mpq] = {}
    for k in range(i + 1):
        a = abs(i - 2 * k)
        cosine[a] = cosine.get(a, mpq(0)) + mpq(comb(i, k), 2**i)
    if not s:
        return {("c", a): c for a, c in cosine.items() if c}
    out: dict[tuple[str, int], mpq] = {}
    for a, c in cosine.items():
        # cos(a t) sin t = (sin((a+1) t) - sin((a-1) t)) / 2
        out[("s", a + 1)] = out.get(("s", a + 1), mpq(0)) + c / 2
        if a - 1 > 0:
            out[("s", a - 1)] = out.get(("s", a - 1), mpq(0)) - c / 2
        elif a - 1 < 0:
            out[("s", 1)] = out.get(("s", 1), mpq(0)) + c / 2
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _integrate_fourier(m: int, kind: str, a: int) -> dict[tuple[int, str, int], mpq]:
    """Antiderivative of theta**m * trig(a theta) in the same basis (no constant)."""
    if a == 0:
        if kind == "s":
            return {}
        return {(m + 1, "c", 0): mpq(1, m + 1)}
    out: dict[tuple[int, str, int], mpq] = {}
    if kind == "c":
        out[(m, "s", a)] = mpq(1, a)
        if m:
            for key, c in _integrate_fourier(m - 1, "s", a).items():
                out[key] = out.get(key, mpq(0)) - mpq(m, a) * c
    else:
        out[(m, "c", a)] = mpq(-1, a)
        if m:
            for key, c in _integrate_fourier(m - 1, "c", a).items():
                out[key] = out.get(key, mpq(0)) + mpq(m, a) * c
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _antiderivative_map(m: int, i: int, s: int, anchor: int) -> tuple[tuple[int, int, mpq], ...]:
    """Linear map for theta**m cos**i sin**s -> list of (sin parity, key delta, coefficient).

    The key delta moves the trig part from (m, i) to the output basis and
    adds the pi power of the anchoring constant.
    """
    acc: dict[tuple[int, int, int, int], mpq] = {}

    def add(mm, ii, ss, p, c):
        key = (mm, ii, ss, p)
        acc[key] = acc.get(key, mpq(0)) + c

    for (kind, a), c in _fourier(i, s).items():
        for (mm, kk, aa), cc in _integrate_fourier(m, kind, a).items():
            coef = c * cc
            if kk == "c":
                for ii, t in enumerate(_chebyshev_t(aa)):
                    if t:
                        add(mm, ii, 0, 0, coef * t)
                # constant of integration
                if anchor == 0:
                    if mm == 0:
                        add(0, 0, 0, 0, -coef)
                else:
                    add(0, 0, 0, mm, -coef * (-1) ** aa)
            else:
                for ii, u in enumerate(_chebyshev_u(aa - 1)):
                    if u:
                        add(mm, ii, 1, 0, coef * u)
    base = m + (i << ISHIFT)
    out = []
    for (mm, ii, ss, p), c in sorted(acc.items()):
        if c:
            out.append((ss, mm + (ii << ISHIFT) - base + (p << PSHIFT), c))
    return tuple(out)


@lru_cache(maxsize=None)
def _point_value(m: int, i: int, point: str):
    """Value of theta**m cos**i at a segment endpoint as (pi power, rational)."""
    if point == "0":
        return (0, mpq(1)) if m == 0 else None
    if point == "pi":
        return (m, mpq((-1) ** i))
    if point == "2pi":
        return (m, mpq(2**m))
    raise ValueError(f"unknown endpoint {point!r}")


# ---------------------------------------------------------------------------
# graded series of trig polynomials


class ThetaSeries:
    """Trig polynomials graded by (xi power, eps power), i.e. coefficients in a BiSeries."""

    __slots__ = ("space", "order_xi", "order_eps", "layers")

    def __init__(self, space: Space, order_xi: int, order_eps: int,
                 layers: Mapping[tuple[int, int], TrigPoly] | None = None):
        self.space = space
        self.order_xi = order_xi
        self.order_eps = order_eps
        self.layers = {k: v for k, v in (layers or {}).items()
                       if k[0] < order_xi and k[1] < order_eps and not v.is_zero()}

    @classmethod
    def from_terms(cls, space: Space, order_xi: int, order_eps: int,
                   terms: Iterable[tuple[int, int, int, BiSeries]]) -> "ThetaSeries":
        layers: dict[tuple[int, int], TrigPoly] = {}
        for m, i, j, coeff in terms:
            for grade, c in coeff.terms.items():
                t = TrigPoly.monomial(space, m, i, j, c)
                layers[grade] = layers[grade] + t if grade in layers else t
        return cls(space, order_xi, order_eps, layers)

    def _like(self, layers) -> "ThetaSeries":
        return ThetaSeries(self.space, self.order_xi, self.order_eps, layers)

    def __add__(self, other: "ThetaSeries") -> "ThetaSeries":
        out = dict(self.layers)
        for g, t in other.layers.items():
            out[g] = out[g] + t if g in out else t
        return self._like(out)

    def __neg__(self):
        return self._like({g: -t for g, t in self.layers.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "ThetaSeries") -> "ThetaSeries":
        out: dict[tuple[int, int], TrigPoly] = {}
        for (i1, k1), a in self.layers.items():
            for (i2, k2), b in other.layers.items():
                g = (i1 + i2, k1 + k2)
                if g[0] >= self.order_xi or g[1] >= self.order_eps:
                    continue
                out.setdefault(g, TrigPoly(self.space)).iadd_product(a, b)
        return self._like({g: t.strip() for g, t in out.items()})

    def __eq__(self, other):
        if not isinstance(other, ThetaSeries):
            return NotImplemented
        keys = set(self.layers) | set(other.layers)
        z = TrigPoly(self.space)
        return all(self.layers.get(k, z) == other.layers.get(k, z) for k in keys)

    __hash__ = None

    def terms(self) -> list[tuple[int, int, int, BiSeries]]:
        groups: dict[tuple, dict] = {}
        for g, t in self.layers.items():
            for m, i, j, c in t.items():
                groups.setdefault((m, i, j), {})[g] = c
        return [(m, i, j, BiSeries(self.space, self.order_xi, self.order_eps, d))
                for (m, i, j), d in sorted(groups.items())]

    def derivative(self) -> "ThetaSeries":
        return self._like({g: t.derivative() for g, t in self.layers.items()})


def antiderivative(f, anchor: str = "0"):
    """Termwise antiderivative vanishing at the segment start (0 or pi)."""
    if isinstance(f, TrigPoly):
        return f.antiderivative(anchor)
    return f._like({g: t.antiderivative(anchor) for g, t in f.layers.items()})


def definite_integral(f, segment: tuple[str, str] = ("0", "pi")):
    """Exact integral over ``[0, pi]`` or ``[pi, 2pi]`` (endpoints as strings)."""
    if tuple(segment) not in (("0", "pi"), ("pi", "2pi"), ("0", "2pi")):
        raise ValueError(f"unsupported segment {segment!r}")
    if isinstance(f, TrigPoly):
        return f.integral(tuple(segment))
    return BiSeries(f.space, f.order_xi, f.order_eps,
                    {g: t.integral(tuple(segment)) for g, t in f.layers.items()})
