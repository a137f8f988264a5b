"""Exact coefficient arithmetic.

Everything symbolic in the package is built from four value types:

``ParamPoly``
    A Laurent polynomial in named parameters with coefficients in Q[pi].
    pi is kept as a free symbol with its own exponent slot, so ``pi**2 * pi``
    is ``pi**3`` and never a float.
``ParamRational``
    A quotient ``num / (f1**m1 * f2**m2 ...)`` whose denominator is kept as a
    list of primitive, non-monomial factors.  Constant and monomial parts of
    a denominator are absorbed into the (Laurent) numerator.
``PiPoly``
    The coefficient of a single parameter monomial: a polynomial in pi.
``BiSeries``
    A truncated power series in the grading symbols xi and eps.

Monomials are packed into a single Python integer: slot ``f`` of the key
holds a signed 16 bit exponent scaled by ``2**(16*f)``.  Slot 0 is the pi
exponent and slot ``i+1`` the exponent of the i-th variable.  Multiplying
monomials is then integer addition of keys.

>>> S = Space(["x", "y"])
>>> x, y = S.var("x"), S.var("y")
>>> ((x + y) * (x - y)).to_text()
'1*x^2 - 1*y^2'
>>> (S.pi() ** 2 * S.pi()).to_text()
'1*pi^3'
"""
from __future__ import annotations

import ast
import math
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union

import gmpy2
from gmpy2 import mpq, mpz

BITS = 16
BASE = 1 << BITS
HALF = 1 << (BITS - 1)
MASK = BASE - 1


class AlgebraError(Exception):
    """Base class for exact-arithmetic failures."""


class StructureError(AlgebraError):
    """Operands live in different variable spaces or truncation orders."""


class SingularSeriesError(AlgebraError):
    """A series has no compositional or multiplicative inverse."""


class SingularSubstitutionError(AlgebraError):
    """A substitution would divide by the zero polynomial."""


class NotPolynomialError(AlgebraError):
    """A rational value was requested as a polynomial but has a denominator."""


Number = Union[int, mpq, Fraction, str]


def to_rational(value) -> mpq:
    """Convert ints, Fractions, mpq and exact strings ("3/4", "1.5e-3") to mpq.

    Binary floats are rejected so nothing inexact leaks into the exact
    pipeline.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, type(mpz(0)))):
        return mpq(value)
    if isinstance(value, type(mpq(0))):
        return value
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        f = Fraction(value.strip())
        return mpq(f.numerator, f.denominator)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def is_scalar(value) -> bool:
    return isinstance(value, (int, Fraction, type(mpq(0)), type(mpz(0)))) and not isinstance(value, bool)


def format_rational(q: mpq) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def pack(exps: Iterable[int]) -> int:
    key = 0
    for e in reversed(tuple(exps)):
        if not -HALF <= e < HALF:
            raise OverflowError(f"exponent {e} does not fit in a {BITS} bit slot")
        key = key * BASE + e
    return key


def unpack(key: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        e = key & MASK
        if e >= HALF:
            e -= BASE
        out.append(e)
        key = (key - e) >> BITS
    if key:
        raise OverflowError("monomial key has more slots than the space")
    return tuple(out)


# ---------------------------------------------------------------------------
# spaces


class Space:
    """An ordered list of parameter names; every polynomial belongs to one.

    Spaces are interned, so two spaces with the same names are the same
    object and comparing them is cheap.
    """

    _interned: dict = {}
    __slots__ = ("names", "index", "__weakref__")

    def __new__(cls, names: Iterable[str]):
        names = tuple(names)
        hit = cls._interned.get(names)
        if hit is not None:
            return hit
        if len(set(names)) != len(names):
            raise StructureError(f"duplicate variable names in {names}")
        for n in names:
            if not n.isidentifier() or n == "pi":
                raise StructureError(f"invalid variable name {n!r}")
        self = super().__new__(cls)
        self.names = names
        self.index = {n: i for i, n in enumerate(names)}
        cls._interned[names] = self
        return self

    def __reduce__(self):
        return (Space, (self.names,))

    def __repr__(self) -> str:
        return f"Space({list(self.names)!r})"

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def var_key(self, name: str) -> int:
        try:
            return 1 << (BITS * (self.index[name] + 1))
        except KeyError:
            raise StructureError(f"{name!r} is not a variable of {self!r}") from None

    def encode(self, pi: int, exps: Iterable[int]) -> int:
        return pack((pi, *exps))

    def decode(self, key: int) -> tuple[int, tuple[int, ...]]:
        v = unpack(key, len(self.names) + 1)
        return v[0], v[1:]

    def monomial_key(self, pi: int = 0, **exps: int) -> int:
        key = pi
        for name, e in exps.items():
            key += e * self.var_key(name)
        return key

    def zero(self) -> "ParamPoly":
        return ParamPoly._raw(self, {})

    def one(self) -> "ParamPoly":
        return ParamPoly._raw(self, {0: mpq(1)})

    def const(self, c) -> "ParamPoly":
        q = to_rational(c)
        return ParamPoly._raw(self, {0: q} if q else {})

    def var(self, name: str) -> "ParamPoly":
        return ParamPoly._raw(self, {self.var_key(name): mpq(1)})

    def vars(self, *names: str) -> list["ParamPoly"]:
        return [self.var(n) for n in names]

    def pi(self, power: int = 1) -> "ParamPoly":
        return ParamPoly._raw(self, {power: mpq(1)})

    def monomial(self, coeff=1, pi: int = 0, **exps: int) -> "ParamPoly":
        q = to_rational(coeff)
        return ParamPoly._raw(self, {self.monomial_key(pi, **exps): q} if q else {})

    def from_exponents(self, terms: Mapping[tuple, Number]) -> "ParamPoly":
        """Build from ``{(pi_exp, e1, ..., en): coeff}``."""
        out: dict[int, mpq] = {}
        for exps, c in terms.items():
            if len(exps) != len(self.names) + 1:
                raise StructureError("exponent vector length does not match the space")
            q = to_rational(c)
            if q:
                k = pack(exps)
                out[k] = out.get(k, mpq(0)) + q
        return ParamPoly(self, out)

    def extend(self, names: Iterable[str]) -> "Space":
        extra = [n for n in names if n not in self.index]
        return Space(self.names + tuple(extra))

    def parse(self, text: str) -> "ParamRational":
        """Parse an arithmetic expression over this space.

        Accepts numbers (integers, decimals, ``n/d``), names, ``pi``, the
        operators ``+ - * /`` and integer powers written ``^`` or ``**``.
        """
        return _parse_expr(self, text)

    def parse_poly(self, text: str) -> "ParamPoly":
        return self.parse(text).as_poly()


# ---------------------------------------------------------------------------
# polynomials in pi


class PiPoly:
    """A polynomial in pi with rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[int, Number] | None = None):
        self.coeffs = {}
        for e, c in (coeffs or {}).items():
            if e < 0:
                raise ValueError("PiPoly exponents are nonnegative")
            q = to_rational(c)
            if q:
                self.coeffs[int(e)] = q

    @classmethod
    def pi(cls, power: int = 1) -> "PiPoly":
        return cls({power: 1})

    def _coerce(self, other) -> "PiPoly":
        if isinstance(other, PiPoly):
            return other
        if is_scalar(other):
            return PiPoly({0: other})
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, mpq(0)) + c
        return PiPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return PiPoly({e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict[int, mpq] = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                out[e1 + e2] = out.get(e1 + e2, mpq(0)) + c1 * c2
        return PiPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = PiPoly({0: 1})
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def is_zero(self) -> bool:
        return not self.coeffs

    def evaluate(self, pi_value):
        return sum((c * pi_value**e for e, c in self.coeffs.items()), mpq(0))

    def __repr__(self) -> str:
        if not self.coeffs:
            return "PiPoly(0)"
        parts = [f"{format_rational(c)}*pi^{e}" if e else format_rational(c)
                 for e, c in sorted(self.coeffs.items(), reverse=True)]
        return "PiPoly(" + " + ".join(parts) + ")"


# ---------------------------------------------------------------------------
# Laurent polynomials over Q[pi]


def _add_into(out: dict, terms: dict, scale=None, shift: int = 0) -> None:
    get = out.get
    if scale is None:
        for k, c in terms.items():
            k += shift
            out[k] = get(k, 0) + c
    else:
        for k, c in terms.items():
            k += shift
            out[k] = get(k, 0) + scale * c


def _strip(d: dict) -> dict:
    return {k: v for k, v in d.items() if v}


def dict_mul(a: dict, b: dict) -> dict:
    """Product of two packed-key dictionaries (zeros stripped)."""
    if len(a) < len(b):
        a, b = b, a
    out: dict = {}
    get = out.get
    for kb, cb in b.items():
        for ka, ca in a.items():
            k = ka + kb
            out[k] = get(k, 0) + ca * cb
    return _strip(out)


class ParamPoly:
    """Laurent polynomial in the variables of a ``Space`` with Q[pi] coefficients."""

    __slots__ = ("space", "terms")

    def __init__(self, space: Space, terms: Mapping[int, Number] | None = None):
        self.space = space
        clean = {}
        for k, c in (terms or {}).items():
            q = to_rational(c)
            if q:
                clean[k] = q
        self.terms = clean

    @classmethod
    def _raw(cls, space: Space, terms: dict) -> "ParamPoly":
        self = object.__new__(cls)
        self.space = space
        self.terms = terms
        return self

    # -- coercion ----------------------------------------------------------
    def _other(self, other):
        if isinstance(other, ParamPoly):
            if other.space is not self.space:
                raise StructureError(f"variable lists differ: {self.space.names} vs {other.space.names}")
            return other
        if is_scalar(other):
            return self.space.const(other)
        return None

    # -- ring operations ---------------------------------------------------
    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        out = dict(self.terms)
        _add_into(out, o.terms)
        return ParamPoly._raw(self.space, _strip(out))

    __radd__ = __add__

    def __neg__(self):
        return ParamPoly._raw(self.space, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        out = dict(self.terms)
        _add_into(out, o.terms, scale=-1)
        return ParamPoly._raw(self.space, _strip(out))

    def __rsub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        if is_scalar(other):
            q = to_rational(other)
            if not q:
                return self.space.zero()
            return ParamPoly._raw(self.space, {k: c * q for k, c in self.terms.items()})
        o = self._other(other)
        if o is None:
            return NotImplemented
        return ParamPoly._raw(self.space, dict_mul(self.terms, o.terms))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            if not self.is_monomial():
                raise NotPolynomialError("negative powers need a monomial base")
            (k, c), = self.terms.items()
            return ParamPoly._raw(self.space, {k * n: c**n})
        result = self.space.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __truediv__(self, other):
        if is_scalar(other):
            q = to_rational(other)
            if not q:
                raise ZeroDivisionError("division by zero")
            return ParamPoly._raw(self.space, {k: c / q for k, c in self.terms.items()})
        if isinstance(other, ParamPoly):
            o = self._other(other)
            if o.is_monomial():
                (k, c), = o.terms.items()
                return ParamPoly._raw(self.space, {kk - k: cc / c for kk, cc in self.terms.items()})
            return ParamRational(self, o)
        if isinstance(other, ParamRational):
            return ParamRational(self) / other
        return NotImplemented

    def __rtruediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o / self

    def __eq__(self, other):
        if isinstance(other, ParamRational):
            return other == self
        if isinstance(other, ParamPoly):
            return self.space is other.space and self.terms == other.terms
        if is_scalar(other):
            q = to_rational(other)
            if not q:
                return not self.terms
            return self.terms == {0: q}
        return NotImplemented

    def __hash__(self):
        return hash((self.space.names, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    # -- inspection --------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and 0 in self.terms)

    def constant_value(self) -> mpq:
        if not self.is_constant():
            raise ValueError("polynomial is not a rational constant")
        return self.terms.get(0, mpq(0))

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def has_pi(self) -> bool:
        return any(p for p, _, _ in self.exponent_items())

    def exponent_items(self) -> Iterator[tuple[int, tuple[int, ...], mpq]]:
        dec = self.space.decode
        for k, c in self.terms.items():
            p, e = dec(k)
            yield p, e, c

    def as_exponent_dict(self) -> dict[tuple, mpq]:
        return {(p, *e): c for p, e, c in self.exponent_items()}

    def pipoly_terms(self) -> dict[tuple[int, ...], PiPoly]:
        """Grouped view: parameter exponent vector -> PiPoly."""
        out: dict[tuple, dict] = {}
        for p, e, c in self.exponent_items():
            out.setdefault(e, {})[p] = c
        return {e: PiPoly(d) for e, d in out.items()}

    def variables(self) -> list[str]:
        used = set()
        for _, e, _ in self.exponent_items():
            used.update(i for i, x in enumerate(e) if x)
        return [self.space.names[i] for i in sorted(used)]

    def degree(self, name: str) -> int:
        i = self.space.index[name]
        return max((e[i] for _, e, _ in self.exponent_items()), default=0)

    def min_degree(self, name: str) -> int:
        i = self.space.index[name]
        return min((e[i] for _, e, _ in self.exponent_items()), default=0)

    def collect(self, name: str) -> dict[int, "ParamPoly"]:
        """Split into powers of ``name``: ``{power: coefficient}``."""
        i = self.space.index[name]
        vk = self.space.var_key(name)
        out: dict[int, dict] = {}
        for k, c in self.terms.items():
            _, e = self.space.decode(k)
            out.setdefault(e[i], {})[k - e[i] * vk] = c
        return {p: ParamPoly._raw(self.space, d) for p, d in out.items()}

    def coefficient(self, name: str, power: int) -> "ParamPoly":
        return self.collect(name).get(power, self.space.zero())

    def pi_collect(self) -> dict[int, "ParamPoly"]:
        out: dict[int, dict] = {}
        for k, c in self.terms.items():
            p, _ = self.space.decode(k)
            out.setdefault(p, {})[k - p] = c
        return {p: ParamPoly._raw(self.space, d) for p, d in out.items()}

    def diff(self, name: str) -> "ParamPoly":
        vk = self.space.var_key(name)
        i = self.space.index[name]
        out = {}
        for k, c in self.terms.items():
            _, e = self.space.decode(k)
            if e[i]:
                out[k - vk] = c * e[i]
        return ParamPoly._raw(self.space, out)

    def content(self) -> mpq:
        """Positive rational content (gcd of numerators over lcm of denominators)."""
        if not self.terms:
            return mpq(0)
        g = mpz(0)
        l = mpz(1)
        for c in self.terms.values():
            g = gmpy2.gcd(g, c.numerator)
            l = gmpy2.lcm(l, c.denominator)
        return mpq(g, l)

    def min_exponents(self) -> tuple[int, tuple[int, ...]]:
        items = list(self.exponent_items())
        if not items:
            return 0, (0,) * len(self.space)
        pmin = min(p for p, _, _ in items)
        emin = tuple(min(e[i] for _, e, _ in items) for i in range(len(self.space)))
        return pmin, emin

    def leading_exponent(self) -> tuple[int, ...]:
        """Lexicographically greatest (e1, ..., en, pi) exponent vector."""
        return max((*e, p) for p, e, _ in self.exponent_items())

    def leading_coefficient(self) -> mpq:
        lead = self.leading_exponent()
        key = self.space.encode(lead[-1], lead[:-1])
        return self.terms[key]

    def primitive(self) -> tuple[mpq, int, "ParamPoly"]:
        """Split as ``content * monomial * primitive``.

        The primitive part has coprime integer coefficients, no monomial
        factor (also none in pi) and a positive leading coefficient.
        Returns ``(signed content, monomial key, primitive)``.
        """
        if not self.terms:
            raise ZeroDivisionError("zero polynomial has no primitive part")
        c = self.content()
        p, e = self.min_exponents()
        mk = self.space.encode(p, e)
        prim = ParamPoly._raw(self.space, {k - mk: v / c for k, v in self.terms.items()})
        if prim.leading_coefficient() < 0:
            c = -c
            prim = -prim
        return c, mk, prim

    # -- substitution and evaluation --------------------------------------
    def subs(self, bindings: Mapping[str, object]) -> "ParamRational":
        return substitute(self, bindings)

    def subs_poly(self, bindings: Mapping[str, object]) -> "ParamPoly":
        return substitute(self, bindings).as_poly()

    def evaluate(self, values: Mapping[str, object], pi=None):
        """Numeric value given every used variable.

        With rational values and no pi the result is an exact mpq; otherwise
        ``pi`` must be supplied (e.g. an mpfr) and the arithmetic follows its
        type.
        """
        names = self.space.names
        vals = []
        for n in names:
            v = values.get(n)
            vals.append(to_rational(v) if is_scalar(v) or isinstance(v, str) else v)
        total = mpq(0)
        for p, e, c in self.exponent_items():
            term = c
            if p:
                if pi is None:
                    raise ValueError("pi value required")
                term = term * pi**p
            for i, ex in enumerate(e):
                if ex:
                    v = vals[i]
                    if v is None:
                        raise KeyError(f"no value for {names[i]!r}")
                    term = term * v**ex
            total = total + term
        return total

    def lift(self, space: Space) -> "ParamPoly":
        """Re-express in a space whose names include all used variables."""
        if space is self.space:
            return self
        out = {}
        for p, e, c in self.exponent_items():
            ex = [0] * len(space)
            for i, x in enumerate(e):
                if x:
                    if self.space.names[i] not in space.index:
                        raise StructureError(f"{self.space.names[i]!r} missing from target space")
                    ex[space.index[self.space.names[i]]] = x
            out[space.encode(p, ex)] = c
        return ParamPoly._raw(space, out)

    # -- text --------------------------------------------------------------
    def sorted_items(self) -> list[tuple[int, tuple[int, ...], mpq]]:
        items = list(self.exponent_items())
        items.sort(key=lambda t: (-sum(abs(x) for x in t[1]), tuple(-x for x in t[1]), -t[0]))
        return items

    def to_text(self) -> str:
        """Canonical serialization: sorted monomials, explicit exponents."""
        if not self.terms:
            return "0"
        names = self.space.names
        out = []
        for p, e, c in self.sorted_items():
            factors = [format_rational(abs(c))]
            if p:
                factors.append(f"pi^{p}")
            factors.extend(f"{names[i]}^{x}" for i, x in enumerate(e) if x)
            body = "*".join(factors)
            if not out:
                out.append(("-" if c < 0 else "") + body)
            else:
                out.append((" - " if c < 0 else " + ") + body)
        return "".join(out)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"ParamPoly({self.to_text()!r})"


def divide_exact(a: ParamPoly, b: ParamPoly) -> ParamPoly | None:
    """Return ``q`` with ``a == b*q`` if it exists in the Laurent ring, else None."""
    if b.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if a.is_zero():
        return a.space.zero()
    space = a.space
    n = len(space) + 1
    pa, ea = a.min_exponents()
    pb, eb = b.min_exponents()
    sa = space.encode(pa, ea)
    sb = space.encode(pb, eb)

    def vecs(poly: ParamPoly, shift: int) -> dict[tuple, mpq]:
        out = {}
        for k, c in poly.terms.items():
            v = unpack(k - shift, n)
            out[v[1:] + v[:1]] = c
        return out

    rem = vecs(a, sa)
    div = vecs(b, sb)
    lead = max(div)
    lead_c = div[lead]
    quot: dict[tuple, mpq] = {}
    while rem:
        top = max(rem)
        diff = tuple(x - y for x, y in zip(top, lead))
        if min(diff) < 0:
            return None
        c = rem[top] / lead_c
        quot[diff] = c
        for v, dc in div.items():
            w = tuple(x + y for x, y in zip(v, diff))
            r = rem.get(w, 0) - c * dc
            if r:
                rem[w] = r
            else:
                rem.pop(w, None)
    shift = sa - sb
    out = {}
    for v, c in quot.items():
        out[pack(v[-1:] + v[:-1]) + shift] = c
    return ParamPoly._raw(space, out)


# ---------------------------------------------------------------------------
# quotients


def _factor_key(f: ParamPoly) -> tuple:
    return tuple(sorted(f.terms.items()))


class ParamRational:
    """``num / prod(f_i ** m_i)`` with primitive non-monomial factors ``f_i``.

    Equality is decided by cross-multiplication, so two values are equal
    exactly when they agree as rational functions.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        if isinstance(num, ParamRational):
            base = num
            if den is not None:
                base = base / den
            self.num, self.den = base.num, base.den
            return
        if not isinstance(num, ParamPoly):
            raise TypeError("ParamRational numerator must be a ParamPoly")
        self.num = num
        self.den = ()
        if den is None:
            return
        if is_scalar(den):
            self.num = num / den
            return
        if isinstance(den, ParamRational):
            r = ParamRational(num) / den
            self.num, self.den = r.num, r.den
            return
        if den.space is not num.space:
            raise StructureError("numerator and denominator spaces differ")
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        c, mk, prim = den.primitive()
        scaled = ParamPoly._raw(num.space, {k - mk: v / c for k, v in num.terms.items()})
        self.num = scaled
        if not prim.is_constant():
            self.den = ((prim, 1),)
            self._cancel()

    @classmethod
    def _make(cls, num: ParamPoly, den: tuple) -> "ParamRational":
        self = object.__new__(cls)
        self.num = num
        self.den = den
        self._cancel()
        return self

    @property
    def space(self) -> Space:
        return self.num.space

    def _cancel(self) -> None:
        if self.num.is_zero():
            self.den = ()
            return
        if not self.den:
            return
        kept = []
        num = self.num
        for f, m in self.den:
            while m:
                q = divide_exact(num, f)
                if q is None:
                    break
                num = q
                m -= 1
            if m:
                kept.append((f, m))
        self.num = num
        self.den = tuple(kept)

    def denominator(self) -> ParamPoly:
        out = self.space.one()
        for f, m in self.den:
            out = out * f**m
        return out

    def is_polynomial(self) -> bool:
        return not self.den

    def as_poly(self) -> ParamPoly:
        if self.den:
            raise NotPolynomialError(f"{self.to_text()} has a non-monomial denominator")
        return self.num

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __bool__(self):
        return not self.num.is_zero()

    def _other(self, other) -> "ParamRational | None":
        if isinstance(other, ParamRational):
            if other.space is not self.space:
                raise StructureError("variable lists differ")
            return other
        if isinstance(other, ParamPoly):
            if other.space is not self.space:
                raise StructureError("variable lists differ")
            return ParamRational(other)
        if is_scalar(other):
            return ParamRational(self.space.const(other))
        return None

    @staticmethod
    def _merge(d1: tuple, d2: tuple) -> tuple[list, list, list]:
        """lcm of two factor lists plus the cofactors needed for each side."""
        idx: dict[tuple, list] = {}
        for f, m in d1:
            idx.setdefault(_factor_key(f), [f, 0, 0])[1] = m
        for f, m in d2:
            idx.setdefault(_factor_key(f), [f, 0, 0])[2] = m
        lcm, co1, co2 = [], [], []
        for f, m1, m2 in idx.values():
            m = max(m1, m2)
            lcm.append((f, m))
            if m - m1:
                co1.append((f, m - m1))
            if m - m2:
                co2.append((f, m - m2))
        return lcm, co1, co2

    @staticmethod
    def _prod(space: Space, factors) -> ParamPoly:
        out = space.one()
        for f, m in factors:
            out = out * f**m
        return out

    def __add__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        if self.den == o.den or (not self.den and not o.den):
            return ParamRational._make(self.num + o.num, self.den)
        lcm, c1, c2 = self._merge(self.den, o.den)
        num = self.num * self._prod(self.space, c1) + o.num * self._prod(self.space, c2)
        return ParamRational._make(num, tuple(lcm))

    __radd__ = __add__

    def __neg__(self):
        return ParamRational._make(-self.num, self.den)

    def __sub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        if not o.den:
            return ParamRational._make(self.num * o.num, self.den)
        idx: dict[tuple, list] = {}
        for f, m in self.den + o.den:
            idx.setdefault(_factor_key(f), [f, 0])[1] += m
        return ParamRational._make(self.num * o.num, tuple((f, m) for f, m in idx.values()))

    __rmul__ = __mul__

    def inverse(self) -> "ParamRational":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return ParamRational(self._prod(self.space, self.den), self.num)

    def __truediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._other(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        return ParamRational._make(self.num**n, tuple((f, m * n) for f, m in self.den))

    def __eq__(self, other):
        try:
            o = self._other(other)
        except StructureError:
            return False
        if o is None:
            return NotImplemented
        if self.den == o.den:
            return self.num == o.num
        lcm, c1, c2 = self._merge(self.den, o.den)
        return self.num * self._prod(self.space, c1) == o.num * self._prod(self.space, c2)

    def __hash__(self):
        # values equal as rational functions need not share a representation
        return hash(self.space.names)

    def subs(self, bindings):
        return substitute(self, bindings)

    def evaluate(self, values, pi=None):
        num = self.num.evaluate(values, pi)
        den = self.denominator().evaluate(values, pi)
        if not den:
            raise ZeroDivisionError("denominator vanishes at the evaluation point")
        return num / den

    def diff(self, name: str) -> "ParamRational":
        # (n/D)' = n'/D - n D'/D^2, with D = prod f^m, D'/D = sum m f'/f
        out = ParamRational._make(self.num.diff(name), self.den)
        for f, m in self.den:
            df = f.diff(name)
            if df.is_zero():
                continue
            term = ParamRational._make(self.num * df * (-m), self.den + ((f, 1),))
            out = out + term
        return out

    def factored(self) -> dict:
        """Content, monomial and primitive parts of numerator plus denominator factors."""
        if self.num.is_zero():
            return {"content": mpq(0), "monomial": "1", "primitive": "0", "denominator": []}
        c, mk, prim = self.num.primitive()
        mono = ParamPoly._raw(self.space, {mk: mpq(1)})
        return {
            "content": c,
            "monomial": mono.to_text(),
            "primitive": prim.to_text(),
            "denominator": [(f.to_text(), m) for f, m in self.den],
        }

    def to_text(self) -> str:
        if not self.den:
            return self.num.to_text()
        den = "*".join(f"({f.to_text()})^{m}" for f, m in self.den)
        return f"({self.num.to_text()})/({den})"

    __str__ = to_text

    def __repr__(self) -> str:
        return f"ParamRational({self.to_text()!r})"


Coef = Union[ParamPoly, ParamRational]


def as_rational(value, space: Space) -> ParamRational:
    if isinstance(value, ParamRational):
        return value
    if isinstance(value, ParamPoly):
        return ParamRational(value)
    if isinstance(value, str):
        return space.parse(value)
    return ParamRational(space.const(value))


# ---------------------------------------------------------------------------
# substitution


def resolve_bindings(bindings: Mapping[str, object], space: Space) -> dict[str, ParamRational]:
    """Turn a chain of bindings into simultaneous ones.

    A right-hand side may mention other bound names; those are substituted
    first.  Cycles raise ``SingularSubstitutionError``.
    """
    raw = {}
    for name, value in bindings.items():
        if name not in space.index:
            raise StructureError(f"cannot bind {name!r}: not a variable of the space")
        raw[name] = as_rational(value, space)
    done: dict[str, ParamRational] = {}
    visiting: set[str] = set()

    def deps(r: ParamRational) -> set[str]:
        used = set(r.num.variables())
        for f, _ in r.den:
            used.update(f.variables())
        return used & raw.keys()

    def visit(name: str) -> ParamRational:
        if name in done:
            return done[name]
        if name in visiting:
            raise SingularSubstitutionError(f"binding cycle through {name!r}")
        visiting.add(name)
        r = raw[name]
        d = deps(r)
        if name in d:
            raise SingularSubstitutionError(f"{name!r} is defined in terms of itself")
        if d:
            r = _subs_simultaneous(r, {n: visit(n) for n in d})
        visiting.discard(name)
        done[name] = r
        return r

    for n in raw:
        visit(n)
    return done


def _subs_poly_simultaneous(p: ParamPoly, bound: dict[str, ParamRational]) -> ParamRational:
    space = p.space
    idx = [(space.index[n], n) for n in bound]
    powcache: dict[tuple[str, int], ParamRational] = {}

    def power(name: str, e: int) -> ParamRational:
        key = (name, e)
        hit = powcache.get(key)
        if hit is None:
            base = bound[name]
            if e < 0 and base.is_zero():
                raise SingularSubstitutionError(f"{name!r} is bound to 0 but appears with a negative power")
            hit = base**e
            powcache[key] = hit
        return hit

    # group terms by the exponents of bound variables
    groups: dict[tuple, dict] = {}
    for k, c in p.terms.items():
        pe, e = space.decode(k)
        sel = tuple(e[i] for i, _ in idx)
        rest = k
        for (i, _), x in zip(idx, sel):
            rest -= x << (BITS * (i + 1))
        groups.setdefault(sel, {})[rest] = c
    total = ParamRational(space.zero())
    for sel, terms in groups.items():
        factor = ParamRational(ParamPoly._raw(space, terms))
        for (i, name), x in zip(idx, sel):
            if x:
                factor = factor * power(name, x)
        total = total + factor
    return total


def _subs_simultaneous(target, bound: dict[str, ParamRational]):
    if isinstance(target, ParamPoly):
        return _subs_poly_simultaneous(target, bound)
    if isinstance(target, ParamRational):
        num = _subs_poly_simultaneous(target.num, bound)
        for f, m in target.den:
            fs = _subs_poly_simultaneous(f, bound)
            if fs.is_zero():
                raise SingularSubstitutionError(f"denominator factor {f.to_text()} vanishes")
            num = num / fs**m
        return num
    raise TypeError(f"cannot substitute into {type(target).__name__}")


def substitute(target, bindings: Mapping[str, object]):
    """Replace parameters by values given as ParamRational, ParamPoly, numbers or text.

    ParamPoly and ParamRational inputs give a ParamRational; BiSeries inputs
    give a BiSeries with substituted coefficients.
    """
    if isinstance(target, BiSeries):
        return target.subs(bindings)
    bound = resolve_bindings(bindings, target.space) if bindings else {}
    if not bound:
        return ParamRational(target) if isinstance(target, ParamPoly) else target
    return _subs_simultaneous(target, bound)


def ring_op(a, b, op: str):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown ring operation {op!r}")


# ---------------------------------------------------------------------------
# expression parsing


def _parse_expr(space: Space, text: str) -> ParamRational:
    src = text.replace("^", "**").strip()
    if not src:
        raise SyntaxError("empty expression")
    tree = ast.parse(src, mode="eval")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise SyntaxError(f"unsupported literal {node.value!r}")
            # re-read the literal from source so decimals stay exact
            seg = ast.get_source_segment(src, node)
            return ParamRational(space.const(to_rational(seg)))
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return ParamRational(space.pi())
            if node.id not in space.index:
                raise SyntaxError(f"unknown name {node.id!r}")
            return ParamRational(space.var(node.id))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                exp = node.right
                sign = 1
                if isinstance(exp, ast.UnaryOp) and isinstance(exp.op, ast.USub):
                    sign, exp = -1, exp.operand
                if not (isinstance(exp, ast.Constant) and isinstance(exp.value, int)):
                    raise SyntaxError("exponents must be integer literals")
                base = ev(node.left)
                n = sign * exp.value
                if n < 0 and base.is_polynomial() and base.num.is_monomial():
                    return ParamRational(base.num**n)
                return base**n
            left, right = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                if right.is_zero():
                    raise ZeroDivisionError("division by zero in expression")
                return left / right
        raise SyntaxError(f"unsupported syntax: {ast.dump(node)}")

    return ev(tree)


# ---------------------------------------------------------------------------
# bivariate series


def _coef_zero(c) -> bool:
    return c.is_zero()


class BiSeries:
    """Truncated series ``sum c[i,k] xi**i eps**k`` with ``i < order_xi, k < order_eps``.

    Coefficients are ParamPoly (the fast path) or ParamRational values over
    one common space.
    """

    __slots__ = ("space", "order_xi", "order_eps", "terms")

    def __init__(self, space: Space, order_xi: int, order_eps: int, terms: Mapping | None = None):
        self.space = space
        self.order_xi = order_xi
        self.order_eps = order_eps
        clean = {}
        for (i, k), c in (terms or {}).items():
            if i < 0 or k < 0:
                raise ValueError("series exponents are nonnegative")
            if i >= order_xi or k >= order_eps:
                continue
            if is_scalar(c):
                c = space.const(c)
            if c.space is not space:
                raise StructureError("coefficient space differs from the series space")
            if not c.is_zero():
                clean[(i, k)] = c
        self.terms = clean

    @classmethod
    def _raw(cls, space, oxi, oeps, terms) -> "BiSeries":
        self = object.__new__(cls)
        self.space, self.order_xi, self.order_eps, self.terms = space, oxi, oeps, terms
        return self

    @classmethod
    def xi(cls, space, order_xi, order_eps) -> "BiSeries":
        return cls(space, order_xi, order_eps, {(1, 0): space.one()})

    @classmethod
    def eps(cls, space, order_xi, order_eps) -> "BiSeries":
        return cls(space, order_xi, order_eps, {(0, 1): space.one()})

    @classmethod
    def constant(cls, space, order_xi, order_eps, c=1) -> "BiSeries":
        return cls(space, order_xi, order_eps, {(0, 0): c if not is_scalar(c) else space.const(c)})

    def _check(self, other: "BiSeries") -> None:
        if other.space is not self.space:
            raise StructureError("series spaces differ")
        if (other.order_xi, other.order_eps) != (self.order_xi, self.order_eps):
            raise StructureError("series truncation orders differ")

    def _like(self, terms) -> "BiSeries":
        return BiSeries._raw(self.space, self.order_xi, self.order_eps, terms)

    def __add__(self, other):
        if not isinstance(other, BiSeries):
            other = BiSeries.constant(self.space, self.order_xi, self.order_eps, other)
        self._check(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            v = out.get(key)
            s = c if v is None else v + c
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, BiSeries):
            other = BiSeries.constant(self.space, self.order_xi, self.order_eps, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, BiSeries):
            if is_scalar(other) or isinstance(other, (ParamPoly, ParamRational)):
                out = {}
                for k, c in self.terms.items():
                    v = c * other
                    if not v.is_zero():
                        out[k] = v
                return self._like(out)
            return NotImplemented
        self._check(other)
        oxi, oeps = self.order_xi, self.order_eps
        out: dict = {}
        for (i1, k1), c1 in self.terms.items():
            for (i2, k2), c2 in other.terms.items():
                i, k = i1 + i2, k1 + k2
                if i >= oxi or k >= oeps:
                    continue
                v = out.get((i, k))
                out[(i, k)] = c1 * c2 if v is None else v + c1 * c2
        return self._like({k: v for k, v in out.items() if not v.is_zero()})

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = BiSeries.constant(self.space, self.order_xi, self.order_eps, 1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, BiSeries):
            return NotImplemented
        if (self.space, self.order_xi, self.order_eps) != (other.space, other.order_xi, other.order_eps):
            return False
        keys = set(self.terms) | set(other.terms)
        zero = self.space.zero()
        return all(self.terms.get(k, zero) == other.terms.get(k, zero) for k in keys)

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, i: int, k: int):
        return self.terms.get((i, k), self.space.zero())

    def xi_coefficient(self, i: int) -> dict[int, Coef]:
        return {k: c for (ii, k), c in self.terms.items() if ii == i}

    def truncate(self, order_xi: int, order_eps: int) -> "BiSeries":
        return BiSeries(self.space, order_xi, order_eps,
                        {k: c for k, c in self.terms.items() if k[0] < order_xi and k[1] < order_eps})

    def subs(self, bindings) -> "BiSeries":
        bound = resolve_bindings(bindings, self.space)
        return self._like({k: v for k, v in
                           ((k, _subs_simultaneous(c, bound)) for k, c in self.terms.items())
                           if not v.is_zero()})

    def map(self, fn) -> "BiSeries":
        return BiSeries(self.space, self.order_xi, self.order_eps, {k: fn(c) for k, c in self.terms.items()})

    def compose(self, g: "BiSeries") -> "BiSeries":
        """``self(g(xi), eps)``; ``g`` must have no xi**0 terms."""
        self._check(g)
        if any(i == 0 for i, _ in g.terms):
            raise SingularSeriesError("inner series must vanish at xi = 0")
        result = BiSeries._raw(self.space, self.order_xi, self.order_eps, {})
        for i in range(self.order_xi - 1, -1, -1):
            layer = {(0, k): c for (ii, k), c in self.terms.items() if ii == i}
            result = result * g + self._like(layer)
        return result

    def __repr__(self) -> str:
        parts = [f"({c.to_text()})*xi^{i}*eps^{k}" for (i, k), c in sorted(self.terms.items())]
        return f"BiSeries[{self.order_xi},{self.order_eps}](" + (" + ".join(parts) or "0") + ")"


def _inverse_coef(c):
    if isinstance(c, ParamPoly):
        if c.is_zero():
            raise SingularSeriesError("zero coefficient has no inverse")
        if c.is_monomial():
            return c**-1
        return ParamRational(c.space.one(), c)
    if c.is_zero():
        raise SingularSeriesError("zero coefficient has no inverse")
    return c.inverse()


def eps_inverse(layer: dict[int, Coef], order_eps: int, space: Space) -> dict[int, Coef]:
    """Multiplicative inverse of an eps-series ``{k: c_k}``."""
    c0 = layer.get(0)
    if c0 is None or c0.is_zero():
        raise SingularSeriesError("series has no invertible eps**0 coefficient")
    u0 = _inverse_coef(c0)
    inv = {0: u0}
    for k in range(1, order_eps):
        acc = None
        for j in range(1, k + 1):
            cj = layer.get(j)
            if cj is None:
                continue
            t = cj * inv[k - j]
            acc = t if acc is None else acc + t
        inv[k] = space.zero() if acc is None else -(u0 * acc)
    return inv


def series_invert(f: BiSeries) -> BiSeries:
    """Compositional inverse in xi: ``f(g(xi)) = xi`` to the truncation orders."""
    if any(i == 0 for i, _ in f.terms):
        raise SingularSeriesError("series must vanish at xi = 0")
    if f.order_xi < 2:
        raise SingularSeriesError("xi truncation too small to invert")
    lin = f.xi_coefficient(1)
    u = eps_inverse(lin, f.order_eps, f.space)
    ulayer = BiSeries(f.space, f.order_xi, f.order_eps, {(0, k): c for k, c in u.items()})
    g = BiSeries(f.space, f.order_xi, f.order_eps, {(1, k): c for k, c in u.items()})
    for n in range(2, f.order_xi):
        h = f.compose(g)
        err = BiSeries(f.space, f.order_xi, f.order_eps,
                       {(n, k): c for (i, k), c in h.terms.items() if i == n})
        if err.is_zero():
            continue
        g = g - ulayer * err
    return g
