"""Switching planar polynomial systems of degree at most three.

A ``SwitchingSystem`` holds two half vector fields as ``ParamPoly`` values
over a space whose first three names are always ``x``, ``y`` and ``eps``.
``manifold`` names the coordinate that vanishes on the switching line; the
``upper`` half is the side where that coordinate is nonnegative.

Sign convention for perturbations: a perturbation coefficient shifts the
base coefficient it sits next to, e.g. ``p22p`` turns ``a2p*x**2`` into
``(a2p + eps**2*p22p)*x**2``.  With this convention the scaled system comes
out exactly in the printed transformed form.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping

from gmpy2 import mpq

from .algebra_core import (AlgebraError, ParamPoly, ParamRational, Space, StructureError,
                           is_scalar, resolve_bindings, to_rational, _subs_simultaneous)

STATE = ("x", "y", "eps")


class SystemError_(AlgebraError):
    """Base class for system construction failures."""


class NotNilpotentError(SystemError_):
    pass


class UnsupportedMonomialError(SystemError_):
    pass


class InconsistentWeightsError(SystemError_):
    pass


class NonIsolatedError(SystemError_):
    pass


class UndecidableError(SystemError_):
    """An inequality would have to be decided on a symbolic value."""

    def __init__(self, message: str, residual: list[str] | None = None):
        super().__init__(message)
        self.residual = residual or []


# ---------------------------------------------------------------------------
# parameter naming


_SIDE = {"+": "p", "-": "m", "p": "p", "m": "m", "upper": "p", "lower": "m"}
_BASE_ORDER = ["a0p", "a1p", "a2p", "a3p", "b0p", "b1p", "b2p", "b3p",
               "a0m", "a1m", "a2m", "a3m", "b0m", "b1m", "b2m", "b3m",
               "d", "theta1", "theta2"]


def param_sort_key(name: str) -> tuple:
    if name in _BASE_ORDER:
        return (0, _BASE_ORDER.index(name), 0, 0, "")
    m = re.fullmatch(r"delta(\d+)", name)
    if m:
        return (1, int(m.group(1)), 0, 0, "")
    m = re.fullmatch(r"([pq])(\d)(\d)([pm])", name)
    if m:
        return (2, int(m.group(2)), int(m.group(3)), "pq".index(m.group(1)) * 2 + "pm".index(m.group(4)), "")
    return (3, 0, 0, 0, name)


def sort_params(names: Iterable[str]) -> list[str]:
    return sorted(set(names), key=param_sort_key)


def system_space(params: Iterable[str]) -> Space:
    return Space(STATE + tuple(n for n in sort_params(params) if n not in STATE))


def expr_names(value) -> set[str]:
    """Names mentioned in a coefficient given as text or a value."""
    if isinstance(value, str):
        tree = ast.parse(value.replace("^", "**"), mode="eval")
        return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id != "pi"}
    if isinstance(value, ParamPoly):
        return set(value.variables())
    if isinstance(value, ParamRational):
        out = set(value.num.variables())
        for f, _ in value.den:
            out.update(f.variables())
        return out
    return set()


def to_poly(value, space: Space) -> ParamPoly:
    if isinstance(value, ParamPoly):
        return value.lift(space)
    if isinstance(value, ParamRational):
        return ParamRational(value.num.lift(space), value.denominator().lift(space)).as_poly()
    if isinstance(value, str):
        return space.parse(value).as_poly()
    return space.const(value)


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SwitchingSystem:
    upper: tuple[ParamPoly, ParamPoly]
    lower: tuple[ParamPoly, ParamPoly]
    manifold: str = "x"

    def __post_init__(self):
        polys = (*self.upper, *self.lower)
        space = polys[0].space
        if any(p.space is not space for p in polys):
            raise StructureError("both halves must share one variable space")
        if space.names[:3] != STATE:
            raise StructureError("system spaces start with x, y, eps")
        if self.manifold not in ("x", "y"):
            raise StructureError("manifold is 'x' (line x = 0) or 'y' (line y = 0)")
        for p in polys:
            for _, e, _ in p.exponent_items():
                if e[0] < 0 or e[1] < 0 or e[2] < 0:
                    raise InconsistentWeightsError("negative power of x, y or eps in a system")
                if e[0] + e[1] > 3:
                    raise UnsupportedMonomialError("system degree exceeds three")

    @property
    def space(self) -> Space:
        return self.upper[0].space

    @property
    def params(self) -> tuple[str, ...]:
        return self.space.names[3:]

    def half(self, side: str) -> tuple[ParamPoly, ParamPoly]:
        return self.upper if _SIDE[side] == "p" else self.lower

    def lift(self, space: Space) -> "SwitchingSystem":
        return SwitchingSystem(tuple(p.lift(space) for p in self.upper),
                               tuple(p.lift(space) for p in self.lower), self.manifold)

    def subs(self, bindings: Mapping[str, object], drop: bool = True) -> "SwitchingSystem":
        """Substitute parameters; the results must stay (Laurent) polynomial.

        With ``drop`` the bound names are removed from the space.
        """
        bound = resolve_bindings(bindings, self.space) if bindings else {}
        new = [_subs_simultaneous(p, bound).as_poly() if bound else p for p in (*self.upper, *self.lower)]
        sys = SwitchingSystem((new[0], new[1]), (new[2], new[3]), self.manifold)
        if drop and bound:
            sys = sys.lift(system_space([n for n in self.params if n not in bound]))
        return sys

    def compact(self) -> "SwitchingSystem":
        """Drop parameters that no longer occur."""
        used = set()
        for p in (*self.upper, *self.lower):
            used.update(p.variables())
        return self.lift(system_space([n for n in self.params if n in used]))

    def truncate_eps(self, order: int) -> "SwitchingSystem":
        """Drop terms carrying eps**k with k >= order."""

        def cut(p: ParamPoly) -> ParamPoly:
            return ParamPoly._raw(p.space, {k: c for k, c in p.terms.items()
                                          if p.space.decode(k)[1][2] < order})

        return SwitchingSystem(tuple(cut(p) for p in self.upper), tuple(cut(p) for p in self.lower),
                               self.manifold)

    def fix_eps(self, value) -> "SwitchingSystem":
        """Replace eps by an exact rational, leaving an eps-free system."""
        q = to_rational(value)
        space = self.space

        def fix(p: ParamPoly) -> ParamPoly:
            out: dict[int, mpq] = {}
            ek = space.var_key("eps")
            for k, c in p.terms.items():
                e = space.decode(k)[1][2]
                nk = k - e * ek
                out[nk] = out.get(nk, 0) + c * q**e
            return ParamPoly(space, out)

        return SwitchingSystem(tuple(fix(p) for p in self.upper), tuple(fix(p) for p in self.lower),
                               self.manifold)

    def coefficients(self, side: str, component: int) -> dict[tuple[int, int], ParamPoly]:
        """``{(i, j): coefficient of x**i y**j}`` with eps kept inside the coefficient."""
        p = self.half(side)[component]
        return {(i, j): c for (i, j), c in _split_xy(p).items()}

    def evaluate_parameters(self, values: Mapping[str, object]) -> "SwitchingSystem":
        """Bind every parameter to a rational (eps stays symbolic)."""
        return self.subs({n: values[n] for n in self.params if n in values})

    def to_text(self) -> str:
        lines = []
        for label, (f, g) in (("upper", self.upper), ("lower", self.lower)):
            lines.append(f"{label}: dx/dt = {f.to_text()}")
            lines.append(f"{' ' * len(label)}  dy/dt = {g.to_text()}")
        return "\n".join(lines) + f"\nmanifold: {self.manifold} = 0"

    def __str__(self) -> str:
        return self.to_text()


def _split_xy(p: ParamPoly) -> dict[tuple[int, int], ParamPoly]:
    space = p.space
    kx, ky = space.var_key("x"), space.var_key("y")
    out: dict[tuple[int, int], dict] = {}
    for k, c in p.terms.items():
        _, e = space.decode(k)
        out.setdefault((e[0], e[1]), {})[k - e[0] * kx - e[1] * ky] = c
    return {ij: ParamPoly._raw(space, d) for ij, d in out.items()}


# ---------------------------------------------------------------------------
# Lienard data


_COEF_FIELDS = ("a0", "a1", "a2", "a3", "b0", "b1", "b2", "b3")


@dataclass(frozen=True)
class LienardCoeffs:
    """Coefficients of ``x' = y - (a0 + a1 x + a2 x^2 + a3 x^3)``, ``y' = -(b0 + ... + b3 x^3)``.

    Values are exact numbers or expression strings over parameter names;
    the defaults make a2..b3 free symbols and a0, a1, b0, b1 zero.
    """

    a0p: object = 0
    a1p: object = 0
    a2p: object = "a2p"
    a3p: object = "a3p"
    b0p: object = 0
    b1p: object = 0
    b2p: object = "b2p"
    b3p: object = "b3p"
    a0m: object = 0
    a1m: object = 0
    a2m: object = "a2m"
    a3m: object = "a3m"
    b0m: object = 0
    b1m: object = 0
    b2m: object = "b2m"
    b3m: object = "b3m"

    @classmethod
    def from_mapping(cls, data: Mapping[str, object], default: object = None) -> "LienardCoeffs":
        """Build from a mapping; unspecified a2..b3 become ``default`` (symbols if None)."""
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise KeyError(f"unknown coefficient names: {sorted(unknown)}")
        kw = {}
        for f in fields(cls):
            if f.name in data:
                kw[f.name] = _normalize_value(data[f.name])
            elif default is not None and f.name[1] in "23":
                kw[f.name] = default
        return cls(**kw)

    def get(self, name: str, side: str):
        return getattr(self, name + _SIDE[side])

    def symbols(self) -> set[str]:
        out: set[str] = set()
        for f in fields(self):
            out |= expr_names(getattr(self, f.name))
        return out

    def is_concrete(self) -> bool:
        return not self.symbols()

    def values(self, space: Space | None = None) -> dict[str, ParamRational]:
        space = space or Space(sort_params(self.symbols()))
        return {f.name: _as_rational(getattr(self, f.name), space) for f in fields(self)}

    def rational(self, name: str) -> mpq:
        """Exact value of a concrete coefficient."""
        v = getattr(self, name)
        if isinstance(v, str):
            r = Space(sort_params(expr_names(v))).parse(v)
            if not r.is_polynomial() or not r.num.is_constant():
                raise UndecidableError(f"{name} = {v} is symbolic", [name])
            return r.num.constant_value()
        if isinstance(v, (ParamPoly, ParamRational)):
            if isinstance(v, ParamRational):
                v = v.as_poly()
            if not v.is_constant():
                raise UndecidableError(f"{name} is symbolic", [name])
            return v.constant_value()
        return to_rational(v)

    def mirrored(self) -> "LienardCoeffs":
        """Exchange the two halves (useful for tests of the symmetric conditions)."""
        kw = {}
        for f in fields(self):
            other = f.name[:-1] + ("m" if f.name.endswith("p") else "p")
            kw[f.name] = getattr(self, other)
        return LienardCoeffs(**kw)

    def with_values(self, **kw) -> "LienardCoeffs":
        return replace(self, **{k: _normalize_value(v) for k, v in kw.items()})


def _normalize_value(v):
    if isinstance(v, float):
        raise TypeError("binary floats are not accepted; use strings or rationals")
    return v


def _as_rational(v, space: Space) -> ParamRational:
    if isinstance(v, str):
        return space.parse(v)
    if isinstance(v, ParamPoly):
        return ParamRational(v.lift(space))
    if isinstance(v, ParamRational):
        return ParamRational(v.num.lift(space), v.denominator().lift(space))
    return ParamRational(space.const(v))


def build_lienard(coeffs: LienardCoeffs, extra_params: Iterable[str] = ()) -> SwitchingSystem:
    """The nilpotent Lienard pair on the switching line x = 0."""
    space = system_space(coeffs.symbols() | set(extra_params))
    for side in "pm":
        for name in ("a0", "a1", "b0", "b1"):
            v = _as_rational(coeffs.get(name, side), space)
            if not v.is_zero():
                raise NotNilpotentError(f"{name}{side} must vanish for a nilpotent origin")
    x, y = space.var("x"), space.var("y")
    halves = []
    for side in "pm":
        a2, a3, b2, b3 = (to_poly(coeffs.get(n, side), space) for n in ("a2", "a3", "b2", "b3"))
        halves.append((y - a2 * x**2 - a3 * x**3, -(b2 * x**2) - b3 * x**3))
    return SwitchingSystem(halves[0], halves[1], "x")


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class Pert:
    """One perturbation monomial: ``x' -= eps^k p x^i``, ``y' -= eps^k q x^i`` on ``side``."""

    k: int
    i: int
    side: str
    p: object = 0
    q: object = 0


@dataclass(frozen=True)
class PerturbationScheme:
    """What to add to a nilpotent Lienard system before scaling.

    ``unfolding`` is the coefficient c of the ``-c*eps^2*x`` term in y' (both
    halves).  ``delta`` maps k to the coefficient of ``eps^(k+1) x`` in x'.
    ``d`` is a constant added to x' of ``d_side`` with ``eps**d_eps_power``.
    ``theta1``/``theta2`` are the coefficients of ``eps*x`` in x' and
    ``eps*y`` in y'.
    """

    unfolding: object = 1
    pert: tuple[Pert, ...] = ()
    delta: Mapping[int, object] = field(default_factory=dict)
    d: object = 0
    d_eps_power: int = 9
    d_side: str = "-"
    theta1: object = 0
    theta2: object = 0

    @classmethod
    def standard(cls, ks: Iterable[int], sides: str = "pm", degrees: Iterable[int] = (2, 3),
                 **kw) -> "PerturbationScheme":
        """Symbolic perturbations p{k}{i}{side}, q{k}{i}{side} for every k, i and side."""
        perts = []
        for k in ks:
            for i in degrees:
                for s in sides:
                    perts.append(Pert(k, i, s, f"p{k}{i}{s}", f"q{k}{i}{s}"))
        return cls(pert=tuple(perts), **kw)

    def symbols(self) -> set[str]:
        out = expr_names(self.unfolding) | expr_names(self.d) | expr_names(self.theta1) | expr_names(self.theta2)
        for p in self.pert:
            out |= expr_names(p.p) | expr_names(p.q)
        for v in self.delta.values():
            out |= expr_names(v)
        return out


def apply_perturbation(sys: SwitchingSystem, scheme: PerturbationScheme) -> SwitchingSystem:
    if sys.manifold != "x":
        raise StructureError("perturbations apply to the unscaled system (manifold x = 0)")
    space = system_space(set(sys.params) | scheme.symbols())
    base = sys.lift(space)
    x, y, eps = space.var("x"), space.var("y"), space.var("eps")
    unf = to_poly(scheme.unfolding, space)
    th1, th2 = to_poly(scheme.theta1, space), to_poly(scheme.theta2, space)
    common_x = th1 * eps * x
    common_y = th2 * eps * y - unf * eps**2 * x
    for k, v in scheme.delta.items():
        if k < 1:
            raise ValueError("delta indices start at 1")
        common_x = common_x + to_poly(v, space) * eps ** (k + 1) * x
    halves = {}
    for side in "pm":
        f, g = base.half(side)
        f = f + common_x
        g = g + common_y
        for p in scheme.pert:
            if p.i not in (2, 3):
                raise UnsupportedMonomialError(f"perturbation degree {p.i} is outside {{2, 3}}")
            if p.k < 1:
                raise ValueError("perturbation orders start at 1")
            if _SIDE[p.side] != side:
                continue
            f = f - to_poly(p.p, space) * eps**p.k * x**p.i
            g = g - to_poly(p.q, space) * eps**p.k * x**p.i
        if _SIDE[scheme.d_side] == side:
            f = f + to_poly(scheme.d, space) * eps**scheme.d_eps_power
        halves[side] = (f, g)
    return SwitchingSystem(halves["p"], halves["m"], "x")


# ---------------------------------------------------------------------------
# transforms


def scale_transform(sys: SwitchingSystem, weights: tuple[int, int] = (2, 3)) -> SwitchingSystem:
    """Blow the nilpotent origin up into a rotation.

    Old coordinates are ``x = eps**wx * Y``, ``y = eps**wy * X`` and time is
    ``t = T/eps``; the new system is written in (X, Y) renamed (x, y), so the
    switching line x = 0 becomes y = 0 and the half x >= 0 becomes y >= 0.
    """
    if sys.manifold != "x":
        raise StructureError("scale_transform expects the switching line x = 0")
    wx, wy = weights
    space = sys.space
    kx, ky, ke = (space.var_key(n) for n in STATE)

    def image(p: ParamPoly, divide: int) -> ParamPoly:
        out = {}
        for k, c in p.terms.items():
            _, e = space.decode(k)
            ex, ey, ee = e[0], e[1], e[2]
            rest = k - ex * kx - ey * ky - ee * ke
            new_e = wx * ex + wy * ey + ee - divide
            if new_e < 0:
                raise InconsistentWeightsError(
                    f"term x^{ex} y^{ey} eps^{ee} picks up eps^{new_e} under the scaling")
            nk = rest + ey * kx + ex * ky + new_e * ke
            out[nk] = out.get(nk, 0) + c
        return ParamPoly(space, out)

    # X = y_old / eps^wy, Y = x_old / eps^wx, d/dT = (1/eps) d/dt
    halves = []
    for f, g in (sys.upper, sys.lower):
        halves.append((image(g, wy + 1), image(f, wx + 1)))
    return SwitchingSystem(halves[0], halves[1], "y")


def reflect_system(sys: SwitchingSystem) -> SwitchingSystem:
    """Apply (x, y, t) -> (x, -y, -t) to a system switching on y = 0.

    The reflected upper half is built from the old lower half and vice versa:
    ``(f, g) -> (-f(x, -y), g(x, -y))``.
    """
    if sys.manifold != "y":
        raise StructureError("reflect_system expects the switching line y = 0")
    space = sys.space

    def flip_y(p: ParamPoly, sign: int) -> ParamPoly:
        out = {}
        for k, c in p.terms.items():
            ey = space.decode(k)[1][1]
            out[k] = c * sign * (-1) ** ey
        return ParamPoly._raw(space, out)

    new_upper = (flip_y(sys.lower[0], -1), flip_y(sys.lower[1], 1))
    new_lower = (flip_y(sys.upper[0], -1), flip_y(sys.upper[1], 1))
    return SwitchingSystem(new_upper, new_lower, "y")


# ---------------------------------------------------------------------------
# nilpotent origin classification


@dataclass(frozen=True)
class OriginClass:
    kind: str
    n: int | None
    m: int | None
    delta: mpq | None
    monodromic: bool
    cusp: bool

    @property
    def multiplicity(self) -> int | None:
        return self.m


KINDS = ("center-or-focus", "saddle", "cusp", "node", "saddle-node", "hyperbolic-plus-elliptic")


def classify_origin(a: Mapping[int, object], b: Mapping[int, object]) -> OriginClass:
    """Local type of the nilpotent origin of ``x' = y - F(x)``, ``y' = -g(x)``.

    ``a`` and ``b`` map powers to the coefficients of F and g (indices >= 2;
    lower ones are required to vanish).  Follows the nilpotent table with
    ``n`` the least index with ``a_n != 0``, ``m`` the least with
    ``b_m != 0`` and ``Delta = -4(n+1) b_m + n^2 a_n^2``.
    """
    av = {i: _concrete(v, f"a{i}") for i, v in a.items()}
    bv = {i: _concrete(v, f"b{i}") for i, v in b.items()}
    for i in (0, 1):
        if av.get(i, 0) or bv.get(i, 0):
            raise NotNilpotentError("constant and linear parts must vanish")
    ns = sorted(i for i, v in av.items() if v)
    ms = sorted(i for i, v in bv.items() if v)
    if not ms:
        raise NonIsolatedError("g vanishes identically: the origin is not isolated")
    m = ms[0]
    bm = bv[m]
    if not ns:
        if m % 2:
            kind = "center-or-focus" if bm > 0 else "saddle"
        else:
            kind = "cusp"
        return OriginClass(kind, None, m, None, kind == "center-or-focus", kind == "cusp")
    n = ns[0]
    an = av[n]
    delta = -4 * (n + 1) * bm + n * n * an * an
    if m % 2:
        k = (m - 1) // 2
        if bm < 0:
            kind = "saddle"
        elif k < n - 1 or (k == n - 1 and delta < 0):
            kind = "center-or-focus"
        else:
            kind = "hyperbolic-plus-elliptic" if n % 2 == 0 else "node"
    else:
        k = m // 2
        kind = "saddle-node" if n < k else "cusp"
    return OriginClass(kind, n, m, mpq(delta), kind == "center-or-focus", kind == "cusp")


def _concrete(v, name: str) -> mpq:
    if is_scalar(v):
        return to_rational(v)
    if isinstance(v, str):
        try:
            return to_rational(v)
        except (ValueError, ZeroDivisionError):
            raise UndecidableError(f"{name} = {v} is symbolic", [name]) from None
    if isinstance(v, ParamRational):
        v = v.as_poly()
    if isinstance(v, ParamPoly) and v.is_constant():
        return v.constant_value()
    raise UndecidableError(f"{name} is symbolic", [name])


def classify_half(coeffs: LienardCoeffs, side: str) -> OriginClass:
    """Table type of the origin for one half, read as a smooth system."""
    s = _SIDE[side]
    a = {i: coeffs.rational(f"a{i}{s}") for i in range(4)}
    b = {i: coeffs.rational(f"b{i}{s}") for i in range(4)}
    return classify_origin(a, b)


def switching_monodromic(coeffs: LienardCoeffs) -> bool:
    """Orbits turn around the origin of the switching pair.

    Each half must be monodromic, or a cusp whose quadratic term sends the
    flow across the line the right way (b2p > 0 on x >= 0, b2m < 0 on x < 0).
    """
    for s, sign in (("p", 1), ("m", -1)):
        try:
            c = classify_half(coeffs, s)
        except NonIsolatedError:
            return False
        if c.monodromic:
            continue
        if c.cusp and sign * coeffs.rational(f"b2{s}") > 0:
            continue
        return False
    return True


def multiplicity_three_monodromic(a2, a3, b2, b3) -> bool:
    """The two printed sufficient conditions for a monodromic multiplicity-three half."""
    a2, a3, b2, b3 = (to_rational(v) for v in (a2, a3, b2, b3))
    if b2:
        return False
    if not a2:
        return b3 > mpq(3, 4) * a3 * a3
    return b3 > a2 * a2 / 3
