"""Center certificates and the global-center test for the cubic switching Lienard pair."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from gmpy2 import mpq

from .algebra_core import ParamPoly, Space, format_rational
from .system_model import (LienardCoeffs, STATE, SwitchingSystem, SystemError_, UndecidableError,
                           build_lienard)

CONDITIONS = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")


class TheoremHypothesisError(SystemError_):
    """b2p >= 0 and b2m <= 0 are assumed by the center theorem."""


class UnsupportedCertificateError(SystemError_):
    pass


@dataclass
class CenterCertificate:
    kind: str
    data: dict
    checked: bool
    details: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "checked": self.checked, "data": self.data, "details": self.details}


# ---------------------------------------------------------------------------
# theorem conditions


def _values(coeffs: LienardCoeffs) -> dict[str, mpq]:
    symbolic = sorted(coeffs.symbols())
    if symbolic:
        raise UndecidableError("deciding the center conditions needs concrete coefficients", symbolic)
    out = {}
    for s in "pm":
        for i in range(4):
            out[f"a{i}{s}"] = coeffs.rational(f"a{i}{s}")
            out[f"b{i}{s}"] = coeffs.rational(f"b{i}{s}")
    return out


def condition_table(coeffs: LienardCoeffs) -> dict[str, bool]:
    """Truth value of each of conditions I..VIII for concrete coefficients."""
    v = _values(coeffs)
    if v["b2p"] < 0 or v["b2m"] > 0:
        raise TheoremHypothesisError("the center conditions assume b2p >= 0 and b2m <= 0")
    a2p, a3p, b2p, b3p = v["a2p"], v["a3p"], v["b2p"], v["b3p"]
    a2m, a3m, b2m, b3m = v["a2m"], v["a3m"], v["b2m"], v["b3m"]
    no_a = a2p == a2m == a3p == a3m == 0
    return {
        "I": no_a and b2m == 0 and b2p > 0 and b3m > 0,
        "II": no_a and b2p > 0 and b2m < 0,
        "III": (a2p == a2m == b3p == b3m == 0 and a3p * b2m - a3m * b2p == 0
                and a3p * (b2p + b2m) != 0 and b2p > 0 and b2m < 0),
        "IV": a2m == a2p and a3m == -a3p and b2m == -b2p and b2m < 0 and b3m == b3p,
        "V": no_a and b2p == 0 and b2m < 0 and b3p > 0,
        "VI": a2p == a2m == b2p == b2m == 0 and a3m == -a3p and b3m == b3p and b3p > mpq(3, 4) * a3p**2,
        "VII": no_a and b2p == b2m == 0 and b3p > 0 and b3m > 0,
        "VIII": (a2m == a2p and a2p != 0 and a3m == -a3p and b2p == b2m == 0
                 and b3m == b3p and b3p > a2p**2 / 3),
    }


def match_center_condition(coeffs: LienardCoeffs) -> list[str]:
    return [c for c, ok in condition_table(coeffs).items() if ok]


# ---------------------------------------------------------------------------
# symmetry


def _mirror(p: ParamPoly, var: str, sign: int) -> ParamPoly:
    """``sign * p`` with ``var -> -var``."""
    space = p.space
    idx = space.index[var]
    out = {}
    for k, c in p.terms.items():
        _, e = space.decode(k)
        out[k] = c * sign * (-1 if e[idx] % 2 else 1)
    return ParamPoly._raw(space, out)


def verify_symmetry(sys: SwitchingSystem, axis: str) -> CenterCertificate:
    """Reversibility under (x, y, t) -> (-x, y, -t) (axis 'y') or (x, -y, -t) (axis 'x').

    When the mirror exchanges the two sides of the switching line the lower
    half must be the mirror image of the upper one; otherwise each half must
    be its own mirror image.
    """
    if axis not in ("x", "y"):
        raise ValueError("axis is 'x' or 'y'")
    flip = "x" if axis == "y" else "y"

    def image(half):
        f, g = half
        if axis == "y":
            return (_mirror(f, "x", 1), _mirror(g, "x", -1))
        return (_mirror(f, "y", -1), _mirror(g, "y", 1))

    details = []
    if sys.manifold == flip:
        pairs = [("lower", sys.lower, image(sys.upper))]
    else:
        pairs = [("upper", sys.upper, image(sys.upper)), ("lower", sys.lower, image(sys.lower))]
    ok = True
    for label, have, want in pairs:
        for comp, h, w in zip(("dx/dt", "dy/dt"), have, want):
            if h != w:
                ok = False
                details.append(f"{label} {comp}: residual {(h - w).to_text()}")
    kind = "y-axis-symmetry" if axis == "y" else "x-axis-symmetry"
    mapping = "(x, y, t) -> (-x, y, -t)" if axis == "y" else "(x, y, t) -> (x, -y, -t)"
    return CenterCertificate(kind, {"map": mapping, "exchanges_halves": sys.manifold == flip}, ok, details)


# ---------------------------------------------------------------------------
# first integrals


def _integrate(p: ParamPoly, name: str) -> ParamPoly:
    space = p.space
    idx = space.index[name]
    vk = space.var_key(name)
    out = {}
    for k, c in p.terms.items():
        _, e = space.decode(k)
        if e[idx] == -1:
            raise UnsupportedCertificateError("logarithmic antiderivative")
        out[k + vk] = c / (e[idx] + 1)
    return ParamPoly._raw(space, out)


def hamiltonian(half: tuple[ParamPoly, ParamPoly]) -> ParamPoly | None:
    """H with x' = H_y, y' = -H_x, or None when the half is not Hamiltonian."""
    f, g = half
    if not (f.diff("x") + g.diff("y")).is_zero():
        return None
    h = _integrate(f, "y")
    rest = -g - h.diff("x")
    return h + _integrate(rest, "x")


def _at_x0(p: ParamPoly) -> ParamPoly:
    return p.subs_poly({"x": 0})


def _even_in_y(p: ParamPoly) -> bool:
    return _mirror(p, "y", 1) == p


def _log_form(sys: SwitchingSystem):
    """Data (alpha, beta, L+, L-) of I = alpha*y + beta*ln|L| when the pair has the (y - a3 x^3, -b2 x^2) shape."""
    space = sys.space
    got = {}
    for s in "pm":
        f = sys.coefficients(s, 0)
        g = sys.coefficients(s, 1)
        if set(f) - {(0, 1), (3, 0)} or set(g) - {(2, 0)} or f.get((0, 1)) != space.one():
            return None
        got[s] = (-f.get((3, 0), space.zero()), -g.get((2, 0), space.zero()))
    (a3p, b2p), (a3m, _) = got["p"], got["m"]
    x, y = space.var("x"), space.var("y")
    alpha = -3 * a3p
    beta = b2p
    lp = -3 * a3p * a3p * x**3 + 3 * a3p * y + b2p
    lm = -3 * a3p * a3m * x**3 + 3 * a3p * y + b2p
    return alpha, beta, lp, lm


def verify_first_integral(sys: SwitchingSystem) -> CenterCertificate:
    """Polynomial Hamiltonians on both halves, or the logarithmic integrals of the (y - a3 x^3, -b2 x^2) pair.

    The line must be x = 0.  Checks are exact polynomial identities: the
    derivative along each half vanishes, and the restrictions to x = 0 agree.
    """
    if sys.manifold != "x":
        raise UnsupportedCertificateError("first-integral certificates are stated on the line x = 0")
    hp, hm = hamiltonian(sys.upper), hamiltonian(sys.lower)
    if hp is not None and hm is not None:
        details = []
        ok = True
        for label, h, (f, g) in (("upper", hp, sys.upper), ("lower", hm, sys.lower)):
            dh = h.diff("x") * f + h.diff("y") * g
            if not dh.is_zero():
                ok = False
                details.append(f"{label}: dH/dt = {dh.to_text()}")
        # the additive constant is free; compare restrictions up to it
        rp, rm = _at_x0(hp), _at_x0(hm)
        if not (rp - rm).is_constant():
            ok = False
            details.append(f"restrictions differ: {(rp - rm).to_text()}")
        even = _even_in_y(rp) and _even_in_y(rm)
        return CenterCertificate("hamiltonian-matching",
                                 {"H+": hp.to_text(), "H-": hm.to_text(), "restrictions_even_in_y": even},
                                 ok, details)
    form = _log_form(sys)
    if form is None:
        raise UnsupportedCertificateError("no polynomial Hamiltonian or logarithmic integral fits this pair")
    alpha, beta, lp, lm = form
    details = []
    ok = True
    for label, L, (f, g) in (("upper", lp, sys.upper), ("lower", lm, sys.lower)):
        ldot = L.diff("x") * f + L.diff("y") * g
        # d/dt(alpha*y + beta*ln L) * L
        ident = alpha * g * L + beta * ldot
        if not ident.is_zero():
            ok = False
            details.append(f"{label}: L*dI/dt = {ident.to_text()}")
        # mu = const/L is an integrating factor iff L*div - dL/dt = 0
        div = f.diff("x") + g.diff("y")
        mu_ident = L * div - ldot
        if not mu_ident.is_zero():
            ok = False
            details.append(f"{label}: integrating-factor residual {mu_ident.to_text()}")
    if _at_x0(lp) != _at_x0(lm):
        ok = False
        details.append("log arguments differ on x = 0")
    if not beta.is_zero() and beta.is_constant() and beta.constant_value() <= 0:
        details.append("b2p <= 0: the log argument changes sign near the origin")
    data = {"alpha": alpha.to_text(), "beta": beta.to_text(), "L+": lp.to_text(), "L-": lm.to_text(),
            "integral": "alpha*y + beta*ln|L|", "integrating_factor": "const/L"}
    return CenterCertificate("log-first-integral", data, ok, details)


def certify(coeffs: LienardCoeffs) -> list[CenterCertificate]:
    """Certificates matching the conditions satisfied by ``coeffs``."""
    conds = match_center_condition(coeffs)
    sys = build_lienard(coeffs)
    out = []
    if {"I", "II", "V", "VII", "III"} & set(conds):
        out.append(verify_first_integral(sys))
    if {"IV", "VI", "VIII"} & set(conds):
        out.append(verify_symmetry(sys, "y"))
    return out


# ---------------------------------------------------------------------------
# infinity


def chart_space(params: tuple[str, ...]) -> Space:
    return Space(("u", "w", "eps") + tuple(params))


def _homogenize(p: ParamPoly, target: Space, chart: str, degree: int, shift: int) -> ParamPoly:
    """``w**(degree + shift) * p`` in the chart coordinates (x, y) = (1/w, u/w) or (u/w, 1/w)."""
    src = p.space
    out = {}
    for k, c in p.terms.items():
        pi, e = src.decode(k)
        i, j = e[0], e[1]
        if chart == "U1":
            u_e, w_e = j, degree + shift - i - j
        else:
            u_e, w_e = i, degree + shift - i - j
        if w_e < 0:
            raise ValueError("degree too small for the chart")
        nk = target.encode(pi, (u_e, w_e) + tuple(e[2:]))
        out[nk] = out.get(nk, 0) + c
    return ParamPoly(target, out)


def chart_field(half: tuple[ParamPoly, ParamPoly], chart: str, degree: int = 3) -> tuple[ParamPoly, ParamPoly]:
    """Poincare chart of one half: U1 uses (x, y) = (1/w, u/w), U2 uses (u/w, 1/w).

    ``u' = w**d (Q - u P)``, ``w' = -w**(d+1) P`` in U1 and the same with P
    and Q exchanged in U2.  W1/W2 are the same fields times (-1)**(d-1).
    """
    f, g = half
    space = chart_space(f.space.names[3:])
    u, w = space.var("u"), space.var("w")
    sign = 1
    if chart in ("W1", "W2"):
        sign = (-1) ** (degree - 1)
        chart = "U" + chart[1]
    P = _homogenize(f, space, chart, degree, 0)
    Q = _homogenize(g, space, chart, degree, 0)
    if chart == "U1":
        du, dw = Q - u * P, -w * P
    elif chart == "U2":
        du, dw = P - u * Q, -w * Q
    else:
        raise ValueError(f"unknown chart {chart!r}")
    return du * sign, dw * sign


def _divide_monomial(p: ParamPoly, name: str, power: int) -> ParamPoly:
    space = p.space
    vk = space.var_key(name)
    return ParamPoly._raw(space, {k - power * vk: c for k, c in p.terms.items()})


def blow_up(field_uw: tuple[ParamPoly, ParamPoly]) -> tuple[ParamPoly, ParamPoly]:
    """Directional blow-up w = u*v: returns (u', v') with v' = (w' - v u')/u, common factors of u removed.

    The result lives in the same space with ``w`` standing for the new
    variable v.
    """
    du, dw = field_uw
    space = du.space
    u, w = space.var("u"), space.var("w")

    def sub(p: ParamPoly) -> ParamPoly:
        out = {}
        wk, uk = space.var_key("w"), space.var_key("u")
        for k, c in p.terms.items():
            _, e = space.decode(k)
            nk = k + e[1] * uk
            out[nk] = out.get(nk, 0) + c
        return ParamPoly(space, out)

    su, sw = sub(du), sub(dw)
    dv = _divide_monomial(sw - w * su, "u", 1)
    # remove the largest common power of u
    m = min(min((space.decode(k)[1][0] for k in q.terms), default=99) for q in (su, dv) if q.terms)
    return _divide_monomial(su, "u", m), _divide_monomial(dv, "u", m)


def _sign_plus_sqrt(a: mpq, s: int, D: mpq) -> int:
    """Sign of a + s*sqrt(D) for D >= 0, exactly."""
    if D == 0:
        return (a > 0) - (a < 0)
    if a == 0:
        return s
    if (a > 0) == (s > 0):
        return 1 if a > 0 else -1
    d = a * a - D
    if d == 0:
        return 0
    return (1 if a > 0 else -1) if d > 0 else s


def _type_from_signs(l1: int, l2: int) -> str:
    if l1 == 0 or l2 == 0:
        return "saddle-node" if (l1 or l2) else "degenerate"
    return "node" if l1 == l2 else "saddle"


@dataclass
class InfinitePoint:
    chart: str
    point: tuple[str, str]
    kind: str
    note: str = ""

    def to_json_dict(self) -> dict:
        return {"chart": self.chart, "point": list(self.point), "kind": self.kind, "note": self.note}


def classify_infinity(coeffs: LienardCoeffs) -> list[InfinitePoint]:
    """Infinite singular points per half: the x-direction in U1/W1 and the blown-up U2/W2 origin."""
    v = _values(coeffs)
    out: list[InfinitePoint] = []
    for s, c1, c2 in (("p", "U1", "U2"), ("m", "W1", "W2")):
        a2, a3, b2, b3 = v[f"a2{s}"], v[f"a3{s}"], v[f"b2{s}"], v[f"b3{s}"]
        # x-direction: u' = -b3 + a3 u at w = 0
        if a3 != 0:
            out.append(InfinitePoint(c1, (format_rational(b3 / a3), "0"), "node", "eigenvalues a3, a3"))
        elif b3 == 0 and a2 != 0:
            out.append(InfinitePoint(c1, (format_rational(b2 / a2), "0"), "node",
                                     "degree-two half; eigenvalues a2, a2"))
        # y-direction: origin of U2/W2
        if a3 != 0:
            out.append(InfinitePoint(c2, ("0", "0"), "not-analyzed", "a3 != 0"))
            continue
        if b3 == 0:
            kind = "node" if b2 != 0 else "degenerate"
            out.append(InfinitePoint(c2, ("0", "0"), kind, "degree-two half: nilpotent node"))
            continue
        D = a2 * a2 - 2 * b3
        out.append(InfinitePoint(c2 + "/E1", ("0", "0"), "saddle", "second blow-up, eigenvalues b3, -b3"))
        if D >= 0:
            for sgn in ((1, -1) if D > 0 else (1,)):
                # eigenvalues b3/2 and -V*(4V* - 2a2) with V* = (a2 + sgn*sqrt(D))/2
                l1 = 1 if b3 > 0 else -1
                sv = _sign_plus_sqrt(a2, sgn, D)
                sroot = sgn if D > 0 else 0
                l2 = -sv * sroot
                name = "E2" if sgn == 1 else "E3"
                pt = f"({format_rational(a2)} {'+' if sgn > 0 else '-'} sqrt({format_rational(D)}))/2"
                out.append(InfinitePoint(f"{c2}/{name}", (pt, "0"), _type_from_signs(l1, l2)))
        hyperbolic_only = D < 0
        out.append(InfinitePoint(c2, ("0", "0"),
                                 "two-hyperbolic-sectors" if hyperbolic_only else "hyperbolic-and-parabolic",
                                 f"(a2)^2 - 2 b3 = {format_rational(D)}"))
    return out


@dataclass
class GlobalReport:
    conditions: list[str]
    finite_virtual: dict[str, bool]
    virtual_points: dict[str, object]
    infinity: list[InfinitePoint]
    sector_condition: dict[str, bool]
    g_sets: list[str]
    verdict: str
    notes: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "conditions": self.conditions,
            "finite_virtual": self.finite_virtual,
            "virtual_points": self.virtual_points,
            "infinity": [p.to_json_dict() for p in self.infinity],
            "sector_condition": self.sector_condition,
            "g_sets": self.g_sets,
            "verdict": self.verdict,
            "notes": self.notes,
        }


def global_sets(coeffs: LienardCoeffs) -> list[str]:
    v = _values(coeffs)
    out = []
    if (v["a2p"] == v["a2m"] == v["a3p"] == v["a3m"] == 0 and v["b3p"] > 0 and v["b3m"] > 0):
        out.append("G1")
    if (v["a2m"] == v["a2p"] and v["a3p"] == v["a3m"] == 0 and v["b2m"] == -v["b2p"]
            and v["b3m"] == v["b3p"] and v["b3p"] > v["a2p"] ** 2 / 2):
        out.append("G2")
    return out


def check_global_center(coeffs: LienardCoeffs) -> GlobalReport:
    v = _values(coeffs)
    conds = match_center_condition(coeffs)
    gsets = global_sets(coeffs)
    virtual = {}
    points: dict[str, object] = {}
    for s, key, sign in (("p", "+", 1), ("m", "-", -1)):
        a2, a3, b2, b3 = v[f"a2{s}"], v[f"a3{s}"], v[f"b2{s}"], v[f"b3{s}"]
        if b3 == 0:
            virtual[key] = True
            points[key] = None
            continue
        xe = -b2 / b3
        ye = -(b2 * b2) * (a3 * b2 - a2 * b3) / b3**3
        points[key] = [format_rational(xe), format_rational(ye)]
        virtual[key] = sign * xe <= 0
    sectors = {"+": v["a2p"] ** 2 - 2 * v["b3p"] < 0, "-": v["a2m"] ** 2 - 2 * v["b3m"] < 0}
    notes = []
    if not conds:
        return GlobalReport(conds, virtual, points, [], sectors, gsets, "not-global",
                            ["no center condition holds"])
    inf = classify_infinity(coeffs)
    bad = [p for p in inf if p.kind in ("node", "hyperbolic-and-parabolic", "not-analyzed", "degenerate")
           and "/" not in p.chart]
    ok = all(virtual.values()) and not bad and all(sectors.values()) and v["a3p"] == v["a3m"] == 0
    for p in bad:
        notes.append(f"{p.chart} ({', '.join(p.point)}): {p.kind}")
    verdict = "global" if ok else "not-global"
    if ok != bool(gsets):
        verdict = "inconclusive"
        notes.append("infinity analysis and the G1/G2 sets disagree")
    return GlobalReport(conds, virtual, points, inf, sectors, gsets, verdict, notes)
