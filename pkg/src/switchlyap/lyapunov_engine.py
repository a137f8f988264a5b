"""Generalized Lyapunov constants of a scaled switching system.

The scaled system switches on y = 0 and has the rotation (-y, x) as its
eps**0 linear part.  In polar coordinates each half becomes

    dr/dtheta = sum_n r**n A_n(theta) / (1 + sum_n r**(n-1) B_n(theta))

with ``x P_n + y Q_n = r**(n+1) A_n`` and ``x Q_n - y P_n = r**(n+1) B_n`` for
the homogeneous parts ``P_n, Q_n`` of the nonlinear remainder.  Expanding the
quotient and writing ``r = sum_k W_k(theta) xi**k`` gives one linear equation
per layer, ``W_k' = F_1 W_k + S_k``, where ``S_k`` only involves earlier
layers.  ``F_1`` carries at least one power of eps, so every (xi, eps) layer
costs a single antiderivative.

The displacement ``d(xi) = Pi_plus(xi) - Pi_minus^{-1}(xi)`` is computed
either by reflecting the lower half onto the upper one (default) or by
inverting the lower half-return map as a series.  Its coefficients
``V_jk`` (xi**j eps**k) form a ``LyapunovTable``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from gmpy2 import mpq

from .algebra_core import (BITS, MASK, HALF, AlgebraError, BiSeries, NotPolynomialError, ParamPoly,
                           ParamRational, Space, as_rational, format_rational, resolve_bindings,
                           series_invert, _subs_simultaneous)
from .system_model import STATE, SwitchingSystem, reflect_system
from .trig_series import PSHIFT, TrigPoly


class EngineError(AlgebraError):
    """Base class for Lyapunov-engine failures."""


class NotNormalFormError(EngineError):
    pass


class InsufficientOrderError(EngineError):
    pass


class ManualBranchRequired(EngineError):
    def __init__(self, message: str, factored: dict | None = None):
        super().__init__(message)
        self.factored = factored or {}


DEFAULT_ORDER_XI = 7
DEFAULT_ORDER_EPS = 8


# ---------------------------------------------------------------------------
# polar form


@dataclass
class PolarHalf:
    """dr/dtheta = N / (1 + D) with ``N[(n, e)]`` the r**n eps**e part, ``D[(n-1, e)]`` likewise."""

    space: Space
    numerator: dict[tuple[int, int], TrigPoly]
    denominator: dict[tuple[int, int], TrigPoly]
    segment: tuple[str, str]


@dataclass
class PolarSystem:
    upper: PolarHalf
    lower: PolarHalf


def param_space(sys: SwitchingSystem) -> Space:
    return Space(sys.params)


def _graded_components(p: ParamPoly, pspace: Space) -> dict[tuple[int, int, int], ParamPoly]:
    """Split a system polynomial into ``{(i, j, e): coefficient over pspace}``."""
    space = p.space
    out: dict[tuple[int, int, int], dict] = {}
    for k, c in p.terms.items():
        pi, e = space.decode(k)
        i, j, ee = e[0], e[1], e[2]
        pk = pspace.encode(pi, e[3:])
        out.setdefault((i, j, ee), {})[pk] = c
    return {g: ParamPoly._raw(pspace, d) for g, d in out.items()}


def system_monomials(sys: SwitchingSystem, side: str, pspace: Space | None = None
                     ) -> tuple[dict, dict]:
    pspace = pspace or param_space(sys)
    f, g = sys.half(side)
    return _graded_components(f, pspace), _graded_components(g, pspace)


def polar_half(f: ParamPoly, g: ParamPoly, pspace: Space, segment: tuple[str, str],
               drop_constant: bool = False) -> PolarHalf:
    fc = _graded_components(f, pspace)
    gc = _graded_components(g, pspace)
    one = pspace.one()
    if fc.get((0, 1, 0)) != -one or gc.get((1, 0, 0)) != one:
        raise NotNormalFormError("the eps**0 linear part must be the rotation (-y, x)")
    if fc.get((1, 0, 0)) or gc.get((0, 1, 0)):
        raise NotNormalFormError("the eps**0 linear part must be the rotation (-y, x)")
    fc = dict(fc)
    gc = dict(gc)
    del fc[(0, 1, 0)]
    del gc[(1, 0, 0)]
    for comp in (fc, gc):
        for (i, j, e) in list(comp):
            if i + j == 0:
                if not drop_constant:
                    raise NotNormalFormError("constant terms are not allowed in the polar expansion")
                del comp[(i, j, e)]
    c = TrigPoly.cos(pspace)
    s = TrigPoly.sin(pspace)
    num: dict[tuple[int, int], TrigPoly] = {}
    den: dict[tuple[int, int], TrigPoly] = {}
    # homogeneous parts P_{n,e}(cos, sin), Q_{n,e}(cos, sin)
    P: dict[tuple[int, int], TrigPoly] = {}
    Q: dict[tuple[int, int], TrigPoly] = {}
    for comp, tgt in ((fc, P), (gc, Q)):
        for (i, j, e), coef in comp.items():
            t = TrigPoly.monomial(pspace, 0, i, j, coef)
            key = (i + j, e)
            tgt[key] = tgt[key] + t if key in tgt else t
    for key in set(P) | set(Q):
        n, e = key
        p = P.get(key, TrigPoly(pspace))
        q = Q.get(key, TrigPoly(pspace))
        a = c * p + s * q
        b = c * q - s * p
        if not a.is_zero():
            num[(n, e)] = a
        if not b.is_zero():
            den[(n - 1, e)] = b
    return PolarHalf(pspace, num, den, segment)


def polar_form(sys: SwitchingSystem, drop_constant: bool = False) -> PolarSystem:
    if sys.manifold != "y":
        raise NotNormalFormError("polar_form expects the scaled system switching on y = 0")
    pspace = param_space(sys)
    return PolarSystem(polar_half(*sys.upper, pspace, ("0", "pi"), drop_constant),
                       polar_half(*sys.lower, pspace, ("pi", "2pi"), drop_constant))


def brute_force_polar(f: ParamPoly, g: ParamPoly, pspace: Space) -> tuple[TrigPoly, TrigPoly]:
    """Independent check: r' and r*theta' with x = r cos, y = r sin at r = 1 per degree.

    Returns ``(x f + y g, x g - y f)`` at r = 1 as trig polynomials (eps and
    degrees mixed together), computed straight from the monomials.
    """
    fc = _graded_components(f, pspace)
    gc = _graded_components(g, pspace)
    c, s = TrigPoly.cos(pspace), TrigPoly.sin(pspace)
    fx = TrigPoly(pspace)
    gx = TrigPoly(pspace)
    for (i, j, e), coef in fc.items():
        fx = fx + (c ** i) * (s ** j) * TrigPoly.from_poly(coef)
    for (i, j, e), coef in gc.items():
        gx = gx + (c ** i) * (s ** j) * TrigPoly.from_poly(coef)
    return c * fx + s * gx, c * gx - s * fx


# ---------------------------------------------------------------------------
# layered solution


def expand_rhs(half: PolarHalf, order_xi: int, order_eps: int) -> dict[int, dict[int, TrigPoly]]:
    """``F[n][e]``: the r**n eps**e coefficient of N/(1 + D), n < order_xi."""
    space = half.space
    nmax = order_xi - 1
    D = half.denominator
    # S = 1/(1 + D), graded by (r power, eps power)
    S: dict[tuple[int, int], TrigPoly] = {(0, 0): TrigPoly(space, {0: mpq(1)})}
    grades = sorted(((a, b) for a in range(nmax) for b in range(order_eps)), key=lambda t: (t[0] + t[1], t))
    for g in grades:
        if g == (0, 0):
            continue
        acc = TrigPoly(space)
        for (da, db), dt in D.items():
            if (da, db) == (0, 0):
                continue
            rest = (g[0] - da, g[1] - db)
            if rest[0] < 0 or rest[1] < 0:
                continue
            st = S.get(rest)
            if st is not None:
                acc.iadd_product(dt, st)
        acc.strip()
        if not acc.is_zero():
            S[g] = -acc
    F: dict[int, dict[int, TrigPoly]] = {}
    for (na, nb), nt in half.numerator.items():
        for (sa, sb), st in S.items():
            n, e = na + sa, nb + sb
            if n > nmax or e >= order_eps:
                continue
            F.setdefault(n, {}).setdefault(e, TrigPoly(space)).iadd_product(nt, st)
    for n in F:
        F[n] = {e: t.strip() for e, t in F[n].items() if not t.strip().is_zero()}
    return {n: d for n, d in F.items() if d}


@dataclass
class ReturnMapSeries:
    """Half-return map coefficients ``v[k][l]`` (xi**k eps**l) at the segment end."""

    series: BiSeries
    segment: tuple[str, str]
    layers: dict | None = None

    def v(self, k: int) -> dict[int, ParamPoly]:
        return self.series.xi_coefficient(k)


def _conv_into(out: dict[int, TrigPoly], a: dict[int, TrigPoly], b: dict[int, TrigPoly],
               order_eps: int, space: Space) -> None:
    for ea, ta in a.items():
        for eb, tb in b.items():
            e = ea + eb
            if e >= order_eps:
                continue
            tgt = out.get(e)
            if tgt is None:
                tgt = out[e] = TrigPoly(space)
            tgt.iadd_product(ta, tb)


def half_return(half: PolarHalf, order_xi: int = DEFAULT_ORDER_XI, order_eps: int = DEFAULT_ORDER_EPS,
                keep_layers: bool = False, progress: Callable[[int, int], None] | None = None
                ) -> ReturnMapSeries:
    """Solve the layer equations on the half's segment and evaluate at its end."""
    if order_xi < 2 or order_eps < 1:
        raise InsufficientOrderError("need order_xi >= 2 and order_eps >= 1")
    space = half.space
    start, end = half.segment
    F = expand_rhs(half, order_xi, order_eps)
    F1 = F.get(1, {})
    if 0 in F1:
        raise NotNormalFormError("the r-linear part of dr/dtheta must vanish at eps**0")
    W: dict[int, dict[int, TrigPoly]] = {}
    R: dict[tuple[int, int], dict[int, TrigPoly]] = {}
    out: dict[tuple[int, int], ParamPoly] = {}
    for k in range(1, order_xi):
        # powers r**n at xi**k for n >= 2
        for n in range(2, k + 1):
            acc: dict[int, TrigPoly] = {}
            for i in range(1, k - n + 2):
                prev = W[k - i] if n == 2 else R.get((n - 1, k - i))
                if prev and W.get(i):
                    _conv_into(acc, W[i], prev, order_eps, space)
            R[(n, k)] = {e: t.strip() for e, t in acc.items() if not t.strip().is_zero()}
        src: dict[int, TrigPoly] = {}
        for n in range(2, k + 1):
            if n in F and R.get((n, k)):
                _conv_into(src, F[n], R[(n, k)], order_eps, space)
        layer: dict[int, TrigPoly] = {}
        for l in range(order_eps):
            if k == 1 and l == 0:
                layer[0] = TrigPoly(space, {0: mpq(1)})
                continue
            rhs = src.get(l, TrigPoly(space)).copy()
            for e, ft in F1.items():
                if e <= l and (l - e) in layer:
                    rhs.iadd_product(ft, layer[l - e])
            rhs.strip()
            if rhs.is_zero():
                continue
            w = rhs.antiderivative(start)
            if not w.is_zero():
                layer[l] = w
        W[k] = layer
        for l, t in layer.items():
            val = t.at(end)
            if not val.is_zero():
                out[(k, l)] = val
        if progress:
            progress(k, sum(t.size() for t in layer.values()))
    series = BiSeries(space, order_xi, order_eps, out)
    return ReturnMapSeries(series, half.segment, W if keep_layers else None)


# ---------------------------------------------------------------------------
# tables


@dataclass
class LyapunovTable:
    """Coefficients ``V_jk`` of xi**j eps**k in the displacement map."""

    space: Space
    entries: dict[tuple[int, int], object]
    max_j: int
    max_k: int
    meta: dict = field(default_factory=dict)

    def entry(self, j: int, k: int):
        if j > self.max_j or k > self.max_k:
            raise InsufficientOrderError(f"V_{j}{k} lies beyond the computed orders")
        return self.entries.get((j, k), self.space.zero())

    def __getitem__(self, jk: tuple[int, int]):
        return self.entry(*jk)

    def row(self, j: int) -> dict[int, object]:
        return {k: c for (jj, k), c in sorted(self.entries.items()) if jj == j}

    def eps_zero_entries(self) -> list[tuple[int, int]]:
        """Entries at eps**0 (flagged: the usual expansion starts at eps**1)."""
        return sorted(jk for jk in self.entries if jk[1] == 0)

    def is_zero(self) -> bool:
        return all(_is_zero(v) for v in self.entries.values())

    def nonzero(self) -> list[tuple[int, int]]:
        return sorted(jk for jk, v in self.entries.items() if not _is_zero(v))

    def first_nonzero(self, order: str = "jk"):
        keys = self.nonzero()
        if order == "kj":
            keys.sort(key=lambda t: (t[1], t[0]))
        return keys[0] if keys else None

    def subs(self, bindings: Mapping[str, object]) -> "LyapunovTable":
        bound = resolve_bindings(bindings, self.space)
        new = {}
        for jk, v in self.entries.items():
            r = _subs_simultaneous(v, bound)
            if not r.is_zero():
                new[jk] = r.num if r.is_polynomial() else r
        return LyapunovTable(self.space, new, self.max_j, self.max_k, dict(self.meta))

    def cleared(self) -> "LyapunovTable":
        """Denominator-free numerators of every entry."""
        new = {jk: (v.num if isinstance(v, ParamRational) else v) for jk, v in self.entries.items()}
        return LyapunovTable(self.space, new, self.max_j, self.max_k, dict(self.meta))

    def evaluate(self, values: Mapping[str, object], pi=None) -> dict[tuple[int, int], object]:
        return {jk: v.evaluate(values, pi) for jk, v in self.entries.items()}

    def to_json_dict(self) -> dict:
        out = {}
        for (j, k) in sorted(self.entries):
            v = self.entries[(j, k)]
            out[f"V_{j}_{k}"] = v.to_text()
        return {
            "variables": list(self.space.names),
            "max_j": self.max_j,
            "max_k": self.max_k,
            "entries": out,
            "eps_zero_entries": [f"V_{j}_{k}" for j, k in self.eps_zero_entries()],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LyapunovTable":
        data = json.loads(text)
        space = Space(data["variables"])
        entries = {}
        for key, val in data["entries"].items():
            _, j, k = key.split("_")
            r = space.parse(val)
            entries[(int(j), int(k))] = r.num if r.is_polynomial() else r
        return cls(space, entries, data["max_j"], data["max_k"], data.get("meta", {}))


def _is_zero(v) -> bool:
    return v.is_zero()


def displacement_series(sys: SwitchingSystem, order_xi: int = DEFAULT_ORDER_XI,
                        order_eps: int = DEFAULT_ORDER_EPS, method: str = "reflection",
                        drop_constant: bool = False) -> BiSeries:
    """``d(xi) = Pi_plus(xi) - Pi_minus^{-1}(xi)`` as a BiSeries."""
    pspace = param_space(sys)
    upper = polar_half(*sys.upper, pspace, ("0", "pi"), drop_constant)
    plus = half_return(upper, order_xi, order_eps).series
    if method == "reflection":
        refl = reflect_system(sys)
        back = half_return(polar_half(*refl.upper, pspace, ("0", "pi"), drop_constant),
                           order_xi, order_eps).series
    elif method == "inversion":
        lower = polar_half(*sys.lower, pspace, ("pi", "2pi"), drop_constant)
        minus = half_return(lower, order_xi, order_eps).series
        back = series_invert(minus)
        back = BiSeries(pspace, order_xi, order_eps,
                        {jk: (c.as_poly() if isinstance(c, ParamRational) else c) for jk, c in back.terms.items()})
    else:
        raise ValueError(f"unknown displacement method {method!r}")
    return plus - back


def displacement(sys: SwitchingSystem, order_xi: int = DEFAULT_ORDER_XI,
                 order_eps: int = DEFAULT_ORDER_EPS, method: str = "reflection",
                 constant_terms: str = "reject") -> LyapunovTable:
    """Lyapunov table of a scaled system (switching line y = 0).

    ``constant_terms="first-order"`` accepts constant terms (such as the
    d eps**6 term): they are left out of the polar pipeline and the xi**0 row
    is filled from ``constant_term_row``.  The other rows are then those of
    the system with the constants removed.
    """
    if constant_terms not in ("reject", "first-order"):
        raise ValueError("constant_terms must be 'reject' or 'first-order'")
    drop = constant_terms == "first-order"
    d = displacement_series(sys, order_xi, order_eps, method, drop)
    entries = {jk: c for jk, c in d.terms.items()}
    if drop:
        for e, c in constant_term_row(sys).items():
            if e < order_eps:
                entries[(0, e)] = c
    meta = {"order_xi": order_xi, "order_eps": order_eps, "method": method, "constant_terms": constant_terms}
    return LyapunovTable(d.space, entries, order_xi - 1, order_eps - 1, meta)


# ---------------------------------------------------------------------------
# ladders


@dataclass
class LadderStep:
    """Annihilate entry (j, k) by solving it for ``solve_for``.

    ``binding`` instead gives an explicit branch choice ``{name: value}``
    applied before looking at the entry.
    """

    j: int | None = None
    k: int | None = None
    solve_for: str | None = None
    binding: Mapping[str, object] | None = None
    note: str = ""


@dataclass
class LadderResult:
    """Outcome of a ladder; ``solved`` keeps each target entry as it stood just before solving."""

    bindings: list[tuple[str, object]]
    transcript: list[dict]
    terminal: tuple[int, int] | None
    terminal_value: object
    table: LyapunovTable
    solved: dict[tuple[int, int], object] = field(default_factory=dict)

    def binding_map(self) -> dict[str, object]:
        return dict(self.bindings)

    def to_json_dict(self) -> dict:
        tv = self.terminal_value
        return {
            "bindings": [{"name": n, "value": v.to_text()} for n, v in self.bindings],
            "transcript": self.transcript,
            "terminal": None if self.terminal is None else f"V_{self.terminal[0]}_{self.terminal[1]}",
            "terminal_value": None if tv is None else tv.to_text(),
            "terminal_factored": None if tv is None else _factored_text(tv),
        }


def _factored_text(v) -> dict:
    r = v if isinstance(v, ParamRational) else ParamRational(v)
    f = r.factored()
    f = dict(f)
    f["content"] = format_rational(f["content"])
    return f


def solve_linear(entry, name: str):
    """Solve ``entry = 0`` for ``name``; ``entry`` must be linear in it."""
    r = entry if isinstance(entry, ParamRational) else ParamRational(entry)
    num = r.num
    if num.min_degree(name) < 0:
        raise ManualBranchRequired(f"{name} appears with a negative power", ParamRational(num).factored())
    coll = num.collect(name)
    if max(coll) != 1:
        raise ManualBranchRequired(f"entry is not linear in {name}", ParamRational(num).factored())
    a = coll.get(1)
    b = coll.get(0, num.space.zero())
    if a is None or a.is_zero():
        raise ManualBranchRequired(f"entry does not involve {name}", ParamRational(num).factored())
    sol = ParamRational(-b) / a
    return sol.num if sol.is_polynomial() else sol


def linear_candidates(entry, bound: Iterable[str] = ()) -> list[str]:
    r = entry if isinstance(entry, ParamRational) else ParamRational(entry)
    out = []
    for name in r.num.variables():
        if name in bound:
            continue
        coll = r.num.collect(name)
        if max(coll) == 1 and min(coll) >= 0 and not coll[1].is_zero():
            out.append(name)
    return out


TableSource = LyapunovTable | Callable[[Mapping[str, object]], LyapunovTable]


def constant_ladder(source: TableSource, solve_order: Sequence[LadderStep | tuple],
                    scan: str = "jk") -> LadderResult:
    """Run a chain of annihilation steps and report the first surviving entry.

    ``source`` is a table (bindings are substituted into its entries) or a
    callable that recomputes the table for the bindings so far.  Each step
    names the target entry and the parameter to solve for; a step without
    ``solve_for`` is only accepted when the entry is linear in exactly one
    free parameter.  Branch choices are always explicit.
    """
    bindings: dict[str, object] = {}
    order: list[tuple[str, object]] = []
    transcript: list[dict] = []
    solved: dict[tuple[int, int], object] = {}

    def current() -> LyapunovTable:
        if isinstance(source, LyapunovTable):
            return source.subs(bindings) if bindings else source
        return source(dict(bindings))

    def bind(name: str, value) -> None:
        # keep the chain explicit: earlier right-hand sides see the new value
        for n in list(bindings):
            v = bindings[n]
            space = v.space
            if name in space.index:
                r = _subs_simultaneous(v, resolve_bindings({name: value}, space))
                bindings[n] = r.num if r.is_polynomial() else r
        bindings[name] = value
        order.append((name, value))

    table = current()
    for raw in solve_order:
        step = raw if isinstance(raw, LadderStep) else LadderStep(*raw)
        if step.binding:
            for name, val in step.binding.items():
                value = as_rational(val, table.space)
                value = value.num if value.is_polynomial() else value
                bind(name, value)
                transcript.append({"branch": name, "value": value.to_text(), "note": step.note})
            table = current()
            if step.j is None:
                continue
        entry = table.entry(step.j, step.k)
        if entry.is_zero():
            transcript.append({"entry": f"V_{step.j}_{step.k}", "status": "already zero", "note": step.note})
            continue
        name = step.solve_for
        if name is None:
            cands = linear_candidates(entry, bindings)
            if len(cands) != 1:
                raise ManualBranchRequired(
                    f"V_{step.j}_{step.k}: choose what to solve for (linear in {cands or 'nothing'})",
                    _factored_text(entry))
            name = cands[0]
        value = solve_linear(entry, name)
        solved[(step.j, step.k)] = entry
        transcript.append({"entry": f"V_{step.j}_{step.k}", "solve_for": name,
                           "value": value.to_text(), "note": step.note})
        bind(name, value)
        table = current()
        if not table.entry(step.j, step.k).is_zero():
            raise EngineError(f"V_{step.j}_{step.k} did not vanish after solving for {name}")
    terminal = table.first_nonzero(scan)
    value = table.entry(*terminal) if terminal else None
    return LadderResult(order, transcript, terminal, value, table, solved)


def annihilate(table: LyapunovTable, unknowns: Sequence[str], order: str = "kj") -> LadderResult:
    """Clear entries one at a time by solving for the first listed unknown each is linear in.

    No case split is ever taken: an entry with no usable unknown stops the
    run and is reported as the terminal entry.
    """
    free = list(unknowns)
    steps: list[LadderStep] = []
    current = table
    while True:
        target = current.first_nonzero(order)
        if target is None:
            break
        entry = current.entry(*target)
        cands = [n for n in free if n in linear_candidates(entry)]
        if not cands:
            break
        steps.append(LadderStep(target[0], target[1], cands[0]))
        free.remove(cands[0])
        current = constant_ladder(table, steps, order).table
    return constant_ladder(table, steps, order)


def constant_term_row(sys: SwitchingSystem) -> dict[int, ParamPoly]:
    """Leading xi**0 displacement from constant terms in y' (first order in the constants).

    A constant c in y' shifts the rotation centre to (-c, 0), so the upper
    half-return gains 2c and the reflected lower one gains 2c of its own.
    Constants in x' only slide the centre along the section and do not move
    the crossing point at first order.
    """
    pspace = param_space(sys)
    out: dict[int, ParamPoly] = {}
    for side, sign in (("p", 2), ("m", -2)):
        _, g = sys.half(side)
        for (i, j, e), coef in _graded_components(g, pspace).items():
            if i == 0 and j == 0:
                out[e] = out.get(e, pspace.zero()) + coef * sign
    return {e: c for e, c in out.items() if not c.is_zero()}
