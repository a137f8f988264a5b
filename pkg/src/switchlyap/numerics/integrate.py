"""Adaptive Taylor integration of switching systems with event location on the switching line.

Each step expands the solution to high order by Cauchy products, so the
step polynomial doubles as dense output: crossings are located on it by
bisection followed by Newton steps, at the working precision.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import gmpy2
from gmpy2 import mpfr

from ..system_model import LienardCoeffs, SwitchingSystem, build_lienard
from .field import DEFAULT_BITS, NumericField, NumericSystem, horner, numeric_system, precision, sci, to_mpfr


class IntegrationError(Exception):
    pass


class StiffnessError(IntegrationError):
    """The step size underflowed."""


class EventError(IntegrationError):
    """A sign change could not be bracketed or refined."""


class EscapeError(IntegrationError):
    """The orbit left the working region before reaching the section."""


@dataclass
class Trajectory:
    samples: list[tuple[mpfr, mpfr, mpfr]] = field(default_factory=list)
    events: list[tuple[mpfr, str]] = field(default_factory=list)
    regimes: list[tuple[mpfr, mpfr, str]] = field(default_factory=list)

    def regime_at(self, t) -> str | None:
        for a, b, r in self.regimes:
            if a <= t <= b:
                return r
        return None

    def to_csv(self, path: str, digits: int = 30) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "regime"])
            for t, x, y in self.samples:
                w.writerow([_fmt(t, digits), _fmt(x, digits), _fmt(y, digits), self.regime_at(t) or ""])


def _fmt(v, digits: int) -> str:
    return sci(v, digits)


def _order_for(tol) -> int:
    return max(12, int(math.ceil(-math.log(float(tol)) / 2)) + 4)


def _step_size(X: list, Y: list, tol, scale) -> mpfr:
    n = len(X) - 1
    bound = tol * max(scale, mpfr(1))
    h = None
    # a window of orders, since odd or even orders can vanish identically
    for k in range(max(1, n - 7), n + 1):
        c = max(abs(X[k]), abs(Y[k]))
        if c == 0:
            continue
        cand = (bound / c) ** (mpfr(1) / k)
        h = cand if h is None else min(h, cand)
    if h is None:
        return mpfr("inf")
    return h * mpfr("0.9")


def _refine_root(S: list, a, b, tol) -> mpfr:
    """Root of the polynomial S on [a, b] where S changes sign."""
    fa = horner(S, a)
    fb = horner(S, b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise EventError("no sign change in the bracket")
    dS = [k * S[k] for k in range(1, len(S))]
    for _ in range(60):
        m = (a + b) / 2
        fm = horner(S, m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
        if b - a < (b + a) * mpfr(2) ** -40:
            break
    t = (a + b) / 2
    eps = mpfr(2) ** (-gmpy2.get_context().precision + 8)
    for _ in range(60):
        d = horner(dS, t)
        if d == 0:
            break
        nt = t - horner(S, t) / d
        if nt < a or nt > b:
            break
        if abs(nt - t) <= eps * max(abs(t), mpfr(1)):
            t = nt
            break
        t = nt
    return t


@dataclass
class _Hit:
    t: mpfr
    point: tuple[mpfr, mpfr]


def _flow_to_line(F: NumericField, start: tuple, axis: int, tol, t_max, rmax,
                  on_line: bool, traj: Trajectory | None = None, t0=mpfr(0), order: int | None = None,
                  hmin=None) -> _Hit:
    """Integrate ``F`` from ``start`` until the coordinate ``axis`` changes sign."""
    order = order or _order_for(tol)
    hmin = hmin if hmin is not None else mpfr(2) ** (-gmpy2.get_context().precision // 2)
    x, y = mpfr(start[0]), mpfr(start[1])
    t = mpfr(0)
    leaving = on_line
    sign0 = None
    while True:
        X, Y = F.taylor(x, y, order)
        S = X if axis == 0 else Y
        h = _step_size(X, Y, tol, max(abs(x), abs(y)))
        h = min(h, t_max - t)
        if h <= 0:
            raise EscapeError("time limit reached before the section")
        if h < hmin:
            raise StiffnessError(f"step underflow at t = {float(t):.6g}")
        poly = S
        if leaving:
            # on the line: S(0) = 0, so look at S(t)/t instead
            poly = S[1:]
            if poly[0] == 0:
                poly = S[2:]
        if sign0 is None:
            sign0 = poly[0] > 0
        # sample the step polynomial for a sign change
        prev = mpfr(0)
        hit = None
        for k in range(1, 9):
            tk = h * k / 8
            v = horner(poly, tk)
            if v == 0 or (v > 0) != sign0:
                hit = _refine_root(poly, prev, tk, tol)
                break
            prev = tk
        if hit is not None:
            px, py = horner(X, hit), horner(Y, hit)
            if axis == 0:
                px = mpfr(0)
            else:
                py = mpfr(0)
            if traj is not None:
                traj.samples.append((t0 + (t + hit), px, py))
            return _Hit(t + hit, (px, py))
        x, y = horner(X, h), horner(Y, h)
        t += h
        leaving = False
        if traj is not None:
            traj.samples.append((t0 + t, x, y))
        if abs(x) > rmax or abs(y) > rmax:
            raise EscapeError("orbit left the working region")


def _normal(F: NumericField, p: tuple, axis: int) -> mpfr:
    return F(*p)[axis]


def _tangent(F: NumericField, p: tuple, axis: int) -> mpfr:
    return F(*p)[1 - axis]


def numeric_return_map(sys: SwitchingSystem | NumericSystem, xi, eps=0, values: Mapping[str, object] | None = None,
                       bits: int = DEFAULT_BITS, tol=None, rmax=None) -> tuple[mpfr, mpfr]:
    """Half-return maps (Pi_plus(xi), Pi_minus^{-1}(xi)) of a system switching on y = 0.

    The upper half is followed forward from (xi, 0) to the negative x-axis;
    the lower half is followed backward from (xi, 0).  Both results are the
    distances of the landing points from the origin.
    """
    nsys = sys if isinstance(sys, NumericSystem) else numeric_system(sys, values, eps, bits)
    if nsys.manifold != "y":
        raise ValueError("numeric_return_map expects the switching line y = 0")
    with precision(nsys.bits):
        xi = to_mpfr(xi)
        tol = to_mpfr(tol) if tol is not None else mpfr(2) ** (-nsys.bits + 16)
        rmax = to_mpfr(rmax) if rmax is not None else 100 * abs(xi) + 10
        tmax = mpfr(100)
        up = _flow_to_line(nsys.upper, (xi, mpfr(0)), 1, tol, tmax, rmax, True)
        down = _flow_to_line(nsys.lower.negated(), (xi, mpfr(0)), 1, tol, tmax, rmax, True)
        return -up.point[0], -down.point[0]


def integrate_switching(nsys: NumericSystem, start: tuple, t_end, tol=None, rmax=None,
                        max_events: int = 10_000, slide_steps: int = 200) -> Trajectory:
    """Integrate the switching system from ``start`` up to time ``t_end``.

    On the line the side is picked from the normal components of the two
    halves: transversal points are crossed, attracting points (both fields
    pointing at the line) start a Filippov sliding phase.  Sliding uses the
    convex combination of the two fields and is experimental.
    """
    axis = nsys.axis
    with precision(nsys.bits):
        tol = to_mpfr(tol) if tol is not None else mpfr(2) ** (-nsys.bits + 16)
        rmax = to_mpfr(rmax) if rmax is not None else mpfr(10) ** 6
        t_end = to_mpfr(t_end)
        p = (to_mpfr(start[0]), to_mpfr(start[1]))
        t = mpfr(0)
        traj = Trajectory(samples=[(t, p[0], p[1])])
        on_line = p[axis] == 0
        side = None if on_line else ("upper" if p[axis] > 0 else "lower")
        for _ in range(max_events):
            if side is None:
                nu, nl = _normal(nsys.upper, p, axis), _normal(nsys.lower, p, axis)
                if nu > 0 and nl >= 0:
                    side = "upper"
                    traj.events.append((t, "cross-up"))
                elif nl < 0 and nu <= 0:
                    side = "lower"
                    traj.events.append((t, "cross-down"))
                elif nu <= 0 <= nl:
                    traj.events.append((t, "sliding-entry"))
                    t, p, side = _slide(nsys, p, t, t_end, traj, slide_steps)
                    if side is None:
                        return traj
                    traj.events.append((t, "sliding-exit"))
                else:
                    # repelling sliding: leave along the upper half
                    side = "upper"
                    traj.events.append((t, "cross-up"))
            F = nsys.half(side)
            try:
                hit = _flow_to_line(F, p, axis, tol, t_end - t, rmax, on_line or p[axis] == 0, traj, t)
            except EscapeError as exc:
                if "time limit" in str(exc):
                    traj.regimes.append((t, t_end, side))
                    # finish the last partial step
                    rem = t_end - traj.samples[-1][0]
                    if rem > 0:
                        x, y = traj.samples[-1][1], traj.samples[-1][2]
                        X, Y = F.taylor(x, y, _order_for(tol))
                        traj.samples.append((t_end, horner(X, rem), horner(Y, rem)))
                    return traj
                raise
            traj.regimes.append((t, t + hit.t, side))
            t += hit.t
            p = hit.point
            on_line = True
            side = None
            if t >= t_end:
                return traj
        return traj


def _slide(nsys: NumericSystem, p: tuple, t, t_end, traj: Trajectory, steps: int):
    """Filippov sliding along the line until one normal component changes sign."""
    axis = nsys.axis
    U, L = nsys.upper, nsys.lower

    def speed(s):
        q = (mpfr(0), s) if axis == 0 else (s, mpfr(0))
        nu, nl = _normal(U, q, axis), _normal(L, q, axis)
        lam = nl / (nl - nu) if nl != nu else mpfr("0.5")
        return lam * _tangent(U, q, axis) + (1 - lam) * _tangent(L, q, axis), nu, nl

    s = p[1 - axis]
    h = mpfr("1e-3")
    t_start = t
    while t < t_end:
        v1, nu, nl = speed(s)
        if nu > 0 or nl < 0:
            break
        v2, _, _ = speed(s + h * v1 / 2)
        v3, _, _ = speed(s + h * v2 / 2)
        v4, _, _ = speed(s + h * v3)
        s = s + h * (v1 + 2 * v2 + 2 * v3 + v4) / 6
        t += h
        q = (mpfr(0), s) if axis == 0 else (s, mpfr(0))
        traj.samples.append((t, q[0], q[1]))
        steps -= 1
        if steps <= 0:
            break
    traj.regimes.append((t_start, t, "sliding"))
    q = (mpfr(0), s) if axis == 0 else (s, mpfr(0))
    nu, nl = _normal(U, q, axis), _normal(L, q, axis)
    if nu > 0:
        return t, q, "upper"
    if nl < 0:
        return t, q, "lower"
    return t, q, None


def sliding_segment(nsys: NumericSystem, guess=0, tol=None) -> tuple[mpfr, mpfr] | None:
    """Endpoints of the sliding set near ``guess`` on the line, as tangential coordinates.

    The endpoints are the zeros of the two normal components; the segment
    is returned when the two normal components have opposite signs between
    them, so orbits cannot cross.  That covers attracting sliding and the
    escaping (repelling) variant.
    """
    axis = nsys.axis
    with precision(nsys.bits):
        tol = to_mpfr(tol) if tol is not None else mpfr(2) ** (-nsys.bits + 16)
        ends = []
        for F in (nsys.upper, nsys.lower):
            coeffs: dict[int, mpfr] = {}
            for i, j, c in F.g if axis == 1 else F.f:
                k = j if axis == 0 else i
                if (i if axis == 0 else j) == 0:
                    coeffs[k] = coeffs.get(k, mpfr(0)) + c
            poly = [coeffs.get(k, mpfr(0)) for k in range(max(coeffs, default=0) + 1)]
            ends.append(_newton_root(poly, to_mpfr(guess)))
        a, b = sorted(ends)
        mid = (a + b) / 2
        q = (mpfr(0), mid) if axis == 0 else (mid, mpfr(0))
        nu, nl = _normal(nsys.upper, q, axis), _normal(nsys.lower, q, axis)
        if a != b and nu * nl < 0:
            return a, b
        return None


def _newton_root(poly: list, x0) -> mpfr:
    dp = [k * poly[k] for k in range(1, len(poly))]
    x = x0
    eps = mpfr(2) ** (-gmpy2.get_context().precision + 8)
    for _ in range(200):
        d = horner(dp, x)
        if d == 0:
            raise EventError("flat normal component")
        nx = x - horner(poly, x) / d
        if abs(nx - x) <= eps * max(abs(nx), eps):
            return nx
        x = nx
    return x


def full_return(nsys: NumericSystem, eta, tol=None, rmax=None) -> mpfr:
    """One full turn from the point at tangential coordinate ``eta`` on the line, back to the same half-line."""
    axis = nsys.axis
    with precision(nsys.bits):
        tol = to_mpfr(tol) if tol is not None else mpfr(2) ** (-nsys.bits + 16)
        eta = to_mpfr(eta)
        rmax = to_mpfr(rmax) if rmax is not None else 1000 * abs(eta) + 10
        p = (mpfr(0), eta) if axis == 0 else (eta, mpfr(0))
        nu = _normal(nsys.upper, p, axis)
        first, second = (nsys.upper, nsys.lower) if nu > 0 else (nsys.lower, nsys.upper)
        tmax = mpfr(10) ** 4
        h1 = _flow_to_line(first, p, axis, tol, tmax, rmax, True)
        h2 = _flow_to_line(second, h1.point, axis, tol, tmax, rmax, True)
        return h2.point[1 - axis]


def ring_return_defects(coeffs: LienardCoeffs | SwitchingSystem, radii: Iterable[object],
                        bits: int = DEFAULT_BITS, tol=None) -> list[mpfr]:
    """|P(eta) - eta| for the full return map of the unperturbed pair at several starting points."""
    sys = coeffs if isinstance(coeffs, SwitchingSystem) else build_lienard(coeffs)
    nsys = numeric_system(sys, {}, 0, bits)
    out = []
    with precision(bits):
        for r in radii:
            eta = to_mpfr(r)
            out.append(abs(full_return(nsys, eta, tol) - eta))
    return out
