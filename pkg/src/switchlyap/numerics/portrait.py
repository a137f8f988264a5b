"""Poincare-disc portrait data and a small SVG writer."""
from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
import numpy as np

from ..center_toolkit import chart_field, classify_infinity
from ..system_model import LienardCoeffs, SwitchingSystem, build_lienard
from .field import numeric_system, precision, _numeric_terms
from .kernels import rk4_batch, terms_table

CHARTS = ("U1", "U2", "W1", "W2")


@dataclass
class Portrait:
    orbits: list[np.ndarray] = field(default_factory=list)
    chart_orbits: dict[str, list[np.ndarray]] = field(default_factory=dict)
    equilibria: list[tuple[str, float, float]] = field(default_factory=list)
    switching: str = "x"

    def to_json_dict(self) -> dict:
        return {
            "orbits": len(self.orbits),
            "chart_orbits": {k: len(v) for k, v in sorted(self.chart_orbits.items())},
            "equilibria": [{"label": l, "disc": [round(x, 12), round(y, 12)]} for l, x, y in self.equilibria],
            "switching_line": f"{self.switching} = 0 (dashed)",
        }


def to_disc(xy: np.ndarray) -> np.ndarray:
    r = np.sqrt(1.0 + xy[..., 0] ** 2 + xy[..., 1] ** 2)
    return xy / r[..., None]


def from_disc(XY: np.ndarray) -> np.ndarray:
    rho2 = np.minimum(XY[..., 0] ** 2 + XY[..., 1] ** 2, 1 - 1e-12)
    return XY / np.sqrt(1.0 - rho2)[..., None]


def _chart_to_disc(chart: str, uw: np.ndarray) -> np.ndarray:
    u, w = uw[..., 0], uw[..., 1]
    r = np.sqrt(1.0 + u * u + w * w)
    if chart == "U1":
        X, Y = 1 / r, u / r
    elif chart == "W1":
        X, Y = -1 / r, -u / r
    elif chart == "U2":
        X, Y = u / r, 1 / r
    else:
        X, Y = -u / r, -1 / r
    return np.stack([X, Y], axis=-1)


def _split_orbits(traj: np.ndarray) -> list[np.ndarray]:
    return [traj[:, p, :] for p in range(traj.shape[1])]


def _table(sys_half, bits: int) -> np.ndarray:
    with precision(bits):
        pi = gmpy2.const_pi()
        f, g = (_numeric_terms(p, {"eps": gmpy2.mpfr(0)}, pi) for p in sys_half)
    return terms_table(f, g)


def compactified_portrait(coeffs: LienardCoeffs | SwitchingSystem, grid: int = 7,
                          charts: tuple[str, ...] = CHARTS, h: float = 0.01, steps: int = 1500,
                          backend: str | None = None) -> Portrait:
    """Finite orbits from a grid of seeds plus chart orbits near the equator, all in disc coordinates."""
    sys = coeffs if isinstance(coeffs, SwitchingSystem) else build_lienard(coeffs)
    if sys.params:
        raise ValueError("portraits need concrete parameters")
    axis = 0 if sys.manifold == "x" else 1
    nsys = numeric_system(sys, {}, 0, 64)
    up = terms_table(nsys.upper.f, nsys.upper.g)
    lo = terms_table(nsys.lower.f, nsys.lower.g)
    neg = np.array([1, 1, -1, -1.0])
    out = Portrait(switching=sys.manifold)
    g = np.linspace(-0.8, 0.8, grid)
    seeds = from_disc(np.array([(a, b) for a in g for b in g if a * a + b * b < 0.7]))
    for tab_u, tab_l in ((up, lo), (up * neg, lo * neg)):
        traj = rk4_batch(seeds, tab_u, tab_l, axis, h, steps, 1e6, backend)
        out.orbits.extend(to_disc(o) for o in _split_orbits(traj))
    for chart in charts:
        if sys.manifold != "x":
            break
        base = "U" + chart[1]
        halves = {}
        for side in ("upper", "lower"):
            half = sys.half(side)
            fld = chart_field(half, chart if chart[0] == "U" else "W" + chart[1])
            halves[side] = _table(fld, 64)
        if base == "U1":
            tab_pos = tab_neg = halves["upper" if chart == "U1" else "lower"]
        elif chart == "U2":
            tab_pos, tab_neg = halves["upper"], halves["lower"]
        else:
            tab_pos, tab_neg = halves["lower"], halves["upper"]
        us = np.linspace(-3, 3, 2 * grid + 1)
        seeds_c = np.array([(u, 0.05) for u in us])
        orbits = []
        for sgn in (1.0, -1.0):
            s = np.array([1, 1, sgn, sgn])
            traj = rk4_batch(seeds_c, tab_pos * s, tab_neg * s, 0, h, steps // 3, 50.0, backend)
            for o in _split_orbits(traj):
                keep = o[o[:, 1] >= 0]
                if len(keep) > 1:
                    orbits.append(_chart_to_disc(chart, keep))
        out.chart_orbits[chart] = orbits
    out.equilibria.append(("O", 0.0, 0.0))
    if isinstance(coeffs, LienardCoeffs):
        for p in classify_infinity(coeffs):
            if "/" in p.chart:
                continue
            try:
                u = float(gmpy2.mpq(p.point[0]))
            except ValueError:
                continue
            d = _chart_to_disc(p.chart, np.array([u, 0.0]))
            out.equilibria.append((f"{p.chart}:{p.kind}", float(d[0]), float(d[1])))
    return out


def write_svg(portrait: Portrait, path: str, size: int = 480) -> None:
    R = size / 2 - 10
    c = size / 2

    def pt(x, y):
        return f"{c + R * x:.2f},{c - R * y:.2f}"

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             f'<circle cx="{c}" cy="{c}" r="{R}" fill="none" stroke="black" stroke-width="1.5"/>']
    if portrait.switching == "x":
        lines.append(f'<line x1="{c}" y1="{c - R}" x2="{c}" y2="{c + R}" stroke="red" stroke-dasharray="6,4"/>')
    else:
        lines.append(f'<line x1="{c - R}" y1="{c}" x2="{c + R}" y2="{c}" stroke="red" stroke-dasharray="6,4"/>')
    polys = list(portrait.orbits) + [o for v in portrait.chart_orbits.values() for o in v]
    for o in polys:
        o = o[np.all(np.isfinite(o), axis=1)]
        if len(o) < 2:
            continue
        step = max(1, len(o) // 300)
        pts = " ".join(pt(x, y) for x, y in o[::step])
        lines.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="0.6"/>')
    for label, x, y in portrait.equilibria:
        lines.append(f'<circle cx="{c + R * x:.2f}" cy="{c - R * y:.2f}" r="3" fill="black"/>')
        lines.append(f'<text x="{c + R * x + 4:.2f}" y="{c - R * y - 4:.2f}" font-size="9">{label}</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
