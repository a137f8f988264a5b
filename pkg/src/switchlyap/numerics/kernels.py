"""Float64 RK4 batch kernels for portrait sampling.

Set SWITCHLYAP_NO_NUMBA=1 to use the pure-numpy path (also used when numba
is missing).  Fields are term tables with rows (i, j, coef_dx, coef_dy).
"""
from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("SWITCHLYAP_NO_NUMBA", "") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def terms_table(f: list, g: list) -> np.ndarray:
    """Term table from mpfr term lists ``[(i, j, c), ...]`` of the two components."""
    rows: dict[tuple[int, int], list[float]] = {}
    for i, j, c in f:
        rows.setdefault((i, j), [0.0, 0.0])[0] += float(c)
    for i, j, c in g:
        rows.setdefault((i, j), [0.0, 0.0])[1] += float(c)
    out = np.zeros((max(len(rows), 1), 4))
    for r, ((i, j), (a, b)) in enumerate(sorted(rows.items())):
        out[r] = (i, j, a, b)
    return out


def _rk4_numpy(states: np.ndarray, upper: np.ndarray, lower: np.ndarray, axis: int, h: float,
               steps: int, bound: float) -> np.ndarray:
    n = states.shape[0]
    out = np.empty((steps + 1, n, 2))
    out[0] = states
    live = np.ones(n, dtype=bool)

    def rhs(s):
        x, y = s[:, 0], s[:, 1]
        up = s[:, axis] >= 0
        d = np.zeros_like(s)
        for tab, mask in ((upper, up), (lower, ~up)):
            mono = x[:, None] ** tab[:, 0] * y[:, None] ** tab[:, 1]
            d[:, 0] += np.where(mask, mono @ tab[:, 2], 0.0)
            d[:, 1] += np.where(mask, mono @ tab[:, 3], 0.0)
        return d

    s = states.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        _run(s, out, live, rhs, h, steps, bound)
    return out


def _run(s, out, live, rhs, h, steps, bound):
    for k in range(steps):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        nxt = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        live &= np.all(np.isfinite(nxt), axis=1) & (np.abs(nxt).max(axis=1) < bound)
        s = np.where(live[:, None], nxt, s)
        out[k + 1] = s


if USE_NUMBA:

    @njit(cache=True)
    def _rhs_one(x, y, tab):
        dx = 0.0
        dy = 0.0
        for r in range(tab.shape[0]):
            m = x ** int(tab[r, 0]) * y ** int(tab[r, 1])
            dx += tab[r, 2] * m
            dy += tab[r, 3] * m
        return dx, dy

    @njit(cache=True)
    def _rhs_switch(x, y, upper, lower, axis):
        c = x if axis == 0 else y
        if c >= 0.0:
            return _rhs_one(x, y, upper)
        return _rhs_one(x, y, lower)

    @njit(cache=True)
    def _rk4_numba(states, upper, lower, axis, h, steps, bound):
        n = states.shape[0]
        out = np.empty((steps + 1, n, 2))
        for p in range(n):
            x = states[p, 0]
            y = states[p, 1]
            out[0, p, 0] = x
            out[0, p, 1] = y
            alive = True
            for k in range(steps):
                if alive:
                    a1, b1 = _rhs_switch(x, y, upper, lower, axis)
                    a2, b2 = _rhs_switch(x + 0.5 * h * a1, y + 0.5 * h * b1, upper, lower, axis)
                    a3, b3 = _rhs_switch(x + 0.5 * h * a2, y + 0.5 * h * b2, upper, lower, axis)
                    a4, b4 = _rhs_switch(x + h * a3, y + h * b3, upper, lower, axis)
                    nx = x + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
                    ny = y + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
                    if np.isfinite(nx) and np.isfinite(ny) and abs(nx) < bound and abs(ny) < bound:
                        x = nx
                        y = ny
                    else:
                        alive = False
                out[k + 1, p, 0] = x
                out[k + 1, p, 1] = y
        return out


def rk4_batch(states, upper: np.ndarray, lower: np.ndarray, axis: int, h: float, steps: int,
              bound: float = 1e8, backend: str | None = None) -> np.ndarray:
    """Fixed-step RK4 for many starting points; returns an array (steps + 1, n, 2).

    Orbits leaving ``|x|, |y| < bound`` are frozen at their last point.
    """
    states = np.ascontiguousarray(states, dtype=np.float64).reshape(-1, 2)
    backend = backend or ("numba" if USE_NUMBA else "numpy")
    if backend == "numba":
        if not USE_NUMBA:
            raise RuntimeError("numba backend disabled")
        return _rk4_numba(states, np.ascontiguousarray(upper), np.ascontiguousarray(lower), axis, h, steps, bound)
    return _rk4_numpy(states, upper, lower, axis, h, steps, bound)
