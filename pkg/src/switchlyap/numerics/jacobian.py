"""Exact Jacobian determinants of selected Lyapunov constants."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import gmpy2

from ..algebra_core import ParamRational, as_rational, resolve_bindings, _subs_simultaneous
from ..lyapunov_engine import LyapunovTable
from .field import precision, sci, to_mpfr


class ShapeError(ValueError):
    pass


@dataclass
class JacobianResult:
    matrix: list[list[ParamRational]]
    det: ParamRational
    numeric: object = None

    def to_json_dict(self) -> dict:
        out = {"det": self.det.to_text(), "matrix": [[c.to_text() for c in row] for row in self.matrix]}
        if self.numeric is not None:
            out["det_decimal"] = sci(self.numeric)
        return out


def _det(m: list[list[ParamRational]]) -> ParamRational:
    n = len(m)
    if n == 1:
        return m[0][0]
    total = None
    for c in range(n):
        if m[0][c].is_zero():
            continue
        minor = [row[:c] + row[c + 1:] for row in m[1:]]
        term = m[0][c] * _det(minor)
        if c % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else m[0][0] * 0


def jacobian_det(table: LyapunovTable, rows: Sequence[tuple[int, int]], params: Sequence[str],
                 at: Mapping[str, object] | None = None, values: Mapping[str, object] | None = None,
                 bits: int = 256) -> JacobianResult:
    """det(d V_jk / d param) over the selected rows and parameters.

    ``at`` binds parameters after differentiation (the critical point);
    ``values`` additionally gives a numeric evaluation of the determinant.
    """
    if len(rows) != len(params):
        raise ShapeError(f"{len(rows)} rows against {len(params)} parameters")
    space = table.space
    bound = resolve_bindings(at, space) if at else {}
    matrix = []
    for j, k in rows:
        v = as_rational(table.entry(j, k), space)
        row = []
        for p in params:
            d = v.diff(p)
            if bound:
                d = _subs_simultaneous(d, bound)
            row.append(d)
        matrix.append(row)
    det = _det(matrix)
    numeric = None
    if values is not None:
        with precision(bits):
            vals = {n: to_mpfr(x) for n, x in values.items()}
            numeric = det.evaluate(vals, gmpy2.const_pi())
    return JacobianResult(matrix, det, numeric)
