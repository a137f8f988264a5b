import os
import subprocess
import sys

import gmpy2
import mpmath
import numpy as np
import pytest
from gmpy2 import mpfr, mpq
from hypothesis import given, settings, strategies as st

from switchlyap import families
from switchlyap.lyapunov_engine import constant_ladder, displacement
from switchlyap.numerics import (DisplacementPoly, NumericSystem, ShapeError, displacement_roots,
                                 full_return, integrate_switching, jacobian_det,
                                 numeric_return_map, numeric_system, ring_return_defects, sliding_segment)
from switchlyap.numerics.field import field_from_terms, precision
from switchlyap.numerics.kernels import USE_NUMBA, rk4_batch, terms_table
from switchlyap.numerics.portrait import compactified_portrait, write_svg
from switchlyap.system_model import LienardCoeffs, build_lienard

ZERO = dict.fromkeys(("a2p", "a3p", "b2p", "b3p", "a2m", "a3m", "b2m", "b3m"), 0)
ROTATION = field_from_terms({(0, 1): -1}, {(1, 0): 1})

PRINTED_V = ["-1.0e-30", "1.0053096491e-20", "-2.0006218904e-13", "1.0013826592e-7", "-0.0100266667",
             "6.5449846949"]
PRINTED_ROOTS = ["9.9669521943e-11", "5.1472016794e-8", "2.6762403416e-6", "7.3120695527e-6", "0.0015219219"]


def coeffs(**kw):
    return LienardCoeffs.from_mapping({**ZERO, **kw})


def test_linear_center_one_period():
    nsys = NumericSystem(ROTATION, ROTATION, "y", 256)
    with precision(256):
        two_pi = 2 * gmpy2.const_pi()
        traj = integrate_switching(nsys, ("1", "0"), two_pi)
        t, x, y = traj.samples[-1]
        assert abs(t - two_pi) < mpfr("1e-60")
        assert abs(x - 1) < mpfr("1e-25") and abs(y) < mpfr("1e-25")
    kinds = [k for _, k in traj.events]
    assert kinds == ["cross-up", "cross-down", "cross-up"][:len(kinds)]
    assert traj.regime_at(mpfr(1)) == "upper" and traj.regime_at(mpfr(4)) == "lower"


def test_events_increase_and_sit_on_line():
    nsys = numeric_system(families.scaled_lienard(coeffs(a2p=1, b2p=1, b3p=1, b3m=2)), eps="1/8", bits=128)
    traj = integrate_switching(nsys, ("1/10", "0"), 20, tol="1e-30")
    times = [t for t, _ in traj.events]
    assert times == sorted(times) and len(set(times)) == len(times)
    by_t = {s[0]: s for s in traj.samples}
    for t, _ in traj.events[1:]:
        assert abs(by_t[t][2]) < mpfr("1e-25")


def test_trajectory_csv(tmp_path):
    nsys = NumericSystem(ROTATION, ROTATION, "y", 128)
    traj = integrate_switching(nsys, ("1", "0"), 4, tol="1e-20")
    path = tmp_path / "t.csv"
    traj.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,y,regime" and len(lines) > 3


def test_condition_one_closure_converges():
    c = coeffs(b2p=1, b3p=-2, b3m=1)
    nsys = numeric_system(build_lienard(c), {}, 0, 256)
    with precision(256):
        defects = [abs(full_return(nsys, "1/10", tol) - mpq(1, 10)) for tol in ("1e-8", "1e-16", "1e-32")]
    assert defects[0] > defects[2]
    assert defects[2] < mpfr("1e-28")


def test_sliding_segment_length():
    sys = families.limit_cycle_family(d="d")
    vals = dict.fromkeys(sys.params, 0)
    vals.update(a2p=1, b2p=-2, d="3/2")
    eps = mpq(1, 10)
    nsys = numeric_system(sys, vals, eps, 256)
    seg = sliding_segment(nsys)
    assert seg is not None
    a, b = seg
    with precision(256):
        assert abs((b - a) - mpfr(mpq(3, 2) * eps**6)) < mpfr("1e-60")


def test_return_map_of_rotation_is_identity():
    nsys = NumericSystem(ROTATION, ROTATION, "y", 256)
    up, back = numeric_return_map(nsys, "1/100")
    with precision(256):
        assert abs(up - mpq(1, 100)) < mpfr("1e-60") and abs(back - mpq(1, 100)) < mpfr("1e-60")


def test_x_axis_symmetric_sample_has_no_displacement():
    sys = families.scaled_lienard(coeffs(b2p=1, b2m=-1, b3p="3/2", b3m="3/2"))
    up, back = numeric_return_map(sys, "1/50", eps="1/8")
    assert abs(up - back) < mpfr("1e-60")


def test_ring_defects_for_global_center():
    d = ring_return_defects(coeffs(b2p=1, b3p=1, b3m=1), ["1/2", "2"], 256, "1e-40")
    assert max(d) < mpfr("1e-30")


def test_root_of_quadratic():
    (r,) = displacement_roots([0, "-1/2", 1], (0, 1))
    assert abs(r.value - mpmath.mpf("0.5")) < mpmath.mpf("1e-60") and r.certified


@settings(max_examples=25)
@given(st.lists(st.integers(1, 999), min_size=5, max_size=5, unique=True))
def test_constructed_degree_five_roots(ks):
    roots = sorted(mpq(k, 100_000) for k in ks)
    poly = [mpq(1)]
    for r in roots:
        poly = [(poly[i - 1] if i > 0 else 0) - r * (poly[i] if i < len(poly) else 0) for i in range(len(poly) + 1)]
    found = displacement_roots(poly, (0, "1/100"))
    assert len(found) == 5
    with mpmath.workprec(256):
        for f, r in zip(found, roots):
            assert abs(f.value - mpmath.mpf(r.numerator) / r.denominator) < mpmath.mpf("1e-60")


def test_printed_constants_give_printed_roots():
    found = displacement_roots(DisplacementPoly(PRINTED_V), (0, "1/100"), bits=200)
    assert len(found) == 5
    for f, want in zip(found, PRINTED_ROOTS):
        assert abs(f.value / mpmath.mpf(want) - 1) < mpmath.mpf("5e-7")


def test_root_json_fields():
    (r,) = displacement_roots([0, "-1/2", 1], (0, 1))
    d = r.to_json_dict()
    assert set(d) == {"value", "bracket", "bracket_decimal", "residual", "certified"}


def test_empty_domain_rejected():
    with pytest.raises(ValueError):
        displacement_roots([1, 1], (1, 0))


@pytest.fixture(scope="module")
def table5():
    tab = displacement(families.limit_cycle_family(), 6, 7)
    res = constant_ladder(tab, families.limit_cycle_ladder(5))
    return res.table


def test_diagonal_jacobian():
    tab = displacement(families.limit_cycle_family(), 3, 3)
    res = jacobian_det(tab, [(1, 1), (1, 2)], ["delta1", "delta2"])
    pi = tab.space.pi()
    assert res.det.as_poly() == pi * pi


def test_two_by_two_jacobian():
    tab = _k2_table()
    res = jacobian_det(tab, [(1, 2), (2, 2)], ["delta2", "p12m"], values={})
    assert res.det.as_poly() == tab.space.pi() * mpq(4, 3)
    with precision(256):
        assert abs(res.numeric - mpfr(4) / 3 * gmpy2.const_pi()) < mpfr("1e-70")


def _k2_table():
    return displacement(families.limit_cycle_family(kmax=1), 4, 3).subs({"delta1": 0})


def test_limit_cycle_determinant(table5):
    res = jacobian_det(table5, [(1, 6), (2, 6), (3, 6), (4, 6)], ["delta6", "p52m", "q32p", "q33p"])
    S = table5.space
    assert res.det.as_poly() == S.pi(2) * S.parse_poly("8/45*a2p*p22p")


def test_jacobian_shape():
    tab = displacement(families.limit_cycle_family(kmax=1), 3, 3)
    with pytest.raises(ShapeError):
        jacobian_det(tab, [(1, 1)], ["delta1", "delta2"])


def test_kernel_backends_agree():
    nsys = numeric_system(families.scaled_lienard(coeffs(a2p=1, b2p=1, b3p=2, b3m=1)), eps="1/4", bits=64)
    up = terms_table(nsys.upper.f, nsys.upper.g)
    lo = terms_table(nsys.lower.f, nsys.lower.g)
    seeds = np.array([[0.1 * k, 0.05 * k] for k in range(1, 9)])
    a = rk4_batch(seeds, up, lo, 1, 0.01, 300, backend="numpy")
    if not USE_NUMBA:
        pytest.skip("numba unavailable")
    b = rk4_batch(seeds, up, lo, 1, 0.01, 300, backend="numba")
    assert np.max(np.abs(a - b)) < 1e-12


def test_numpy_flag_selects_fallback():
    code = "import switchlyap.numerics.kernels as k; print(k.USE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, "SWITCHLYAP_NO_NUMBA": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_linear_center_orbits_are_circles():
    sys_lin = NumericSystem(ROTATION, ROTATION, "y", 64)
    up = terms_table(sys_lin.upper.f, sys_lin.upper.g)
    traj = rk4_batch(np.array([[0.5, 0.0], [2.0, 0.0]]), up, up, 1, 0.01, 700)
    r = np.hypot(traj[..., 0], traj[..., 1])
    assert np.allclose(r, r[0], atol=1e-8)


def test_portraits(tmp_path):
    nodal = coeffs(a2p=1, a2m=1, b3p=1, b3m=1, a3p=2, a3m=2, b2p=-1, b2m=-2)
    p = compactified_portrait(nodal, grid=5, steps=400)
    labels = [e[0] for e in p.equilibria]
    assert labels[0] == "O" and any(l.startswith("U1:node") for l in labels)
    log_sample = coeffs(a3p=1, b2p=2, a3m=-2, b2m=-4)
    q = compactified_portrait(log_sample, grid=5, steps=600)
    assert q.orbits and all(len(v) for v in q.chart_orbits.values())
    # orbits started inside the central region stay bounded in the disc
    inner = [o for o in q.orbits if np.hypot(*o[0]) < 0.2]
    assert inner and all(np.hypot(o[:, 0], o[:, 1]).max() < 0.99 for o in inner)
    out = tmp_path / "p.svg"
    write_svg(q, str(out))
    text = out.read_text()
    assert text.startswith("<svg") and "stroke-dasharray" in text
