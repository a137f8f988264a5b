"""Ready-made systems, ladders and parameter points used throughout the package.

Each builder returns the scaled system (switching line y = 0) unless noted.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .algebra_core import ParamRational, as_rational
from .lyapunov_engine import LadderResult, LadderStep, constant_ladder, constant_term_row, displacement
from .system_model import (LienardCoeffs, PerturbationScheme, SwitchingSystem, apply_perturbation,
                           build_lienard, scale_transform, system_space)


def scaled_lienard(coeffs: LienardCoeffs | Mapping[str, object] | None = None,
                   scheme: PerturbationScheme | None = None) -> SwitchingSystem:
    """Build, perturb (unfolding only by default) and scale a Lienard pair."""
    if coeffs is None:
        coeffs = LienardCoeffs()
    elif not isinstance(coeffs, LienardCoeffs):
        coeffs = LienardCoeffs.from_mapping(coeffs)
    return scale_transform(apply_perturbation(build_lienard(coeffs), scheme or PerturbationScheme()))


def eps2_family(coeffs: LienardCoeffs | Mapping[str, object] | None = None) -> SwitchingSystem:
    """The eps**2-order perturbation family with symbolic p2i, q2i on both halves."""
    return scaled_lienard(coeffs, PerturbationScheme.standard([2]))


# the y-axis symmetric condition-IV base used by the limit-cycle family
CONDITION_IV = {"a2m": "a2p", "a3m": "-a3p", "b2m": "-b2p", "b3m": "b3p"}


def limit_cycle_family(d: object = 0, kmax: int = 5) -> SwitchingSystem:
    """Condition-IV base with p/q perturbations for k <= kmax and delta_k for k <= kmax + 1."""
    scheme = PerturbationScheme.standard(range(1, kmax + 1), delta={k: f"delta{k}" for k in range(1, kmax + 2)},
                                         d=d)
    return scaled_lienard(LienardCoeffs.from_mapping(CONDITION_IV), scheme)


def limit_cycle_ladder(kmax: int = 6) -> list[LadderStep]:
    """Annihilation chain for the limit-cycle family, order by order in eps."""
    steps = [LadderStep(1, 1, "delta1"), LadderStep(1, 2, "delta2"), LadderStep(2, 2, "p12m"),
             LadderStep(3, 2, "q12m"), LadderStep(1, 3, "delta3"), LadderStep(2, 3, "p22m"),
             LadderStep(3, 3, "q22m"), LadderStep(1, 4, "delta4"), LadderStep(2, 4, "p32m"),
             LadderStep(3, 4, "p13m"), LadderStep(4, 4, "q13m"), LadderStep(1, 5, "delta5"),
             LadderStep(2, 5, "p42m"), LadderStep(3, 5, "p23m"), LadderStep(4, 5, "q23m"),
             LadderStep(1, 6, "delta6"), LadderStep(2, 6, "p52m"), LadderStep(3, 6, "p33m"),
             LadderStep(4, 6, "q33m")]
    return [s for s in steps if s.k <= kmax]


def case_1i_ladder() -> list[LadderStep]:
    """b2m = a2p = a2m = 0 with p22m = p22p: the chain ending at the sixth constant."""
    return [LadderStep(3, 3, "p22p"), LadderStep(3, 5, "p23m"), LadderStep(4, 3, "a3m"),
            LadderStep(4, 5, "p23p"), LadderStep(4, 7, "q23m"), LadderStep(5, 5, "b3p"),
            LadderStep(5, 7, "q23p")]


def case_1i_system() -> SwitchingSystem:
    return eps2_family({"a2p": 0, "a2m": 0, "b2m": 0}).subs({"p22m": "p22p"})


def case_4_system() -> SwitchingSystem:
    """a2p a2m != 0 branch after V2 = 0 (a2m = a2p, p22m = p22p)."""
    return eps2_family({"a2m": "a2p"}).subs({"p22m": "p22p"})


def case_4_ladder() -> list[LadderStep]:
    return [LadderStep(3, 3, "q22m"), LadderStep(3, 5, "p23m")]


# ---------------------------------------------------------------------------
# the five-cycle numeric point


FIVE_CYCLE_FREE: dict[str, Fraction] = {
    **{n: Fraction(1) for n in ("a2p", "b3p", "p12p", "p22p", "p33p", "p52p", "q12p", "q22p",
                                "q32p", "q33p", "q42p", "q42m", "q52p", "q52m")},
    "a3p": Fraction(3), "b2p": Fraction(-2), "q32m": Fraction(-2),
}

# offsets applied after the critical values are fixed; d and delta6 follow the
# sign that reproduces the printed V06 = -1e-30 and V16 = 3.2e-21*pi
FIVE_CYCLE_OFFSETS: dict[str, Fraction] = {
    "d": Fraction(5, 10**31),
    "delta6": Fraction(32, 10**22),
    "p52m": Fraction(-15, 10**14),
    "p33m": Fraction(-85, 10**9),
    "q33m": Fraction(188, 10**4),
}

# printed constants and roots of the numeric example
FIVE_CYCLE_CONSTANTS = {
    0: "-1.0e-30", 1: "1.0053096491e-20", 2: "-2.0006218904e-13", 3: "1.0013826592e-7",
    4: "-0.0100266667", 5: "6.5449846949",
}
FIVE_CYCLE_ROOTS = ["0.0015219219", "7.3120695527e-6", "2.6762403416e-6", "5.1472016794e-8",
                  "9.9669521943e-11"]


def five_cycle_point(bindings: Mapping[str, object], names: Iterable[str]) -> dict[str, Fraction]:
    """Exact parameter values: free values, ladder-critical values, then the offsets.

    ``bindings`` is the ladder's binding map; its right-hand sides involve
    only unbound names, so they are evaluated at the free values directly.
    Unlisted parameters are zero.
    """
    free = {n: FIVE_CYCLE_FREE.get(n, Fraction(0)) for n in names if n not in bindings}
    values = dict(free)
    for n, v in bindings.items():
        q = v.evaluate({k: free[k] for k in v.space.names if k in free})
        values[n] = Fraction(int(q.numerator), int(q.denominator))
    for n, off in FIVE_CYCLE_OFFSETS.items():
        values[n] = values.get(n, Fraction(0)) + off
    return values


@dataclass
class FiveCycleResult:
    point: dict[str, Fraction]
    constants: dict[int, ParamRational]
    ladder: LadderResult


def five_cycle_constants(order_xi: int = 6, order_eps: int = 7) -> FiveCycleResult:
    """V_06..V_56 of the limit-cycle family at the five-cycle point, exactly (pi kept symbolic).

    Each V_j6 with j >= 1 is the entry the ladder solved at that position,
    taken as it stood just before solving and evaluated at the perturbed
    point; V_56 is the surviving terminal entry.  V_06 comes from the
    d eps**6 constant at first order.
    """
    table = displacement(limit_cycle_family(), order_xi, order_eps)
    ladder = constant_ladder(table, limit_cycle_ladder(6))
    point = five_cycle_point(ladder.binding_map(), table.space.names)
    consts: dict[int, ParamRational] = {}
    row0 = constant_term_row(limit_cycle_family(d="d"))
    d0 = row0.get(6)
    consts[0] = (d0.subs({"d": point["d"]}) if d0 is not None else ParamRational(table.space.zero()))
    for j in range(1, 6):
        entry = ladder.solved.get((j, 6)) if j < 5 else ladder.table.entry(5, 6)
        consts[j] = as_rational(entry, entry.space).subs({n: point[n] for n in entry.space.names if n in point})
    return FiveCycleResult(point, consts, ladder)


def smooth_bt_system(a3: object = "a3", b3: object = "b3") -> SwitchingSystem:
    """x' = y, y' = -eps**2 x + a3 x**3 + b3 x**2 y on both sides of x = 0, then scaled."""
    names = {n for n in (a3, b3) if isinstance(n, str) and n.isidentifier()}
    space = system_space(names)
    x, y, eps = space.vars("x", "y", "eps")
    A = space.var(a3) if isinstance(a3, str) and a3.isidentifier() else space.const(a3)
    B = space.var(b3) if isinstance(b3, str) and b3.isidentifier() else space.const(b3)
    half = (y, -(eps**2) * x + A * x**3 + B * x**2 * y)
    return scale_transform(SwitchingSystem(half, half, "x"))
