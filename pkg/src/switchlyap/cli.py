"""Command-line entry point: ``switchlyap COMMAND CONFIG [options]``."""
from __future__ import annotations

import json
import os
import sys
from typing import Any

import click
import gmpy2

from .algebra_core import AlgebraError, ParamPoly, ParamRational, format_rational
from .config import ConfigError, RunConfig
from .lyapunov_engine import (DEFAULT_ORDER_EPS, DEFAULT_ORDER_XI, LadderStep, constant_ladder, displacement)
from .numerics.field import sci

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_MISMATCH = 0, 2, 3, 4


class Mismatch(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def exact_and_decimal(v, bits: int = 256, digits: int = 30) -> dict:
    """Exact text of a coefficient plus its decimal value when it has no free symbols."""
    if isinstance(v, ParamPoly):
        v = ParamRational(v)
    out = {"exact": v.to_text()}
    names = set(v.num.variables()) | set(v.denominator().variables())
    if not names:
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            val = gmpy2.mpfr(v.evaluate({}, gmpy2.const_pi()))
            out["decimal"] = sci(val, digits)
    return out


def _emit(name: str, payload: dict, out: str | None) -> None:
    text = _dump(payload)
    if out:
        os.makedirs(out, exist_ok=True)
        path = os.path.join(out, name)
        with open(path, "w") as fh:
            fh.write(text)
        click.echo(path)
    else:
        click.echo(text, nl=False)


def _load(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig({})
    try:
        return RunConfig.from_file(path)
    except OSError as exc:
        raise ConfigError(str(exc), path) from None


def _run(fn):
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except Mismatch as exc:
        click.echo(f"verification mismatch: {exc}", err=True)
        sys.exit(EXIT_MISMATCH)
    except (AlgebraError, ArithmeticError, RuntimeError, ValueError, KeyError) as exc:
        mod = type(exc).__module__.replace("switchlyap.", "")
        click.echo(f"engine error [{mod}.{type(exc).__name__}]: {exc}", err=True)
        sys.exit(EXIT_ENGINE)
    except Exception as exc:  # integration and root-isolation failures
        if type(exc).__module__.startswith("switchlyap"):
            mod = type(exc).__module__.replace("switchlyap.", "")
            click.echo(f"engine error [{mod}.{type(exc).__name__}]: {exc}", err=True)
            sys.exit(EXIT_ENGINE)
        raise
    sys.exit(EXIT_OK)


config_arg = click.argument("config", required=False, type=click.Path(dir_okay=False))
out_opt = click.option("--out", "out", default=None, help="Output directory (stdout when omitted).")
bits_opt = click.option("--bits", default=None, type=int, help="Binary precision.")
tol_opt = click.option("--tol", default=None, help="Integration tolerance (decimal string).")


@click.group()
def main() -> None:
    """Generalized Lyapunov constants for switching Lienard systems."""


@main.command()
@config_arg
@click.option("--order-xi", default=None, type=int)
@click.option("--order-eps", default=None, type=int)
@click.option("--method", default="reflection", type=click.Choice(["reflection", "inversion"]))
@bits_opt
@out_opt
def lyap(config, order_xi, order_eps, method, bits, out):
    """Lyapunov table of the configured (scaled) system."""

    def go():
        cfg = _load(config)
        sysm = cfg.system()
        oxi = order_xi or cfg.order_xi(DEFAULT_ORDER_XI)
        oeps = order_eps or cfg.order_eps(DEFAULT_ORDER_EPS)
        mode = "first-order" if _has_constants(sysm) else "reject"
        table = displacement(sysm, oxi, oeps, method, constant_terms=mode)
        payload = table.to_json_dict()
        b = bits or int(cfg.section("numerics").get("bits", 256))
        payload["values"] = {f"V_{j}_{k}": exact_and_decimal(v, b) for (j, k), v in sorted(table.entries.items())}
        _emit("lyap.json", payload, out)

    _run(go)


def _has_constants(sysm) -> bool:
    for p in (*sysm.upper, *sysm.lower):
        for _, e, _ in p.exponent_items():
            if e[0] == 0 and e[1] == 0:
                return True
    return False


PRESETS = ("limit-cycle", "case-1i")


@main.command()
@config_arg
@click.option("--branch", default=None, help="Named ladder preset: limit-cycle or case-1i.")
@click.option("--order-xi", default=None, type=int)
@click.option("--order-eps", default=None, type=int)
@out_opt
def ladder(config, branch, order_xi, order_eps, out):
    """Run an annihilation ladder and print the binding transcript."""
    from . import families

    def go():
        cfg = _load(config)
        sec = cfg.section("ladder")
        preset = branch or sec.get("preset")
        if preset is not None and preset not in PRESETS:
            raise ConfigError(f"unknown ladder preset {preset!r}", "ladder.preset")
        if preset == "limit-cycle":
            sysm, steps, oxi, oeps = families.limit_cycle_family(), families.limit_cycle_ladder(6), 6, 7
        elif preset == "case-1i":
            sysm, steps, oxi, oeps = families.case_1i_system(), families.case_1i_ladder(), 7, 12
        else:
            sysm = cfg.system()
            steps = [_parse_step(s, i) for i, s in enumerate(sec.get("steps", []))]
            oxi, oeps = DEFAULT_ORDER_XI, DEFAULT_ORDER_EPS
            if not steps:
                raise ConfigError("no ladder steps and no preset", "ladder.steps")
        oxi = order_xi or cfg.order_xi(oxi)
        oeps = order_eps or cfg.order_eps(oeps)
        table = displacement(sysm, oxi, oeps)
        res = constant_ladder(table, steps, sec.get("scan", "jk"))
        payload = res.to_json_dict()
        payload["preset"] = preset
        _emit("ladder.json", payload, out)

    _run(go)


def _parse_step(s, i: int) -> LadderStep:
    where = f"ladder.steps[{i}]"
    if isinstance(s, list):
        if len(s) not in (2, 3):
            raise ConfigError("a step is [j, k] or [j, k, name]", where)
        return LadderStep(int(s[0]), int(s[1]), s[2] if len(s) == 3 else None)
    if isinstance(s, dict):
        unknown = set(s) - {"j", "k", "solve_for", "binding", "note"}
        if unknown:
            raise ConfigError(f"unknown step keys {sorted(unknown)}", where)
        return LadderStep(s.get("j"), s.get("k"), s.get("solve_for"), s.get("binding"), s.get("note", ""))
    raise ConfigError("a step is a list or a table", where)


@main.command("check-center")
@config_arg
@out_opt
def check_center(config, out):
    """Center conditions, certificates and the global test for concrete coefficients."""
    from .center_toolkit import certify, check_global_center, match_center_condition

    def go():
        cfg = _load(config)
        coeffs = cfg.coefficients(default=0)
        conds = match_center_condition(coeffs)
        certs = certify(coeffs) if conds else []
        report = {"conditions": conds, "certificates": [c.to_json_dict() for c in certs],
                  "global": check_global_center(coeffs).to_json_dict()}
        _emit("check-center.json", report, out)
        bad = [c.kind for c in certs if not c.checked]
        if bad:
            raise Mismatch(f"certificate check failed: {', '.join(bad)}")

    _run(go)


@main.command("check-global")
@config_arg
@bits_opt
@tol_opt
@out_opt
def check_global(config, bits, tol, out):
    """Global-center report, with ring-return defects when [global] radii are given."""
    from .center_toolkit import check_global_center
    from .numerics import ring_return_defects

    def go():
        cfg = _load(config)
        coeffs = cfg.coefficients(default=0)
        rep = check_global_center(coeffs)
        payload = rep.to_json_dict()
        radii = cfg.section("global").get("radii")
        b = bits or int(cfg.section("numerics").get("bits", 256))
        if radii:
            with gmpy2.context(gmpy2.get_context(), precision=b):
                t = gmpy2.mpfr(tol or cfg.section("numerics").get("tol", "1e-50"))
                defects = ring_return_defects(coeffs, radii, b, t)
                payload["ring_defects"] = {str(r): sci(d, 5) for r, d in zip(radii, defects)}
                if rep.verdict == "global" and max(defects) > gmpy2.mpfr("1e-20"):
                    _emit("check-global.json", payload, out)
                    raise Mismatch("ring-return defect above 1e-20")
        _emit("check-global.json", payload, out)

    _run(go)


@main.command()
@config_arg
@bits_opt
@tol_opt
@out_opt
def simulate(config, bits, tol, out):
    """Integrate the configured system and write the trajectory CSV."""
    from .numerics import integrate_switching, numeric_system

    def go():
        cfg = _load(config)
        sysm = cfg.system()
        sec = cfg.section("simulate")
        if "start" not in sec or "t_end" not in sec:
            raise ConfigError("simulate needs start and t_end", "simulate")
        b = bits or int(cfg.section("numerics").get("bits", 256))
        nsys = numeric_system(sysm, sec.get("values", {}), sec.get("eps", 0), b)
        t = tol or cfg.section("numerics").get("tol")
        traj = integrate_switching(nsys, tuple(sec["start"]), sec["t_end"], t)
        os.makedirs(out or ".", exist_ok=True)
        path = os.path.join(out or ".", "trajectory.csv")
        traj.to_csv(path)
        click.echo(path)

    _run(go)


@main.command()
@config_arg
@click.option("--backend", default=None, type=click.Choice(["numba", "numpy"]))
@out_opt
def portrait(config, backend, out):
    """Poincare-disc portrait as SVG."""
    from .numerics.portrait import compactified_portrait, write_svg

    def go():
        cfg = _load(config)
        sec = cfg.section("portrait")
        p = compactified_portrait(cfg.coefficients(default=0), int(sec.get("grid", 7)), h=float(sec.get("h", "0.01")),
                                  steps=int(sec.get("steps", 1500)), backend=backend)
        os.makedirs(out or ".", exist_ok=True)
        path = os.path.join(out or ".", "portrait.svg")
        write_svg(p, path)
        with open(os.path.join(out or ".", "portrait.json"), "w") as fh:
            fh.write(_dump(p.to_json_dict()))
        click.echo(path)

    _run(go)


@main.command()
@config_arg
@bits_opt
@out_opt
def cycles(config, bits, out):
    """Displacement constants at the five-cycle point (or given constants) and their positive roots."""
    from . import families
    from .numerics import DisplacementPoly, displacement_roots

    def go():
        cfg = _load(config)
        sec = cfg.section("cycles")
        b = bits or int(cfg.section("numerics").get("bits", 256))
        payload: dict = {}
        if "constants" in sec:
            vals = [str(c) for c in sec["constants"]]
            payload["constants"] = {f"V_{j}": {"decimal": v} for j, v in enumerate(vals)}
            poly = DisplacementPoly(vals)
        else:
            if sec.get("preset", "five-cycle") != "five-cycle":
                raise ConfigError("the only preset is five-cycle", "cycles.preset")
            res = families.five_cycle_constants()
            payload["parameters"] = {n: format_rational(gmpy2.mpq(v.numerator, v.denominator))
                                     for n, v in sorted(res.point.items()) if v != 0}
            payload["constants"] = {f"V_{j}_6": exact_and_decimal(c, b) for j, c in sorted(res.constants.items())}
            with gmpy2.context(gmpy2.get_context(), precision=b):
                poly = DisplacementPoly([gmpy2.mpfr(c.evaluate({}, gmpy2.const_pi()))
                                         for _, c in sorted(res.constants.items())])
        dom = sec.get("domain", ["0", "1/100"])
        roots = displacement_roots(poly, (dom[0], dom[1]), b)
        payload["roots"] = [r.to_json_dict() for r in roots]
        _emit("cycles.json", payload, out)
        if "expect_roots" in sec and len(roots) != int(sec["expect_roots"]):
            raise Mismatch(f"{len(roots)} roots, expected {sec['expect_roots']}")

    _run(go)


if __name__ == "__main__":
    main()
