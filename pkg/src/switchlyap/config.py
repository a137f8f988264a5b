"""TOML run configuration.

Example::

    [system]
    family = "lienard"          # lienard | scaled | eps2 | limit-cycle | case-1i | smooth-bt
    coefficients = { a2p = "0", a3p = "0", b2p = "1", b3p = "-2", b2m = "0", b3m = "1" }
    perturbation = { ks = [2] }

    [orders]
    xi = 6
    eps = 7
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .system_model import LienardCoeffs, PerturbationScheme, SwitchingSystem, build_lienard

FAMILIES = ("lienard", "scaled", "eps2", "limit-cycle", "case-1i", "smooth-bt")

_SCHEMA: dict[str, set[str]] = {
    "": {"system", "orders", "numerics", "ladder", "simulate", "portrait", "cycles", "global", "out"},
    "system": {"family", "coefficients", "perturbation", "bindings", "unfolding", "a3", "b3"},
    "system.perturbation": {"ks", "sides", "degrees", "delta", "d", "d_side", "d_eps_power"},
    "orders": {"xi", "eps"},
    "numerics": {"bits", "tol"},
    "ladder": {"preset", "steps", "scan"},
    "simulate": {"start", "t_end", "eps", "values"},
    "portrait": {"grid", "steps", "h"},
    "cycles": {"preset", "constants", "domain", "expect_roots"},
    "global": {"radii"},
}


class ConfigError(Exception):
    """Bad configuration; ``where`` names the key or line."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


def _check_keys(data: Mapping[str, Any], path: str = "") -> None:
    allowed = _SCHEMA.get(path)
    if allowed is None:
        return
    for k, v in data.items():
        full = f"{path}.{k}" if path else k
        if k not in allowed:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", full)
        if isinstance(v, float):
            raise ConfigError("binary floats are not accepted; quote the number as a string", full)
        if isinstance(v, dict):
            _check_keys(v, full)
            for kk, vv in v.items():
                if isinstance(vv, float):
                    raise ConfigError("binary floats are not accepted; quote the number as a string",
                                      f"{full}.{kk}")


@dataclass
class RunConfig:
    data: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(exc), "toml") from None
        _check_keys(data)
        return cls(data)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "rb") as fh:
            raw = fh.read()
        return cls.from_text(raw.decode())

    def section(self, name: str) -> dict:
        return dict(self.data.get(name, {}))

    def order_xi(self, default: int) -> int:
        return int(self.section("orders").get("xi", default))

    def order_eps(self, default: int) -> int:
        return int(self.section("orders").get("eps", default))

    def coefficients(self, default: object = None) -> LienardCoeffs:
        """Coefficients from [system]; unlisted a2..b3 are symbols, or ``default`` when given."""
        raw = self.section("system").get("coefficients", {})
        try:
            return LienardCoeffs.from_mapping({k: _exact(v, f"system.coefficients.{k}") for k, v in raw.items()},
                                              default)
        except KeyError as exc:
            raise ConfigError(str(exc), "system.coefficients") from None

    def scheme(self) -> PerturbationScheme:
        sec = self.section("system")
        pert = dict(sec.get("perturbation", {}))
        unfolding = _exact(sec.get("unfolding", 1), "system.unfolding")
        if not pert:
            return PerturbationScheme(unfolding=unfolding)
        ks = pert.pop("ks", [])
        delta = pert.pop("delta", None)
        if isinstance(delta, list):
            delta = {int(k): f"delta{k}" for k in delta}
        elif isinstance(delta, dict):
            delta = {int(k): _exact(v, "system.perturbation.delta") for k, v in delta.items()}
        kw = {}
        for key in ("sides", "d_side", "d_eps_power"):
            if key in pert:
                kw[key] = pert[key]
        if "degrees" in pert:
            kw["degrees"] = tuple(pert["degrees"])
        if "d" in pert:
            kw["d"] = _exact(pert["d"], "system.perturbation.d")
        return PerturbationScheme.standard(ks, delta=delta or {}, unfolding=unfolding, **kw)

    def system(self) -> SwitchingSystem:
        from . import families

        sec = self.section("system")
        fam = sec.get("family", "scaled")
        if fam not in FAMILIES:
            raise ConfigError(f"unknown family {fam!r} (one of {', '.join(FAMILIES)})", "system.family")
        if fam == "lienard":
            sys = build_lienard(self.coefficients())
        elif fam == "scaled":
            sys = families.scaled_lienard(self.coefficients(), self.scheme())
        elif fam == "eps2":
            sys = families.eps2_family(self.coefficients())
        elif fam == "limit-cycle":
            sys = families.limit_cycle_family()
        elif fam == "case-1i":
            sys = families.case_1i_system()
        else:
            sys = families.smooth_bt_system(_exact(sec.get("a3", "a3"), "system.a3"),
                                            _exact(sec.get("b3", "b3"), "system.b3"))
        if sec.get("bindings"):
            sys = sys.subs({k: _exact(v, f"system.bindings.{k}") for k, v in sec["bindings"].items()})
        return sys


def _exact(v, where: str):
    if isinstance(v, float):
        raise ConfigError("binary floats are not accepted; quote the number as a string", where)
    if isinstance(v, bool):
        raise ConfigError("expected a number or expression", where)
    return v
