"""Experiment configuration: key = value files with [section] headers.

Unknown sections or keys are rejected outright; a silent typo in epsilon or
alpha invalidates long runs.  Command-line flags override file values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .controls import ControlProfile, TrigPoly, get_profile, profile_catalog

EXPERIMENTS = (
    "transfer",
    "rwa-gap",
    "scaling",
    "delta-sweep",
    "e-sweep",
    "lemma-fast",
    "frame-check",
    "variation-check",
    "adiabatic-order",
)


class ConfigError(ValueError):
    """Malformed, unknown, or inconsistent configuration input."""


def _parse_floats(text: str) -> tuple[float, ...]:
    parts = [p for chunk in text.split(",") for p in chunk.split()]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"expected numbers, got {text!r}") from exc


def _parse_float(text: str, key: str) -> float:
    vals = _parse_floats(text)
    if len(vals) != 1:
        raise ConfigError(f"{key} expects a single number, got {text!r}")
    return vals[0]


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{key} expects an integer, got {text!r}") from exc


# section -> key -> parser tag ("floats", "float", "int", "str", "bool")
_SCHEMA: Mapping[str, Mapping[str, str]] = {
    "experiment": {
        "name": "str",
        "threads": "int",
        "seed": "int",
        "checkpoints": "int",
        "grid_size": "int",
        "gap_floor": "float",
        "window_lo": "float",
        "window_hi": "float",
        "error_floor": "float",
        "tau_points": "int",
        "carrier_e": "float",
        "beta": "float",
        "fidelity_min": "float",
        "slope_tolerance": "float",
    },
    "pulse": {
        "epsilon": "floats",
        "alpha": "floats",
        "e": "floats",
        "delta": "floats",
    },
    "profile": {
        "name": "str",
        "v_const": "float",
        "v_sin": "floats",
        "v_cos": "floats",
        "phi_const": "float",
        "phi_sin": "floats",
        "phi_cos": "floats",
    },
    "policy": {
        "n_osc": "int",
        "h_max": "float",
        "stride": "int",
        "step_cap": "int",
    },
    "output": {
        "prefix": "str",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration for one experiment run."""

    experiment: str
    profile: ControlProfile
    epsilon: tuple[float, ...] = (0.01,)
    alpha: tuple[float, ...] = (1.5,)
    e_values: tuple[float, ...] = (1.0,)
    delta: tuple[float, ...] = (1.0,)
    n_osc: int = 16
    h_max: float = 1e-3
    stride: int | None = None
    step_cap: int = 10**8
    checkpoints: int = 512
    grid_size: int = 4096
    gap_floor: float = 0.3
    window_lo: float = 0.2
    window_hi: float = 1.0
    error_floor: float = 1e-8
    tau_points: int = 64
    carrier_e: float = 1.0
    beta: float = 4.0
    fidelity_min: float = 0.99
    slope_tolerance: float = 0.2
    seed: int = 0
    threads: int = 1
    out_prefix: str = "qctl-out"

    def describe(self) -> dict[str, str]:
        """Flat, deterministic key -> value map for provenance emission."""

        def fmt(value) -> str:
            if isinstance(value, tuple):
                return " ".join(repr(v) for v in value)
            return repr(value) if isinstance(value, float) else str(value)

        items = {
            "experiment": self.experiment,
            "profile": self.profile.name,
            "epsilon": fmt(self.epsilon),
            "alpha": fmt(self.alpha),
            "E": fmt(self.e_values),
            "delta": fmt(self.delta),
            "n_osc": str(self.n_osc),
            "h_max": repr(self.h_max),
            "stride": str(self.stride),
            "step_cap": str(self.step_cap),
            "checkpoints": str(self.checkpoints),
            "grid_size": str(self.grid_size),
            "gap_floor": repr(self.gap_floor),
            "window": f"{self.window_lo!r} {self.window_hi!r}",
            "error_floor": repr(self.error_floor),
            "tau_points": str(self.tau_points),
            "carrier_E": repr(self.carrier_e),
            "beta": repr(self.beta),
            "fidelity_min": repr(self.fidelity_min),
            "slope_tolerance": repr(self.slope_tolerance),
            "seed": str(self.seed),
            "threads": str(self.threads),
        }
        return items


_DEFAULT_GRIDS: Mapping[str, dict] = {
    "transfer": {},
    "rwa-gap": {"epsilon": (0.08, 0.04, 0.02, 0.01)},
    "scaling": {"epsilon": (0.08, 0.04, 0.02), "alpha": (2.5, 1.5)},
    "delta-sweep": {"delta": tuple(np.linspace(0.2, 1.0, 50))},
    "e-sweep": {"e_values": tuple(np.round(np.linspace(0.5, 1.5, 41), 6))},
    "lemma-fast": {"epsilon": (0.2, 0.1, 0.05)},
    "frame-check": {},
    "variation-check": {},
    "adiabatic-order": {"epsilon": (0.04, 0.02, 0.01)},
}


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    return ExperimentConfig(experiment=experiment, profile=get_profile("sine"),
                            **_DEFAULT_GRIDS[experiment])


def _profile_from_section(items: dict[str, str]) -> ControlProfile:
    if "name" in items:
        if len(items) > 1:
            raise ConfigError("[profile] gives both a name and coefficients")
        return get_profile(items["name"])
    v_poly = TrigPoly(
        a0=float(items.get("v_const", 0.0)),
        sin_coeffs=_parse_floats(items.get("v_sin", "")),
        cos_coeffs=_parse_floats(items.get("v_cos", "")),
    )
    phi_poly = TrigPoly(
        a0=float(items.get("phi_const", 0.0)),
        sin_coeffs=_parse_floats(items.get("phi_sin", "")),
        cos_coeffs=_parse_floats(items.get("phi_cos", "")),
    )
    return ControlProfile.from_trig("custom", v_poly, phi_poly)


def load_config(path: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse a config file; `experiment` (from the CLI) overrides [experiment] name."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path!r}")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}] of {path!r}")

    sections = {s: dict(parser[s]) for s in parser.sections()}
    exp_items = sections.get("experiment", {})
    name = experiment or exp_items.get("name")
    if name is None:
        raise ConfigError("no experiment name given (CLI subcommand or [experiment] name = ...)")
    if experiment and "name" in exp_items and exp_items["name"] != experiment:
        raise ConfigError(
            f"config names experiment {exp_items['name']!r} but {experiment!r} was requested")
    cfg = default_config(name)

    overrides: dict = {}
    if "profile" in sections and sections["profile"]:
        overrides["profile"] = _profile_from_section(sections["profile"])
    pulse = sections.get("pulse", {})
    if "epsilon" in pulse:
        overrides["epsilon"] = _parse_floats(pulse["epsilon"])
    if "alpha" in pulse:
        overrides["alpha"] = _parse_floats(pulse["alpha"])
    if "e" in pulse:
        overrides["e_values"] = _parse_floats(pulse["e"])
    if "delta" in pulse:
        overrides["delta"] = _parse_floats(pulse["delta"])
    policy = sections.get("policy", {})
    if "n_osc" in policy:
        overrides["n_osc"] = _parse_int(policy["n_osc"], "n_osc")
    if "h_max" in policy:
        overrides["h_max"] = _parse_float(policy["h_max"], "h_max")
    if "stride" in policy:
        overrides["stride"] = _parse_int(policy["stride"], "stride")
    if "step_cap" in policy:
        overrides["step_cap"] = _parse_int(policy["step_cap"], "step_cap")
    if "output" in sections and "prefix" in sections["output"]:
        overrides["out_prefix"] = sections["output"]["prefix"]
    for key, kind in _SCHEMA["experiment"].items():
        if key in ("name",) or key not in exp_items:
            continue
        attr = {"carrier_e": "carrier_e"}.get(key, key)
        raw = exp_items[key]
        overrides[attr] = _parse_int(raw, key) if kind == "int" else _parse_float(raw, key)

    cfg = replace(cfg, **overrides)
    return validate_config(cfg)


def apply_cli_overrides(cfg: ExperimentConfig, *, epsilon=None, alpha=None, e_values=None,
                        delta=None, profile=None, out=None, threads=None) -> ExperimentConfig:
    overrides: dict = {}
    if epsilon is not None:
        overrides["epsilon"] = tuple(epsilon)
    if alpha is not None:
        overrides["alpha"] = tuple(alpha)
    if e_values is not None:
        overrides["e_values"] = tuple(e_values)
    if delta is not None:
        overrides["delta"] = tuple(delta)
    if profile is not None:
        overrides["profile"] = get_profile(profile)
    if out is not None:
        overrides["out_prefix"] = out
    if threads is not None:
        overrides["threads"] = threads
    return validate_config(replace(cfg, **overrides))


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    for name, grid in (("epsilon", cfg.epsilon), ("alpha", cfg.alpha),
                       ("e", cfg.e_values), ("delta", cfg.delta)):
        if len(grid) == 0:
            raise ConfigError(f"{name} grid is empty")
    if any(e <= 0.0 or e > 1.0 for e in cfg.epsilon):
        raise ConfigError(f"epsilon values must lie in (0, 1]: {cfg.epsilon}")
    if any(e <= 0.0 for e in cfg.e_values):
        raise ConfigError(f"E values must be positive: {cfg.e_values}")
    if any(d < 0.0 for d in cfg.delta):
        raise ConfigError(f"delta values must be >= 0: {cfg.delta}")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.n_osc < 4:
        raise ConfigError("n_osc must be >= 4")
    if cfg.h_max <= 0.0:
        raise ConfigError("h_max must be positive")
    if not 0.0 < cfg.window_lo <= cfg.window_hi:
        raise ConfigError("need 0 < window_lo <= window_hi")
    # alpha <= 1 is exploration, not an error; the runner records the warning
    return cfg


def alpha_warnings(cfg: ExperimentConfig) -> list[str]:
    return [f"alpha = {a:g} is outside the validity regime alpha > 1 (exploratory)"
            for a in cfg.alpha if a <= 1.0]


def catalog_lines() -> list[str]:
    lines = []
    for name, prof in sorted(profile_catalog().items()):
        lines.append(f"{name}: v_sup={prof.v_sup:g}, dphi_sup={prof.dphi_sup:g}")
    return lines
