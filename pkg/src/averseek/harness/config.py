"""Strict JSON scenario configuration."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..ode import IntegratorConfig

SCHEMA_VERSION = 1

SCHEMES = (
    "classical",
    "classical-decay",
    "source",
    "source-transformed",
    "averaged-classical",
    "averaged-source",
    "lyapunov",
)
OUTPUTS = ("trajectory-csv", "summary-json", "identity-report")

_CLASSICAL = {"a": 0.7, "eps": 0.01, "omega_H": 1.0, "omega_L": 1.0, "K": 1.0}
_SOURCE = {
    "a": 1.0,
    "eps": 0.1,
    "m": 1.0,
    "kappa": 1.0,
    "c": 1.0,
    "omega_H": 1.0,
    "mu": None,
    "compare_averaged": False,
}
_LYAPUNOV = {"potential": "quadratic", "k": 1.0, "a": 1.0, "eps": 0.1, "C_radius": 6.0, "fd_step": 5e-3}

PARAMETER_DEFAULTS: dict[str, dict[str, Any]] = {
    "classical": _CLASSICAL,
    "classical-decay": {**_CLASSICAL, "a": 1.0},
    "averaged-classical": _CLASSICAL,
    "source": _SOURCE,
    "source-transformed": _SOURCE,
    "averaged-source": _SOURCE,
    "lyapunov": _LYAPUNOV,
}

# classical schemes run in dither time tau, source schemes in physical time
HORIZON_DEFAULTS = {
    "classical": 150.0,
    "classical-decay": 150.0,
    "averaged-classical": 150.0,
    "source": 60.0,
    "source-transformed": 60.0,
    "averaged-source": 60.0,
    "lyapunov": 60.0,
}

TOP_KEYS = {
    "schema_version",
    "name",
    "scheme",
    "parameters",
    "initial_state",
    "horizon",
    "integrator",
    "outputs",
    "seed",
    "samples",
}
INTEGRATOR_KEYS = {"mode", "dt", "rtol", "atol", "max_steps"}


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


@dataclass(frozen=True)
class ScenarioConfig:
    scheme: str
    parameters: dict[str, Any]
    initial_state: tuple[float, ...] | None
    horizon: float
    integrator: IntegratorConfig
    outputs: tuple[str, ...] = ("trajectory-csv", "summary-json")
    seed: int = 0
    name: str = "scenario"
    samples: int = 1501

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "scheme": self.scheme,
            "parameters": dict(self.parameters),
            "initial_state": None if self.initial_state is None else list(self.initial_state),
            "horizon": self.horizon,
            "integrator": {
                "mode": self.integrator.mode,
                "dt": self.integrator.dt,
                "rtol": self.integrator.rtol,
                "atol": self.integrator.atol,
                "max_steps": self.integrator.max_steps,
            },
            "outputs": list(self.outputs),
            "seed": self.seed,
            "samples": self.samples,
        }

    def with_overrides(self, **changes) -> "ScenarioConfig":
        d = self.to_dict()
        params = changes.pop("parameters", None)
        if params:
            d["parameters"].update(params)
        integ = changes.pop("integrator", None)
        if integ:
            d["integrator"].update(integ)
        d.update(changes)
        return parse_config(d)


def _number(value, what, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{what} must be positive")
    return float(value)


def parse_config(raw: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    scheme = raw.get("scheme")
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {list(SCHEMES)}, got {scheme!r}")

    defaults = PARAMETER_DEFAULTS[scheme]
    given = raw.get("parameters") or {}
    if not isinstance(given, dict):
        raise ConfigError("parameters must be an object")
    bad = set(given) - set(defaults)
    if bad:
        raise ConfigError(f"unknown parameters for scheme {scheme!r}: {sorted(bad)}")
    params = copy.deepcopy(defaults)
    params.update(given)
    for key, value in params.items():
        if key == "potential":
            if value not in ("quadratic", "classical-averaged", "source-averaged"):
                raise ConfigError(f"unknown potential {value!r}")
        elif key == "compare_averaged":
            if not isinstance(value, bool):
                raise ConfigError("compare_averaged must be a boolean")
        elif key == "mu" and value is None:
            continue
        else:
            params[key] = _number(value, f"parameters.{key}", positive=True)

    init = raw.get("initial_state")
    if init is not None:
        if not isinstance(init, list) or not init:
            raise ConfigError("initial_state must be a non-empty list")
        init = tuple(_number(v, "initial_state entry") for v in init)

    horizon = _number(raw.get("horizon", HORIZON_DEFAULTS[scheme]), "horizon", positive=True)

    integ_raw = raw.get("integrator") or {}
    if not isinstance(integ_raw, dict):
        raise ConfigError("integrator must be an object")
    bad = set(integ_raw) - INTEGRATOR_KEYS
    if bad:
        raise ConfigError(f"unknown integrator keys: {sorted(bad)}")
    try:
        integrator = IntegratorConfig(**integ_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid integrator settings: {exc}") from exc

    outputs = raw.get("outputs", ["trajectory-csv", "summary-json"])
    if not isinstance(outputs, list) or any(o not in OUTPUTS for o in outputs):
        raise ConfigError(f"outputs must be a list drawn from {list(OUTPUTS)}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    samples = raw.get("samples", 1501)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        raise ConfigError("samples must be an integer >= 2")
    name = raw.get("name", scheme)
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigError("name must be a non-empty string without '/'")
    return ScenarioConfig(scheme, params, init, horizon, integrator, tuple(outputs), seed, name, samples)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(raw)


@dataclass(frozen=True)
class ProbeConfig:
    scheme: str
    parameters: dict[str, Any]
    r: float
    delta: float
    eps_list: tuple[float, ...]
    horizon: float
    integrator: IntegratorConfig
    seed: int = 0
    n_samples: int = 16
    name: str = "probe"
    target: tuple[float, ...] | None = None


PROBE_KEYS = {
    "schema_version",
    "name",
    "scheme",
    "parameters",
    "r",
    "delta",
    "eps_list",
    "horizon",
    "integrator",
    "seed",
    "n_samples",
    "target",
}


def parse_probe_config(raw: dict[str, Any]) -> ProbeConfig:
    if not isinstance(raw, dict):
        raise ConfigError("probe configuration must be a JSON object")
    unknown = set(raw) - PROBE_KEYS
    if unknown:
        raise ConfigError(f"unknown probe keys: {sorted(unknown)}")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    scheme = raw.get("scheme")
    if scheme not in ("classical", "source"):
        raise ConfigError("probe scheme must be 'classical' or 'source'")
    base = parse_config({"schema_version": SCHEMA_VERSION, "scheme": scheme, "parameters": raw.get("parameters") or {}})
    eps_list = raw.get("eps_list")
    if not isinstance(eps_list, list) or not eps_list:
        raise ConfigError("eps_list must be a non-empty list")
    eps_list = tuple(_number(e, "eps_list entry", positive=True) for e in eps_list)
    if list(eps_list) != sorted(eps_list, reverse=True):
        raise ConfigError("eps_list must be decreasing")
    integ_raw = raw.get("integrator") or {}
    bad = set(integ_raw) - INTEGRATOR_KEYS
    if bad:
        raise ConfigError(f"unknown integrator keys: {sorted(bad)}")
    try:
        integrator = IntegratorConfig(**integ_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid integrator settings: {exc}") from exc
    target = raw.get("target")
    if target is not None:
        target = tuple(_number(v, "target entry") for v in target)
    n_samples = raw.get("n_samples", 16)
    if isinstance(n_samples, bool) or not isinstance(n_samples, int) or n_samples < 2:
        raise ConfigError("n_samples must be an integer >= 2")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return ProbeConfig(
        scheme=scheme,
        parameters=base.parameters,
        r=_number(raw.get("r"), "r", positive=True),
        delta=_number(raw.get("delta"), "delta", positive=True),
        eps_list=eps_list,
        horizon=_number(raw.get("horizon", HORIZON_DEFAULTS[scheme]), "horizon", positive=True),
        integrator=integrator,
        seed=seed,
        n_samples=n_samples,
        name=raw.get("name", f"probe-{scheme}"),
        target=target,
    )


def load_probe_config(path: str | Path) -> ProbeConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_probe_config(raw)
