"""JSON config round-trips for design, model, covariate, and grid settings.

Config keys mirror the type field names one-to-one; unknown keys are
rejected so typos fail loudly.  CLI flags overlay file values.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .designs import DesignError
from .responses import CovariateSpec, ResponseModel, KINDS
from .simulate import SimConfig

_DISPERSION_KEY = {"continuous": "sigma", "proportion": "phi", "survival": "k"}

DESIGN_KEYS = {"family", "n", "n_T", "B", "seed"}
MODEL_KEYS = {"kind", "beta0", "beta", "beta_T", "sigma", "phi", "k", "covariate_dist", "p"}
SIM_KEYS = {"n", "allocation", "B_list", "p_list", "kinds", "N_y", "q", "c_q",
            "covariates", "seed"}


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


def _reject_unknown(data: dict, allowed: set, what: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} config keys: {unknown}")


def load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold one JSON object")
    return data


def design_to_dict(family: str, n: int, n_T: int, B=None, seed=None) -> dict:
    out = {"family": family, "n": n, "n_T": n_T}
    if B is not None:
        out["B"] = B
    if seed is not None:
        out["seed"] = seed
    return out


def design_from_dict(data: dict) -> dict:
    _reject_unknown(data, DESIGN_KEYS, "design")
    for key in ("family", "n", "n_T"):
        if key not in data:
            raise ConfigError(f"design config misses key {key!r}")
    return dict(data)


def model_to_dict(model: ResponseModel, covariate: CovariateSpec = None) -> dict:
    out = {
        "kind": model.kind,
        "beta0": model.beta0,
        "beta": [float(b) for b in model.beta],
        "beta_T": model.beta_T,
        "p": model.p,
    }
    if model.dispersion is not None:
        out[_DISPERSION_KEY[model.kind]] = model.dispersion
    if covariate is not None:
        out["covariate_dist"] = {"distribution": covariate.distribution, "param": covariate.param}
    return out


def model_from_dict(data: dict):
    _reject_unknown(data, MODEL_KEYS, "model")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"model config needs kind in {KINDS}, got {kind!r}")
    dispersion = None
    for model_kind, key in _DISPERSION_KEY.items():
        if key in data:
            if kind != model_kind:
                raise ConfigError(f"dispersion key {key!r} does not belong to kind {kind!r}")
            dispersion = float(data[key])
    model = ResponseModel(
        kind=kind,
        beta0=float(data.get("beta0", 0.0)),
        beta=np.asarray(data.get("beta", [0.0]), dtype=float),
        beta_T=float(data.get("beta_T", 0.0)),
        dispersion=dispersion,
    )
    covariate = None
    if "covariate_dist" in data:
        cd = data["covariate_dist"]
        covariate = CovariateSpec(cd["distribution"], float(cd["param"]),
                                  int(data.get("p", model.p)), int(cd.get("n", 1)))
    return model, covariate


def sim_config_to_dict(config: SimConfig) -> dict:
    out = asdict(config)
    out["B_list"] = list(config.B_list)
    out["p_list"] = list(config.p_list)
    out["kinds"] = list(config.kinds)
    return out


def sim_config_from_dict(data: dict, overrides: dict = None) -> SimConfig:
    _reject_unknown(data, SIM_KEYS, "simulation")
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    _reject_unknown(merged, SIM_KEYS, "simulation")
    kwargs = {}
    for key in SIM_KEYS & set(merged):
        kwargs[key] = merged[key]
    for key in ("B_list", "p_list", "kinds"):
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = tuple(kwargs[key])
    try:
        return SimConfig(**kwargs)
    except DesignError as exc:
        raise ConfigError(str(exc)) from exc


def save_json(data: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
