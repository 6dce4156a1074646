"""Scenario files: a JSON object describing one experiment.

Example::

    {
      "model": {"generator": "scalar_benchmark"},
      "horizon": 20,
      "ensemble_size": [10, 100],
      "variant": {"solver": "sqrt_general", "gamma1": 0, "gamma2": 0,
                  "gain_source": "oracle"},
      "gamma_grid": {"gamma1": [0, 0.5, 1], "gamma2": [0, 0.5, 1]},
      "seed": 7,
      "replicates": 2,
      "init": "deterministic",
      "output": "runs/scalar.csv",
      "format": "csv"
    }

``model`` is either explicit matrices (A, H, Q, R, m0, Sigma0; nested arrays,
row-major) or a named generator: ``scalar_benchmark`` or ``random_stable``
with ``n``, ``m``, ``rho`` and optional ``q``, ``r``, ``seed``.
"""

import itertools
import json
import numbers
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..ensemble import VariantSpec
from ..exceptions import InputError, ParseError, ValidationError
from ..model import SystemModel, random_stable, scalar_benchmark, validate_model
from ..solvers import GammaPair

MATRIX_FIELDS = ("A", "H", "Q", "R", "m0", "Sigma0")
FORMATS = ("csv", "jsonl")
INIT_MODES = ("random", "deterministic")
KNOWN_KEYS = {
    "model", "horizon", "ensemble_size", "variant", "gamma_grid", "seed",
    "replicates", "init", "output", "format",
}


@dataclass(frozen=True)
class Scenario:
    model: SystemModel
    horizon: int
    ensemble_sizes: tuple
    variants: tuple
    seed: int = 0
    replicates: int = 1
    init: str = "random"
    output: Optional[str] = None
    format: str = "csv"
    grid: bool = False
    model_spec: dict = field(default_factory=dict, compare=False)

    def with_overrides(self, **kwargs):
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)


def _int(raw, name, minimum):
    if isinstance(raw, bool) or not isinstance(raw, numbers.Integral):
        raise ValidationError(name, "must be an integer")
    if raw < minimum:
        raise ValidationError(name, f"must be >= {minimum}")
    return int(raw)


def _numbers(raw, name):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(name, "must be a nested array of numbers") from None
    if arr.dtype == object or not np.all(np.isfinite(arr)):
        raise ValidationError(name, "must contain finite numbers")
    return arr


def _build_model(spec):
    if not isinstance(spec, dict):
        raise ValidationError("model", "must be an object")
    gen = spec.get("generator")
    if gen is None:
        for name in MATRIX_FIELDS:
            if name not in spec:
                raise ValidationError(f"model.{name}", "required")
        arrays = {name: _numbers(spec[name], f"model.{name}") for name in MATRIX_FIELDS}
        model = SystemModel(**arrays)
    elif gen == "scalar_benchmark":
        model = scalar_benchmark()
    elif gen == "random_stable":
        for key in ("n", "m"):
            if key not in spec:
                raise ValidationError(f"model.{key}", "required")
        kwargs = {
            "n": _int(spec["n"], "model.n", 1),
            "m": _int(spec["m"], "model.m", 1),
            "seed": _int(spec.get("seed", 0), "model.seed", 0),
        }
        for key, default in (("rho", 0.95), ("q", 0.1), ("r", 1.0)):
            value = spec.get(key, default)
            if isinstance(value, bool) or not isinstance(value, numbers.Real):
                raise ValidationError(f"model.{key}", "must be a number")
            kwargs[key] = float(value)
        if kwargs["r"] <= 0:
            raise ValidationError("model.r", "must be positive")
        model = random_stable(**kwargs)
    else:
        raise ValidationError("model.generator", f"unknown generator {gen!r}")
    try:
        validate_model(model)
    except InputError as exc:
        raise ValidationError("model", str(exc)) from exc
    return model


def _gamma_values(raw, name):
    if not isinstance(raw, list) or not raw:
        raise ValidationError(name, "must be a non-empty list")
    return [float(_numbers(v, name)) for v in raw]


def _build_variants(data):
    vraw = data.get("variant", {})
    if not isinstance(vraw, dict):
        raise ValidationError("variant", "must be an object")
    unknown = set(vraw) - {"solver", "gamma1", "gamma2", "gain_source", "application"}
    if unknown:
        raise ValidationError("variant", f"unknown fields {sorted(unknown)}")
    base = dict(
        solver=vraw.get("solver", "stochastic"),
        gain_source=vraw.get("gain_source", "oracle"),
        application=vraw.get("application"),
    )
    grid = data.get("gamma_grid")
    if grid is not None:
        if not isinstance(grid, dict) or set(grid) != {"gamma1", "gamma2"}:
            raise ValidationError("gamma_grid", "needs exactly the lists gamma1 and gamma2")
        g1s = _gamma_values(grid["gamma1"], "gamma_grid.gamma1")
        g2s = _gamma_values(grid["gamma2"], "gamma_grid.gamma2")
        pairs = [GammaPair(g1, g2) for g1, g2 in itertools.product(g1s, g2s)]
    elif "gamma1" in vraw or "gamma2" in vraw:
        pairs = [GammaPair(vraw.get("gamma1", 1.0), vraw.get("gamma2", 1.0))]
    else:
        pairs = [None]
    return tuple(VariantSpec(gammas=p, **base) for p in pairs), grid is not None


def parse_scenario(data):
    """Validate a decoded scenario object; every field is checked before returning."""
    if not isinstance(data, dict):
        raise ValidationError("scenario", "top level must be an object")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        raise ValidationError("scenario", f"unknown fields {sorted(unknown)}")
    for key in ("model", "horizon", "ensemble_size"):
        if key not in data:
            raise ValidationError(key, "required")
    model = _build_model(data["model"])
    horizon = _int(data["horizon"], "horizon", 1)
    if model.time_varying and horizon > model.max_horizon:
        raise ValidationError("horizon", f"time-varying model covers only {model.max_horizon} steps")
    sizes = data["ensemble_size"]
    sizes = sizes if isinstance(sizes, list) else [sizes]
    if not sizes:
        raise ValidationError("ensemble_size", "must not be empty")
    sizes = tuple(_int(s, "ensemble_size", 2) for s in sizes)
    variants, is_grid = _build_variants(data)
    init = data.get("init", "random")
    if init not in INIT_MODES:
        raise ValidationError("init", f"must be one of {INIT_MODES}")
    if init == "deterministic" and min(sizes) < model.n + 1:
        raise ValidationError("ensemble_size", f"deterministic init needs N >= n + 1 = {model.n + 1}")
    fmt = data.get("format", "csv")
    if fmt not in FORMATS:
        raise ValidationError("format", f"must be one of {FORMATS}")
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ValidationError("output", "must be a path string")
    for v in variants:
        if v.solver == "ensrf_scalar" and model.m > 1:
            R = model.R if model.R.ndim == 3 else model.R[None]
            if any(np.any(r - np.diag(np.diag(r))) for r in R):
                raise ValidationError("variant.solver", "ensrf_scalar with m > 1 needs diagonal R")
    return Scenario(
        model=model,
        horizon=horizon,
        ensemble_sizes=sizes,
        variants=variants,
        seed=_int(data.get("seed", 0), "seed", 0),
        replicates=_int(data.get("replicates", 1), "replicates", 1),
        init=init,
        output=output,
        format=fmt,
        grid=is_grid,
        model_spec=data["model"],
    )


def load_scenario(path):
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return parse_scenario(data)
