"""Run configuration: JSON loading and coefficient expressions.

A config file is a JSON object::

    {
      "diffusion": {"family": "bessel", "params": {"delta": 3}},
      "rates": [0.5, 1.0],
      "simulation": {"x0": 1.0, "horizon": 1.0, "step": 0.001, "paths": 100000, "seed": 1}
    }

or, for a custom diffusion::

    "diffusion": {"custom": {"drift": "1/x", "volatility": "1",
                             "interval": [0, "inf"], "reference_point": 1}}

Expressions use the variable ``x``, the operators ``+ - * / **`` (``^`` is
accepted as a power), the constants ``pi`` and ``e`` and the functions
``exp log sqrt pow abs sin cos tanh``.
"""
from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffusion import DiffusionSpec, IntervalSpec, catalog
from .exceptions import ConfigError
from .excessive import DiscountRate

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "pow": np.power, "abs": np.abs,
    "sin": np.sin, "cos": np.cos, "tanh": np.tanh,
}
_CONSTS = {"pi": math.pi, "e": math.e}


def _check(node, where):
    if isinstance(node, ast.Expression):
        return _check(node.body, where)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, where)
        _check(node.right, where)
    elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        _check(node.operand, where)
    elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        pass
    elif isinstance(node, ast.Name) and (node.id == "x" or node.id in _CONSTS):
        pass
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
            and not node.keywords:
        for a in node.args:
            _check(a, where)
    else:
        raise ConfigError(f"{where}: unsupported expression element {ast.dump(node)[:60]}")


def _eval(node, x):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, x))
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return x if node.id == "x" else _CONSTS[node.id]
    return _FUNCS[node.func.id](*[_eval(a, x) for a in node.args])


def parse_expression(text, where="expression"):
    """Compile a coefficient expression in ``x`` to a vectorized callable."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"{where}: expected a non-empty expression string")
    try:
        # ^ has the precedence of ** only after rewriting
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: cannot parse {text!r}: {exc.msg}") from None
    _check(tree, where)
    body = tree.body

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(_eval(body, x), dtype=float) + 0.0 * x

    fn.expression = text
    return fn


def _number(v, where):
    if isinstance(v, str):
        key = v.strip().lower()
        if key in ("inf", "+inf", "infinity"):
            return math.inf
        if key in ("-inf", "-infinity"):
            return -math.inf
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {v!r}") from None


def diffusion_from_dict(d) -> DiffusionSpec:
    """Build a :class:`DiffusionSpec` from a ``diffusion`` config entry."""
    if not isinstance(d, dict):
        raise ConfigError("diffusion: expected an object")
    if "custom" in d:
        c = d["custom"]
        if not isinstance(c, dict):
            raise ConfigError("diffusion.custom: expected an object")
        for key in ("drift", "volatility", "interval", "reference_point"):
            if key not in c:
                raise ConfigError(f"diffusion.custom.{key}: missing")
        iv = c["interval"]
        if not isinstance(iv, (list, tuple)) or len(iv) != 2:
            raise ConfigError("diffusion.custom.interval: expected [alpha, beta]")
        interval = IntervalSpec(_number(iv[0], "diffusion.custom.interval[0]"),
                                _number(iv[1], "diffusion.custom.interval[1]"),
                                bool(c.get("alpha_included", False)),
                                bool(c.get("beta_included", False)))
        drift = parse_expression(c["drift"], "diffusion.custom.drift")
        vol = parse_expression(c["volatility"], "diffusion.custom.volatility")
        x0 = _number(c["reference_point"], "diffusion.custom.reference_point")
        return DiffusionSpec(interval, drift, vol, x0, str(c.get("name", "custom")),
                             {"drift": str(c["drift"]), "volatility": str(c["volatility"])})
    if "family" not in d:
        raise ConfigError("diffusion: need either 'family' or 'custom'")
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("diffusion.params: expected an object")
    params = {k: _number(v, f"diffusion.params.{k}") for k, v in params.items()}
    return catalog(d["family"], params)


@dataclass
class SimulationSettings:
    x0: float | None = None
    horizon: float = 1.0
    step: float = 1e-3
    paths: int = 20_000
    seed: int = 0


@dataclass
class RunConfig:
    diffusion: DiffusionSpec
    rates: tuple = (0.5, 1.0)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    output: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict, repr=False)


def parse_rates(v):
    if v is None:
        return (0.5, 1.0)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError("rates: expected a non-empty list of positive numbers")
    out = []
    for i, r in enumerate(v):
        try:
            out.append(DiscountRate(_number(r, f"rates[{i}]")).r)
        except ValueError as exc:
            raise ConfigError(f"rates[{i}]: {exc}") from None
    if len(set(out)) != len(out):
        raise ConfigError("rates: values must be distinct")
    return tuple(out)


def config_from_dict(d) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object")
    if "diffusion" in d:
        diff = d["diffusion"]
    elif "family" in d or "custom" in d:
        diff = {k: d[k] for k in ("family", "params", "custom") if k in d}
    else:
        raise ConfigError("diffusion: missing")
    spec = diffusion_from_dict(diff)
    sim = d.get("simulation", {}) or {}
    if not isinstance(sim, dict):
        raise ConfigError("simulation: expected an object")
    known = {"x0", "horizon", "step", "paths", "seed"}
    extra = set(sim) - known
    if extra:
        raise ConfigError(f"simulation.{sorted(extra)[0]}: unknown field")
    settings = SimulationSettings()
    for key in known & set(sim):
        val = _number(sim[key], f"simulation.{key}")
        setattr(settings, key, int(val) if key in ("paths", "seed") else val)
    out = d.get("output", {}) or {}
    return RunConfig(spec, parse_rates(d.get("rates")), settings, dict(out), d)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return config_from_dict(data)
