"""Scenario files: chart, law sequence and run policy in one TOML document.

Example::

    name = "gaussian-decay"
    dim = 2

    [chart]
    kind = "affine"          # or "exponential"
    r = 0.5

    [law]
    variant = "gaussian"     # atomic | gaussian | uniform-ball | exp-gaussian
                             # | haar | haar-cyclic | scalar-atomic
    sigma = 0.1
    n_dependence = "power"   # constant | power | table
    q = 1.0

    [policy]
    horizon = 10000
    paths = 256

Every policy key missing from the file takes the default in
:data:`POLICY_DEFAULTS`; reports always carry the resolved values.
"""
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import charts, classical, laws
from .group import GroupError
from .three_series import Policy

POLICY_DEFAULTS = {
    "horizon": 100_000,
    "paths": 256,
    "budget": 10_000,
    "eps": 1e-3,
    "eps_c": 1e-6,
    "seed": 0,
    "m_star": None,
    "mc_horizon": 256,
    "workers": 1,
}
_INT_KEYS = {"horizon", "paths", "budget", "seed", "m_star", "mc_horizon", "workers"}
VARIANTS = ("atomic", "gaussian", "uniform-ball", "exp-gaussian", "haar", "haar-cyclic", "scalar-atomic")
RATES = ("constant", "power", "table")


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


def _get(section, key, where, kind=None, required=True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{where}{key}", "missing")
        return default
    value = section[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}{key}", f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}{key}", f"expected an integer, got {value!r}")
        return value
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"{where}{key}", f"expected a string, got {value!r}")
    return value


def _rate(law_cfg):
    kind = _get(law_cfg, "n_dependence", "law.", str, required=False, default="constant")
    try:
        if kind == "constant":
            return laws.Constant()
        if kind == "power":
            return laws.PowerDecay(_get(law_cfg, "q", "law.", float))
        if kind == "table":
            table = _get(law_cfg, "table", "law.")
            if not isinstance(table, list):
                raise ConfigError("law.table", "expected a list of scales")
            return laws.Table(tuple(table))
    except laws.LawError as exc:
        raise ConfigError("law." + ("q" if kind == "power" else "table"), str(exc)) from None
    raise ConfigError("law.n_dependence", f"expected one of {', '.join(RATES)}, got {kind!r}")


def _base_law(law_cfg, dim):
    variant = _get(law_cfg, "variant", "law.", str)
    try:
        if variant in ("gaussian", "exp-gaussian"):
            sigma = _get(law_cfg, "sigma", "law.", float)
            cls = laws.GaussianPerturbation if variant == "gaussian" else laws.ExpGaussian
            return _wrap("law.sigma", cls, sigma, dim)
        if variant == "uniform-ball":
            return _wrap("law.rho", laws.UniformBallPerturbation, _get(law_cfg, "rho", "law.", float), dim)
        if variant == "atomic":
            atoms = np.asarray(_get(law_cfg, "atoms", "law."), dtype=float)
            if atoms.ndim != 3 or atoms.shape[1:] != (dim, dim):
                raise ConfigError("law.atoms", f"expected a list of {dim}x{dim} matrices")
            return _wrap("law.atoms", laws.AtomicDiscrete, atoms, _get(law_cfg, "probs", "law."))
        if variant == "haar":
            elements = np.asarray(_get(law_cfg, "elements", "law."), dtype=float)
            if elements.ndim != 3 or elements.shape[1:] != (dim, dim):
                raise ConfigError("law.elements", f"expected a list of {dim}x{dim} matrices")
            return _wrap("law.elements", laws.HaarFiniteSubgroup, elements)
        if variant == "haar-cyclic":
            if dim != 2:
                raise ConfigError("dim", "haar-cyclic acts on R^2; dim must be 2")
            order = _get(law_cfg, "order", "law.", int)
            if order < 1:
                raise ConfigError("law.order", "must be a positive integer")
            return laws.HaarFiniteSubgroup.cyclic_rotations(order)
        if variant == "scalar-atomic":
            if dim != 2:
                raise ConfigError("dim", "scalar laws embed in 2x2 matrices; dim must be 2")
            scalar = _wrap(
                "law.values",
                classical.ScalarLaw,
                tuple(_get(law_cfg, "values", "law.")),
                tuple(_get(law_cfg, "probs", "law.")),
            )
            return laws.AtomicDiscrete(classical.embed(scalar.values), scalar.probs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("law", str(exc)) from None
    raise ConfigError("law.variant", f"expected one of {', '.join(VARIANTS)}, got {variant!r}")


def _wrap(field_name, fn, *args):
    try:
        return fn(*args)
    except (laws.LawError, GroupError, ValueError) as exc:
        raise ConfigError(field_name, str(exc)) from None


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    dim: int
    chart: charts.ChartSpec
    sequence: laws.LawSequence
    policy: dict
    raw: dict = field(default_factory=dict)
    description: str = ""
    expected: str = ""

    @property
    def m_star(self):
        m = self.policy["m_star"]
        return m if m is not None else max(1, self.policy["horizon"] // 2)

    def series_policy(self):
        p = self.policy
        return Policy(
            horizon=p["horizon"], budget=p["budget"], eps_c=p["eps_c"], seed=p["seed"], mc_horizon=p["mc_horizon"]
        )

    def resolved(self):
        """Plain-data description with every default filled in."""
        law = {k: v for k, v in self.raw.get("law", {}).items()}
        policy = dict(self.policy)
        policy["m_star"] = self.m_star
        return {
            "name": self.name,
            "dim": self.dim,
            "chart": {"kind": self.chart.kind.value, "r": self.chart.r},
            "law": law,
            "policy": policy,
        }

    def with_overrides(self, **kwargs):
        """Copy with policy keys replaced (``None`` values are ignored)."""
        policy = dict(self.policy)
        for key, value in kwargs.items():
            if value is not None:
                policy[key] = value
        _check_policy(policy)
        return ScenarioConfig(
            self.name, self.dim, self.chart, self.sequence, policy, self.raw, self.description, self.expected
        )


def _check_policy(policy):
    for key, value in policy.items():
        if value is None:
            continue
        if key in _INT_KEYS and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"policy.{key}", f"expected an integer, got {value!r}")
        if key not in _INT_KEYS and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"policy.{key}", f"expected a number, got {value!r}")
    checks = [
        ("horizon", policy["horizon"] >= 10, "must be at least 10"),
        ("paths", policy["paths"] >= 1, "must be at least 1"),
        ("budget", policy["budget"] >= laws.MIN_MC_BUDGET, f"must be at least {laws.MIN_MC_BUDGET}"),
        ("eps", policy["eps"] > 0, "must be positive"),
        ("eps_c", policy["eps_c"] > 0, "must be positive"),
        ("seed", 0 <= policy["seed"] < 1 << 64, "must be a 64-bit unsigned integer"),
        ("mc_horizon", policy["mc_horizon"] >= 10, "must be at least 10"),
        ("workers", policy["workers"] >= 1, "must be at least 1"),
    ]
    m = policy["m_star"]
    if m is not None:
        checks.append(("m_star", 1 <= m < policy["horizon"], "must lie in [1, horizon)"))
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(f"policy.{key}", msg)


def from_dict(raw):
    name = _get(raw, "name", "", str)
    dim = _get(raw, "dim", "", int)
    if dim < 1:
        raise ConfigError("dim", "must be a positive integer")
    chart_cfg = _get(raw, "chart", "")
    if not isinstance(chart_cfg, dict):
        raise ConfigError("chart", "expected a section")
    kind = _get(chart_cfg, "kind", "chart.", str)
    if kind not in ("affine", "exponential"):
        raise ConfigError("chart.kind", f"expected 'affine' or 'exponential', got {kind!r}")
    try:
        chart = charts.ChartSpec(kind, _get(chart_cfg, "r", "chart.", float), dim)
    except charts.ChartError as exc:
        raise ConfigError("chart.r", str(exc)) from None
    law_cfg = _get(raw, "law", "")
    if not isinstance(law_cfg, dict):
        raise ConfigError("law", "expected a section")
    base = _base_law(law_cfg, dim)
    rate = _rate(law_cfg)
    if isinstance(base, laws.HaarFiniteSubgroup) and not isinstance(rate, laws.Constant):
        raise ConfigError("law.n_dependence", "a Haar law cannot be rescaled; use 'constant'")
    envelope = None
    if "envelope" in law_cfg:
        env = law_cfg["envelope"]
        envelope = (_get(env, "C", "law.envelope.", float), _get(env, "alpha", "law.envelope.", float))
        if envelope[0] <= 0:
            raise ConfigError("law.envelope.C", "must be positive")
    policy_cfg = raw.get("policy", {})
    unknown = set(policy_cfg) - set(POLICY_DEFAULTS)
    if unknown:
        raise ConfigError(f"policy.{sorted(unknown)[0]}", "unknown key")
    policy = dict(POLICY_DEFAULTS)
    policy.update(policy_cfg)
    _check_policy(policy)
    for key in ("eps", "eps_c"):
        policy[key] = float(policy[key])
    seq = laws.LawSequence(base, rate, declared_envelope=envelope, horizon_hint=policy["horizon"])
    return ScenarioConfig(
        name, dim, chart, seq, policy, raw, raw.get("description", ""), raw.get("expected", "")
    )


def loads(text):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("file", f"not valid TOML: {exc}") from None
    return from_dict(raw)


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def _builtin_dir():
    return resources.files("randprod") / "builtin"


def builtin_names():
    return sorted(p.name[: -len(".toml")] for p in _builtin_dir().iterdir() if p.name.endswith(".toml"))


def builtin_text(name):
    path = _builtin_dir() / f"{name}.toml"
    if not path.is_file():
        raise ConfigError("scenario", f"unknown built-in scenario {name!r}; have {', '.join(builtin_names())}")
    return path.read_text(encoding="utf-8")


def builtin(name):
    return loads(builtin_text(name))
