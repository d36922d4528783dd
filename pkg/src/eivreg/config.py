"""Flat ``dotted.key = value`` run configurations.

Lines are ``key = value``; ``#`` starts a comment.  Values are Python literals
(numbers, tuples, lists, booleans) or bare strings.  Example::

    scenario.id = example01
    regression.family = polynomial
    regression.degree = 1
    regression.theta0 = 1.0
    noise.kind = laplaceSymmetric
    noise.sigma = 0.5
    weight.kind = pairing
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from pathlib import Path

from .criteria import CriterionKind
from .errors import ConfigError, EIVError
from .estimators import EstimatorConfig, OptimizerSpec
from .scenarios import CATALOG, Scenario
from .spectral import SINC, KernelSpec

SECTIONS = {
    "run", "scenario", "regression", "noise", "xi", "design", "weight", "estimator", "bandwidth", "optimizer",
    "study", "estimate", "check", "output",
}

_OPTIMIZER_KEYS = {
    "method": "method", "gridPoints": "grid_points", "localIters": "local_iters", "gtol": "gtol",
    "start": "start", "newtonSteps": "newton_steps",
}


def _value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config(text: str) -> dict:
    """Parse the flat format into ``{key: value}``; duplicate or malformed lines raise :class:`ConfigError`."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} must be dotted", key=key)
        if key.split(".", 1)[0] not in SECTIONS:
            raise ConfigError(f"unknown configuration section in {key!r}", key=key)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key=key)
        out[key] = _value(val)
    return out


def load_config(path) -> dict:
    try:
        return parse_config(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", key="--config") from None


def _section(cfg, name, exclude=()):
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix) and k[len(prefix):] not in exclude}


def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}", key=key)
    return cfg[key]


def _tuple(v):
    return tuple(v) if isinstance(v, (tuple, list)) else (v,)


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs, built from the parsed key-value map."""

    raw: dict
    scenario: Scenario
    estimator: EstimatorConfig
    mode: str = "estimate"
    n_grid: tuple = (400, 1600)
    M: int = 100
    seed_base: int = 0
    coverage: str | None = None
    estimate_n: int = 2000
    check_n: int = 20000
    check_cutoffs: tuple = (2.0, 5.0, 10.0)
    out: str = "out"

    @property
    def scenario_id(self) -> str:
        return self.scenario.name


def build_scenario(cfg: dict) -> Scenario:
    """Look up every catalog key and assemble the scenario; errors name the offending key."""
    fam_params = _section(cfg, "regression", exclude=("family", "theta0"))
    family = CATALOG.family(_require(cfg, "regression.family"), **fam_params)
    theta0 = _tuple(_require(cfg, "regression.theta0"))
    noise = CATALOG.noise(_require(cfg, "noise.kind"), **_section(cfg, "noise", exclude=("kind",)))
    xi = CATALOG.xi(cfg.get("xi.kind", "zero"), **_section(cfg, "xi", exclude=("kind",)))
    design = CATALOG.design(cfg.get("design.kind", "gaussian"), **_section(cfg, "design", exclude=("kind",)))
    wkind = cfg.get("weight.kind", "pairing")
    if wkind == "pairing":
        key = cfg.get("weight.pairing", cfg.get("scenario.id"))
        weight = CATALOG.pairing(key).weight(noise, family)
    else:
        weight = CATALOG.weight(wkind, **_section(cfg, "weight", exclude=("kind", "pairing")))
    try:
        kind = CriterionKind(cfg.get("estimator.kind", "tilde1"))
    except ValueError:
        raise ConfigError(f"unknown estimator.kind {cfg.get('estimator.kind')!r}", key="estimator.kind") from None
    kernel_name = cfg.get("estimator.kernel", "sinc")
    kernels = {"sinc": SINC, "indicator": KernelSpec.indicator()}
    if kernel_name not in kernels:
        raise ConfigError(f"unknown estimator.kernel {kernel_name!r}", key="estimator.kernel")
    rule = cfg.get("bandwidth.rule", "auto")
    if rule not in ("auto", "manual"):
        raise ConfigError(f"bandwidth.rule must be auto or manual, got {rule!r}", key="bandwidth.rule")
    Cn = float(_require(cfg, "bandwidth.Cn")) if rule == "manual" else None
    phi = cfg.get("estimator.phi", "fourierRatio")
    if phi not in ("fourierRatio", "closedFormExponential", "closedFormCosine"):
        raise ConfigError(f"unknown estimator.phi {phi!r}", key="estimator.phi")
    try:
        return Scenario(str(cfg.get("scenario.id", "custom")), family, theta0, noise, xi, design, weight, kind,
                        phi, kernels[kernel_name], Cn)
    except EIVError as exc:
        raise ConfigError(f"invalid regression.theta0: {exc}", key="regression.theta0") from None


def build_run_config(cfg: dict, mode=None, seed=None, out=None, threads=None) -> RunConfig:
    scenario = build_scenario(cfg)
    opt = {_OPTIMIZER_KEYS[k]: v for k, v in _section(cfg, "optimizer").items() if k in _OPTIMIZER_KEYS}
    unknown = set(_section(cfg, "optimizer")) - set(_OPTIMIZER_KEYS)
    if unknown:
        raise ConfigError(f"unknown optimizer keys {sorted(unknown)}", key="optimizer." + sorted(unknown)[0])
    if threads is not None:
        opt["threads"] = int(threads)
    try:
        optimizer = OptimizerSpec(**opt)
    except EIVError as exc:
        raise ConfigError(str(exc), key="optimizer") from None
    mode = mode or cfg.get("run.mode", "estimate")
    if mode not in ("estimate", "study", "check"):
        raise ConfigError(f"unknown mode {mode!r}", key="run.mode")
    coverage = cfg.get("study.coverage", None)
    if coverage in (False, "none"):
        coverage = None
    return RunConfig(
        raw=cfg,
        scenario=scenario,
        estimator=EstimatorConfig(scenario.kind, optimizer),
        mode=mode,
        n_grid=tuple(int(n) for n in _tuple(cfg.get("study.nGrid", (400, 1600)))),
        M=int(cfg.get("study.M", 100)),
        seed_base=int(seed if seed is not None else cfg.get("study.seedBase", 0)),
        coverage=coverage,
        estimate_n=int(cfg.get("estimate.n", 2000)),
        check_n=int(cfg.get("check.n", 20000)),
        check_cutoffs=tuple(float(c) for c in _tuple(cfg.get("check.Cn", (2.0, 5.0, 10.0)))),
        out=str(out or cfg.get("output.dir", "out")),
    )
