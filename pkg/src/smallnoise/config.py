"""JSON run configuration: parsing and validation into library objects.

Every section is checked before any computation; unknown keys are
rejected and errors name the offending ``section.key``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, DomainError
from .estimators import EstimatorConfig, Explicit, RateK, RateRho, TARGET_J, TARGET_THETA
from .gp_cov import CovarianceModel, GridSpec
from .kernels import KernelFunction, build_higher_order, builtin
from .mc_harness import TARGETS, ExperimentPlan
from .sde_sim import SdeConfig
from .trends import Theta0, ThetaK, ThetaRho, TrendFunction, make_trend

__all__ = ["RunConfig", "load_config", "parse_config"]

_SECTIONS = {
    "model": {"kind", "hurst", "bi_exponent"},
    "trend": {"form", "params", "bound_L", "smoothness"},
    "sde": {"x0", "epsilon", "T", "n_steps"},
    "kernel": {"name", "order"},
    "estimator": {"rule", "window", "target", "n_eval", "override_resolution"},
    "experiment": {"target", "epsilons", "n_reps", "eval_points", "n_eval", "seed",
                   "chunk_size"},
}


@dataclass(eq=False)
class RunConfig:
    raw: dict
    model: CovarianceModel
    trend: TrendFunction
    sde: SdeConfig
    kernel: Optional[KernelFunction]
    estimator: Optional[EstimatorConfig]
    n_eval: int
    seed: int
    experiment: Optional[dict]

    def plan(self, n_reps_override=None) -> ExperimentPlan:
        exp = self.experiment
        if exp is None:
            raise ConfigError("experiment section is required")
        eps = exp["epsilons"]
        est = self.estimator
        if est is not None and exp["target"] == "RateTheta" and est.target != TARGET_THETA:
            est = EstimatorConfig(est.kernel, est.epsilon, est.rule, est.window,
                                  TARGET_THETA, est.allow_coarse)
        try:
            return ExperimentPlan(
                sde=self.sde, epsilons=eps, n_reps=exp["n_reps"], target=exp["target"],
                estimator=est, eval_points=exp.get("eval_points"),
                n_eval=exp.get("n_eval", 21), seed_base=self.seed,
                chunk_size=exp.get("chunk_size", 50))
        except ConfigError as exc:
            raise ConfigError(f"experiment: {exc}") from exc


def _need(section: dict, name: str, key: str):
    if key not in section:
        raise ConfigError(f"{name}.{key} is required")
    return section[key]


def _number(section, name, key, default=None, kind=float):
    v = section.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{name}.{key} must be an integer")
        return int(v)
    return float(v)


def _model(sec) -> CovarianceModel:
    kind = sec.get("kind", "FractionalBM")
    hurst = _number(sec, "model", "hurst", 0.5)
    bi = _number(sec, "model", "bi_exponent", 1.0)
    if not 0 < hurst < 1:
        raise ConfigError("model.hurst out of range (0,1)")
    if not 0 < bi <= 1:
        raise ConfigError("model.bi_exponent out of range (0,1]")
    if kind == "Custom":
        raise ConfigError("model.kind Custom is only available from the library API")
    try:
        return CovarianceModel(kind, hurst, bi)
    except DomainError as exc:
        raise ConfigError(f"model.kind: {exc}") from exc


def _smoothness(spec):
    if spec is None:
        return None
    if not isinstance(spec, dict) or "class" not in spec:
        raise ConfigError("trend.smoothness must be an object with a 'class' key")
    cls = spec["class"]
    args = {k: v for k, v in spec.items() if k != "class"}
    try:
        if cls == "Theta0":
            return Theta0(**args)
        if cls == "ThetaK":
            return ThetaK(**args)
        if cls == "ThetaRho":
            return ThetaRho(**args)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"trend.smoothness: {exc}") from exc
    raise ConfigError(f"trend.smoothness.class {cls!r} unknown")


def _trend(sec, T) -> TrendFunction:
    form = _need(sec, "trend", "form")
    params = sec.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("trend.params must be an object")
    bound = _number(sec, "trend", "bound_L")
    try:
        trend = make_trend(form, params, bound, _smoothness(sec.get("smoothness")), T)
        trend.validate(T)
    except TypeError as exc:
        raise ConfigError(f"trend.params: {exc}") from exc
    except DomainError as exc:
        raise ConfigError(f"trend: {exc}") from exc
    return trend


def _kernel(sec) -> KernelFunction:
    try:
        if "order" in sec:
            return build_higher_order(_number(sec, "kernel", "order", kind=int))
        name = sec.get("name", "epanechnikov")
        if isinstance(name, str) and name.startswith("order:"):
            return build_higher_order(int(name.split(":", 1)[1]))
        return builtin(name)
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"kernel.name: {exc}") from exc


def _rule(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("estimator.rule must be an object with a 'kind' key")
    kind = spec["kind"]
    extra = set(spec) - {"kind", "phi", "k", "rho"}
    if extra:
        raise ConfigError(f"estimator.rule.{sorted(extra)[0]} is not a recognized key")
    if kind == "explicit":
        return Explicit(_number(spec, "estimator.rule", "phi"))
    if kind == "rate_k":
        return RateK(_number(spec, "estimator.rule", "k", kind=int))
    if kind == "rate_rho":
        return RateRho(_number(spec, "estimator.rule", "rho"))
    raise ConfigError(f"estimator.rule.kind {kind!r} unknown (explicit, rate_k, rate_rho)")


def parse_config(doc: dict, seed=None, epsilon=None, override_resolution=False) -> RunConfig:
    """Validate a config document; CLI overrides are applied before validation."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for name in doc:
        if name not in _SECTIONS:
            raise ConfigError(f"{name} is not a recognized section")
    for name, allowed in _SECTIONS.items():
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"{name} must be an object")
        for key in sec:
            if key not in allowed:
                raise ConfigError(f"{name}.{key} is not a recognized key")

    sde_sec = doc.get("sde", {})
    T = _number(sde_sec, "sde", "T", 1.0)
    n_steps = _number(sde_sec, "sde", "n_steps", 2048, kind=int)
    x0 = _number(sde_sec, "sde", "x0", 1.0)
    eps = epsilon if epsilon is not None else _number(sde_sec, "sde", "epsilon", 0.1)
    if eps < 0:
        raise ConfigError("sde.epsilon must be >= 0")
    try:
        grid = GridSpec(T, n_steps)
    except DomainError as exc:
        raise ConfigError(f"sde: {exc}") from exc

    model = _model(doc.get("model", {}))
    trend = _trend(_need(doc, "config", "trend"), T)
    sde = SdeConfig(x0, eps, trend, model, grid)

    kernel = _kernel(doc.get("kernel", {}))
    est_sec = doc.get("estimator")
    estimator = None
    n_eval = 21
    if est_sec is not None:
        target = est_sec.get("target", TARGET_J)
        if target not in (TARGET_J, TARGET_THETA):
            raise ConfigError(f"estimator.target {target!r} unknown (J, Theta)")
        window = est_sec.get("window")
        if window is not None and (not isinstance(window, list) or len(window) != 2):
            raise ConfigError("estimator.window must be [c, d] or null")
        n_eval = _number(est_sec, "estimator", "n_eval", 21, kind=int)
        allow = bool(est_sec.get("override_resolution", False)) or override_resolution
        estimator = EstimatorConfig(kernel, eps, _rule(_need(est_sec, "estimator", "rule")),
                                    None if window is None else tuple(window), target, allow)

    exp_sec = doc.get("experiment")
    experiment = None
    seed_val = _number(exp_sec or {}, "experiment", "seed", 0, kind=int)
    if exp_sec is not None:
        target = _need(exp_sec, "experiment", "target")
        if target not in TARGETS:
            raise ConfigError(f"experiment.target {target!r} unknown {TARGETS}")
        epsilons = [float(e) for e in _need(exp_sec, "experiment", "epsilons")]
        if epsilon is not None:
            epsilons = [float(epsilon)]
        experiment = {
            "target": target,
            "epsilons": epsilons,
            "n_reps": _number(exp_sec, "experiment", "n_reps", kind=int)
            if "n_reps" in exp_sec else _need(exp_sec, "experiment", "n_reps"),
            "eval_points": exp_sec.get("eval_points"),
            "n_eval": _number(exp_sec, "experiment", "n_eval", 21, kind=int),
            "chunk_size": _number(exp_sec, "experiment", "chunk_size", 50, kind=int),
        }
    if seed is not None:
        seed_val = int(seed)
    return RunConfig(doc, model, trend, sde, kernel, estimator, n_eval, seed_val, experiment)


def load_config(path, **overrides) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, **overrides)
