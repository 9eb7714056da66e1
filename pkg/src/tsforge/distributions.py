"""Sampling distributions for static attributes and dwell times.

A :class:`Distribution` is a small tagged value: a family name plus the
parameters that family needs.  The same machinery serves entity
attributes (any family) and state dwell times (exponential, lognormal,
or constant, in milliseconds).

Supported families and parameters:

    normal        mu, sigma
    uniform       low, high
    categorical   values, weights (weights sum to 1 within 1e-9)
    exponential   mean (or rate, exactly one)
    lognormal     mu, sigma  (parameters of the underlying normal)
    constant      value

An optional :class:`Domain` restricts output: numeric samples are
clamped into ``[low, high]`` after sampling, categorical values are
restricted to an allow-list (with weight renormalization).  A domain
that excludes all probability mass raises :class:`DomainEmpty`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainEmpty, SpecError

NUMERIC_FAMILIES = ("normal", "uniform", "exponential", "lognormal")
FAMILIES = NUMERIC_FAMILIES + ("categorical", "constant")
DWELL_FAMILIES = ("exponential", "lognormal", "constant")

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Domain:
    """Optional restriction on a distribution's output."""

    low: float | None = None
    high: float | None = None
    allow: tuple[Any, ...] | None = None


@dataclass(frozen=True)
class Distribution:
    family: str
    params: dict[str, Any] = field(default_factory=dict)
    domain: Domain | None = None

    def __post_init__(self) -> None:
        validate_distribution(self)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SpecError(message)


def validate_distribution(dist: Distribution) -> None:
    """Raise SpecError / DomainEmpty if the distribution is malformed."""
    p = dist.params
    fam = dist.family
    _require(fam in FAMILIES, f"unknown distribution family {fam!r}")
    if fam == "normal":
        _require("mu" in p and "sigma" in p, "normal requires mu and sigma")
        _require(float(p["sigma"]) >= 0, "normal sigma must be >= 0")
    elif fam == "uniform":
        _require("low" in p and "high" in p, "uniform requires low and high")
        _require(float(p["low"]) <= float(p["high"]), "uniform needs low <= high")
    elif fam == "categorical":
        values = p.get("values")
        weights = p.get("weights")
        _require(bool(values), "categorical requires non-empty values")
        _require(weights is not None and len(weights) == len(values),
                 "categorical weights must match values")
        _require(all(float(w) >= 0 for w in weights),
                 "categorical weights must be non-negative")
        _require(abs(sum(float(w) for w in weights) - 1.0) <= _WEIGHT_TOL,
                 "categorical weights must sum to 1")
        if dist.domain is not None and dist.domain.allow is not None:
            kept = [w for v, w in zip(values, weights) if v in dist.domain.allow]
            if not kept or sum(float(w) for w in kept) <= 0:
                raise DomainEmpty("allow-list excludes every categorical value")
    elif fam == "exponential":
        has_mean = "mean" in p
        has_rate = "rate" in p
        _require(has_mean != has_rate, "exponential requires exactly one of mean/rate")
        scale = float(p["mean"]) if has_mean else 1.0 / float(p["rate"])
        _require(scale > 0, "exponential mean must be positive")
    elif fam == "lognormal":
        _require("mu" in p and "sigma" in p, "lognormal requires mu and sigma")
        _require(float(p["sigma"]) >= 0, "lognormal sigma must be >= 0")
    elif fam == "constant":
        _require("value" in p, "constant requires value")
        if dist.domain is not None and dist.domain.allow is not None:
            if p["value"] not in dist.domain.allow:
                raise DomainEmpty("allow-list excludes the constant value")
    if dist.domain is not None and dist.domain.low is not None \
            and dist.domain.high is not None:
        if float(dist.domain.low) > float(dist.domain.high):
            raise DomainEmpty("domain clamp has low > high")


def _clamp(value: float, domain: Domain | None) -> float:
    if domain is None:
        return value
    if domain.low is not None and value < domain.low:
        value = float(domain.low)
    if domain.high is not None and value > domain.high:
        value = float(domain.high)
    return value


def sample(dist: Distribution, rng: np.random.Generator) -> Any:
    """Draw one value.  Numeric draws are clamped into the domain."""
    p = dist.params
    fam = dist.family
    if fam == "constant":
        value = p["value"]
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return _clamp(float(value), dist.domain)
        return value
    if fam == "categorical":
        values = list(p["values"])
        weights = [float(w) for w in p["weights"]]
        if dist.domain is not None and dist.domain.allow is not None:
            pairs = [(v, w) for v, w in zip(values, weights) if v in dist.domain.allow]
            values = [v for v, _ in pairs]
            weights = [w for _, w in pairs]
        total = sum(weights)
        u = rng.random() * total
        acc = 0.0
        for v, w in zip(values, weights):
            acc += w
            if u < acc:
                return v
        return values[-1]
    if fam == "normal":
        value = p["mu"] + p["sigma"] * rng.standard_normal()
    elif fam == "uniform":
        value = p["low"] + (p["high"] - p["low"]) * rng.random()
    elif fam == "exponential":
        scale = p["mean"] if "mean" in p else 1.0 / p["rate"]
        value = rng.exponential(scale)
    elif fam == "lognormal":
        value = math.exp(p["mu"] + p["sigma"] * rng.standard_normal())
    else:  # pragma: no cover - guarded by validate_distribution
        raise SpecError(f"unknown family {fam!r}")
    return _clamp(float(value), dist.domain)


def dist_mean(dist: Distribution) -> float:
    """Analytic mean, used to check simulated dwell times against spec."""
    p = dist.params
    fam = dist.family
    if fam == "normal":
        return float(p["mu"])
    if fam == "uniform":
        return (float(p["low"]) + float(p["high"])) / 2.0
    if fam == "exponential":
        return float(p["mean"]) if "mean" in p else 1.0 / float(p["rate"])
    if fam == "lognormal":
        return math.exp(float(p["mu"]) + float(p["sigma"]) ** 2 / 2.0)
    if fam == "constant":
        return float(p["value"])
    raise SpecError(f"no analytic mean for family {fam!r}")


def dist_variance(dist: Distribution) -> float:
    """Analytic variance, used for standard-error bounds in tests."""
    p = dist.params
    fam = dist.family
    if fam == "normal":
        return float(p["sigma"]) ** 2
    if fam == "uniform":
        return (float(p["high"]) - float(p["low"])) ** 2 / 12.0
    if fam == "exponential":
        return dist_mean(dist) ** 2
    if fam == "lognormal":
        s2 = float(p["sigma"]) ** 2
        return (math.exp(s2) - 1.0) * math.exp(2.0 * float(p["mu"]) + s2)
    if fam == "constant":
        return 0.0
    raise SpecError(f"no analytic variance for family {fam!r}")
