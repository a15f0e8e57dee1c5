"""Scenario-based robustness certificates and a posteriori estimation.

The certificate draws N i.i.d. inputs, takes the minimum sampled margin
r_hat, and declares the classifier probabilistically robust when
r_hat >= 0.  With N >= ceil((2/eps) * (ln(1/delta) + 1)) the declared bound
P(margin >= 0) >= 1 - eps holds with probability at least 1 - delta over
the sampling.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import beta

from .network import MarginSpec, Network, margin_batch
from .sampling import NoiseModel, SampleSeed, sample
from .errors import DimensionError

# Substream tag for a posteriori estimation, far outside the bisection
# iteration tag range so the two never share samples.
_ESTIMATE_STREAM_TAG = 0x455354494D415445

DEFAULT_ESTIMATE_CONFIDENCE = 1.0 - 1e-3


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not (np.isfinite(value) and 0.0 < value < 1.0):
        raise ValueError(f"{name} must lie strictly in (0, 1), got {value}")
    return value


def required_sample_count(epsilon: float, delta_confidence: float) -> int:
    """Smallest N with N >= (2/eps) * (ln(1/delta) + 1); natural logarithm."""
    epsilon = _check_probability("epsilon", epsilon)
    delta_confidence = _check_probability("delta_confidence", delta_confidence)
    return math.ceil((2.0 / epsilon) * (math.log(1.0 / delta_confidence) + 1.0))


def scenario_value(margins) -> float:
    """Minimum sampled margin: the exact optimizer of the scenario program."""
    arr = np.asarray(margins, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("scenario value of an empty margin list is undefined")
    if not np.all(np.isfinite(arr)):
        raise ValueError("margins contain a non-finite value")
    return float(arr.min())


@dataclass(frozen=True)
class CertificationSpec:
    """Probability levels: epsilon bounds the misclassification probability,
    delta_confidence bounds the chance the certificate itself is wrong."""

    epsilon: float
    delta_confidence: float
    margin_spec: MarginSpec

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_probability("epsilon", self.epsilon))
        object.__setattr__(
            self,
            "delta_confidence",
            _check_probability("delta_confidence", self.delta_confidence),
        )


@dataclass(frozen=True)
class Certificate:
    """Result record of one certification run.

    certified == (r_hat >= 0); when certified, with probability >= 1 - delta
    over the sampling, the misclassification probability is <= epsilon.
    """

    n_samples: int
    r_hat: float
    certified: bool
    epsilon: float
    delta_confidence: float
    seed: SampleSeed
    noise_model_digest: str
    timestamp: str

    def __post_init__(self):
        if self.certified != (self.r_hat >= 0.0):
            raise ValueError("certified flag must equal (r_hat >= 0)")
        if self.n_samples < required_sample_count(self.epsilon, self.delta_confidence):
            raise ValueError("n_samples is below the guarantee threshold")


@dataclass(frozen=True)
class EstimateResult:
    """Monte Carlo estimate of P(margin >= 0) with a one-sided lower bound."""

    m: int
    successes: int
    point_estimate: float
    lower_confidence_bound: float
    confidence: float


def noise_model_digest(model: NoiseModel) -> str:
    payload = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _utc_now() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).isoformat()


def certify(
    net: Network,
    model: NoiseModel,
    spec: CertificationSpec,
    seed: SampleSeed,
    n_override: Optional[int] = None,
    threads: int = 1,
) -> Certificate:
    """Draw N samples, evaluate margins, and decide via the minimum margin.

    n_override may only increase N beyond the guarantee threshold; extra
    samples tighten r_hat downward and never void the guarantee.
    """
    spec.margin_spec.validate_for(net.output_dim)
    if model.dim != net.input_dim:
        raise DimensionError(
            f"noise model dimension {model.dim} != network input {net.input_dim}"
        )
    n_required = required_sample_count(spec.epsilon, spec.delta_confidence)
    if n_override is None:
        n = n_required
    else:
        n = int(n_override)
        if n < n_required:
            raise ValueError(
                f"n_override {n} is below the guarantee threshold {n_required}"
            )
    xs = sample(model, n, seed)
    r_hat = scenario_value(margin_batch(net, spec.margin_spec, xs, threads=threads))
    return Certificate(
        n_samples=n,
        r_hat=r_hat,
        certified=r_hat >= 0.0,
        epsilon=spec.epsilon,
        delta_confidence=spec.delta_confidence,
        seed=seed,
        noise_model_digest=noise_model_digest(model),
        timestamp=_utc_now(),
    )


def clopper_pearson_lower(successes: int, m: int, confidence: float) -> float:
    """One-sided lower Clopper-Pearson bound for a binomial proportion."""
    if not 0 <= successes <= m:
        raise ValueError(f"need 0 <= successes <= m, got {successes}/{m}")
    _check_probability("confidence", confidence)
    if successes == 0:
        return 0.0
    return float(beta.ppf(1.0 - confidence, successes, m - successes + 1))


def estimate_success_probability(
    net: Network,
    model: NoiseModel,
    margin_spec: MarginSpec,
    m: int,
    seed: SampleSeed,
    confidence: float = DEFAULT_ESTIMATE_CONFIDENCE,
    threads: int = 1,
) -> EstimateResult:
    """Monte Carlo frequency of nonnegative margin over m fresh samples.

    Uses a substream derived from `seed`, distinct from the certification
    stream, so the estimate never reuses certification samples.
    """
    if m < 1:
        raise ValueError(f"estimation needs m >= 1 samples, got {m}")
    margin_spec.validate_for(net.output_dim)
    if model.dim != net.input_dim:
        raise DimensionError(
            f"noise model dimension {model.dim} != network input {net.input_dim}"
        )
    xs = sample(model, m, seed.derive(_ESTIMATE_STREAM_TAG))
    margins = margin_batch(net, margin_spec, xs, threads=threads)
    successes = int(np.count_nonzero(margins >= 0.0))
    return EstimateResult(
        m=m,
        successes=successes,
        point_estimate=successes / m,
        lower_confidence_bound=clopper_pearson_lower(successes, m, confidence),
        confidence=confidence,
    )
