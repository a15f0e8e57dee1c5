"""Bisection search for the largest certifiable lp-ball noise radius.

Each iteration redraws fresh samples at the midpoint radius (the input set
changes with the radius, so samples cannot be reused) from a stream derived
from the iteration index, which keeps whole searches replayable.  Two
safeguards bound the loop, which would otherwise not terminate when no
probed radius certifies: a feasibility probe at the lower endpoint before
the loop, and an iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .certify import CertificationSpec, required_sample_count, scenario_value
from .errors import DimensionError
from .network import Network, margin_batch
from .sampling import NoiseModel, SampleSeed, UniformBall, sample


class RadiusSearchStatus(str, Enum):
    CERTIFIED = "certified"
    NOT_CERTIFIABLE_AT_LO = "not_certifiable_at_lo"
    ITERATION_CAP_REACHED = "iteration_cap_reached"


@dataclass(frozen=True)
class RadiusSearchSpec:
    """Bisection interval, absolute radius tolerance, and probability levels."""

    alpha_lo: float
    alpha_hi: float
    tolerance: float
    p: float
    cert_spec: CertificationSpec
    max_iterations: int = 64

    def __post_init__(self):
        if not 0.0 < self.alpha_lo < self.alpha_hi:
            raise ValueError(
                f"need 0 < alpha_lo < alpha_hi, got ({self.alpha_lo}, {self.alpha_hi})"
            )
        if not 0.0 < self.tolerance < self.alpha_hi - self.alpha_lo:
            raise ValueError(
                f"tolerance must lie in (0, alpha_hi - alpha_lo), got {self.tolerance}"
            )
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        UniformBall(self.p, self.alpha_lo)  # validates the norm order


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    alpha: float
    r_hat: float
    n_samples: int


@dataclass(frozen=True)
class RadiusSearchResult:
    """Search outcome.  alpha is the certified radius for CERTIFIED, the best
    certified midpoint for ITERATION_CAP_REACHED, and None otherwise."""

    status: RadiusSearchStatus
    alpha: Optional[float]
    trace: Tuple[TraceEntry, ...]
    final_interval: Tuple[float, float]


def derive_iteration_seed(seed: SampleSeed, iteration: int) -> SampleSeed:
    """Fresh stream for one bisection iteration; injective in the iteration."""
    return seed.derive(iteration)


def max_radius(
    net: Network,
    nominal,
    spec: RadiusSearchSpec,
    seed: SampleSeed,
    threads: int = 1,
    clamp01: bool = False,
) -> RadiusSearchResult:
    """Bisection for the largest radius whose uniform lp-ball certifies.

    The returned radius is the exiting midpoint: the last radius the loop
    proved certifiable with the final interval no wider than the tolerance.
    Iteration 0 in the trace is the feasibility probe at alpha_lo.
    """
    nominal = np.asarray(nominal, dtype=np.float64)
    cert = spec.cert_spec
    cert.margin_spec.validate_for(net.output_dim)
    if nominal.shape != (net.input_dim,):
        raise DimensionError(
            f"nominal has shape {nominal.shape}, expected ({net.input_dim},)"
        )
    n = required_sample_count(cert.epsilon, cert.delta_confidence)
    trace: List[TraceEntry] = []

    def evaluate(radius: float, iteration: int) -> float:
        model = NoiseModel(nominal, UniformBall(spec.p, radius), clamp01=clamp01)
        xs = sample(model, n, derive_iteration_seed(seed, iteration))
        r_hat = scenario_value(margin_batch(net, cert.margin_spec, xs, threads=threads))
        trace.append(TraceEntry(iteration, radius, r_hat, n))
        return r_hat

    lo, hi = spec.alpha_lo, spec.alpha_hi
    if evaluate(lo, 0) < 0.0:
        return RadiusSearchResult(
            RadiusSearchStatus.NOT_CERTIFIABLE_AT_LO, None, tuple(trace), (lo, hi)
        )

    r_hat = 0.0
    alpha = lo
    iteration = 0
    while hi - lo > spec.tolerance or r_hat < 0.0:
        if iteration >= spec.max_iterations:
            certified = [t.alpha for t in trace if t.iteration >= 1 and t.r_hat >= 0.0]
            if not certified:
                return RadiusSearchResult(
                    RadiusSearchStatus.NOT_CERTIFIABLE_AT_LO, None, tuple(trace), (lo, hi)
                )
            return RadiusSearchResult(
                RadiusSearchStatus.ITERATION_CAP_REACHED,
                max(certified),
                tuple(trace),
                (lo, hi),
            )
        iteration += 1
        alpha = 0.5 * (lo + hi)
        r_hat = evaluate(alpha, iteration)
        if r_hat > 0.0:
            lo = alpha
        else:
            hi = alpha

    return RadiusSearchResult(RadiusSearchStatus.CERTIFIED, alpha, tuple(trace), (lo, hi))
