"""Exact oracles for linear classifiers, plus the random-model generator.

For a classifier built only from affine layers the margin toward one target
class is itself affine, margin(x) = c.x + d, so the worst case over an
lp ball has the closed form c.xbar + d - alpha * ||c||_q with q the dual
norm.  These oracles serve as deterministic lower-bound cross-checks for
the sampled certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import Activation, Layer, MarginSpec, Network, _frozen_array
from .sampling import SampleSeed, _generator

_DUAL = {math.inf: 1.0, 1.0: math.inf, 2.0: 2.0}


@dataclass(frozen=True)
class AffineMargin:
    """Coefficients of an affine margin function x -> c.x + d."""

    c: np.ndarray
    d: float

    def __post_init__(self):
        object.__setattr__(self, "c", _frozen_array(self.c, ndim=1))
        object.__setattr__(self, "d", float(self.d))

    def __call__(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=np.float64) + self.d)


def affine_margin(net: Network, spec: MarginSpec) -> AffineMargin:
    """Collapse an all-identity network into the affine margin for one target."""
    if spec.all_targets:
        raise ValueError("affine_margin needs a single target class")
    for k, layer in enumerate(net.layers):
        if layer.activation is not Activation.IDENTITY:
            raise ValueError(
                f"layer {k} has activation {layer.activation.value!r}; "
                "the affine oracle needs identity activations throughout"
            )
    spec.validate_for(net.output_dim, allow_equal=True)
    weights = np.eye(net.input_dim)
    bias = np.zeros(net.input_dim)
    for layer in net.layers:
        bias = layer.weights @ bias + layer.bias
        weights = layer.weights @ weights
    c = weights[spec.true_class] - weights[spec.target_class]
    d = bias[spec.true_class] - bias[spec.target_class]
    return AffineMargin(c=c, d=d)


def dual_norm(c: np.ndarray, p: float) -> float:
    q = _DUAL.get(float(p))
    if q is None:
        raise ValueError(f"unsupported norm order {p!r}; use 1, 2, or inf")
    if math.isinf(q):
        return float(np.max(np.abs(c), initial=0.0))
    if q == 1.0:
        return float(np.abs(c).sum())
    return float(np.linalg.norm(c))


def worst_case_margin(am: AffineMargin, nominal, p: float, alpha: float) -> float:
    """Exact minimum of c.x + d over the lp ball of radius alpha at nominal."""
    if alpha < 0.0:
        raise ValueError(f"radius must be >= 0, got {alpha}")
    return am(nominal) - alpha * dual_norm(am.c, p)


def worst_case_radius(am: AffineMargin, nominal, p: float) -> float:
    """Largest radius with nonnegative margin over the whole ball.

    Returns 0 when the nominal itself has negative margin (composable with
    the radius search's infeasible-at-lo path) and +inf for a constant
    nonnegative margin.
    """
    g0 = am(nominal)
    if g0 < 0.0:
        return 0.0
    q_norm = dual_norm(am.c, p)
    if q_norm == 0.0:
        return math.inf
    return g0 / q_norm


def generate_linear_classifier(n_x: int, n_y: int, seed: SampleSeed) -> Network:
    """Single identity layer with weights and biases i.i.d. uniform on [0, 1]."""
    if n_x < 1 or n_y < 2:
        raise ValueError(f"need n_x >= 1 and n_y >= 2, got ({n_x}, {n_y})")
    gen = _generator(seed)
    weights = gen.random((n_y, n_x))
    bias = gen.random(n_y)
    return Network(layers=(Layer(weights=weights, bias=bias, activation=Activation.IDENTITY),))
