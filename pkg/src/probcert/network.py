"""Fully connected classifiers, batch forward passes, and margin functions.

All arithmetic is float64 on purpose: the certificate downstream is a
minimum over sampled margins, and single-precision rounding could flip the
sign of a near-zero minimum.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericOverflowError

# Sentinel target: take the minimum margin over every class != true class.
ALL_TARGETS = "all"

# Fixed number of samples per work item in batch evaluation, so results are
# bit-identical for any worker count.
_CHUNK = 1024


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    ARCTAN = "arctan"
    IDENTITY = "identity"


def _apply_activation(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    if kind is Activation.TANH:
        return np.tanh(z)
    if kind is Activation.SIGMOID:
        return expit(z)
    if kind is Activation.ARCTAN:
        # principal inverse tangent, range (-pi/2, pi/2)
        return np.arctan(z)
    return z


def _frozen_array(values, dtype=np.float64, ndim=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Layer:
    """One affine transform (rows = output units) plus an elementwise activation."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen_array(self.weights, ndim=2))
        object.__setattr__(self, "bias", _frozen_array(self.bias, ndim=1))
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.bias.shape[0] != self.weights.shape[0]:
            raise DimensionError(
                f"bias length {self.bias.shape[0]} != weight rows {self.weights.shape[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    """An ordered stack of layers; immutable and safe to share across workers."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DimensionError("a network needs at least one layer")
        object.__setattr__(self, "layers", layers)
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise DimensionError(
                    f"layer {k} expects {layers[k].in_dim} inputs but layer "
                    f"{k - 1} produces {layers[k - 1].out_dim}"
                )
        if self.output_dim < 2:
            raise DimensionError("classification needs at least two output classes")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass(frozen=True)
class MarginSpec:
    """True class plus a single target class, or ALL_TARGETS for the one-shot
    minimum over every other class.

    Class indices are 0-based.  target_class == true_class is representable
    (its margin is identically zero); certification entry points reject it.
    """

    true_class: int
    target_class: Union[int, str]

    def __post_init__(self):
        if self.target_class != ALL_TARGETS and not isinstance(self.target_class, (int, np.integer)):
            raise ValueError(f"target_class must be an index or {ALL_TARGETS!r}")

    @property
    def all_targets(self) -> bool:
        return self.target_class == ALL_TARGETS

    def validate_for(self, n_classes: int, allow_equal: bool = False) -> None:
        if not 0 <= self.true_class < n_classes:
            raise ValueError(f"true class {self.true_class} out of range [0, {n_classes})")
        if self.all_targets:
            return
        if not 0 <= self.target_class < n_classes:
            raise ValueError(f"target class {self.target_class} out of range [0, {n_classes})")
        if not allow_equal and self.target_class == self.true_class:
            raise ValueError("target class must differ from the true class")


def _check_inputs(net: Network, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DimensionError(
            f"inputs have shape {X.shape}, expected (*, {net.input_dim})"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input value")


def _forward_chunk(net: Network, X: np.ndarray) -> np.ndarray:
    h = X
    for k, layer in enumerate(net.layers):
        h = _apply_activation(layer.activation, h @ layer.weights.T + layer.bias)
        if not np.all(np.isfinite(h)):
            raise NumericOverflowError(f"non-finite value after layer {k}")
    return h


def _forward_batch(net: Network, X: np.ndarray, threads: int = 1) -> np.ndarray:
    """Chunked batch forward pass; output row order matches input order."""
    _check_inputs(net, X)
    if X.shape[0] == 0:
        return np.empty((0, net.output_dim))
    chunks = [X[i : i + _CHUNK] for i in range(0, X.shape[0], _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _forward_chunk(net, c), chunks))
    else:
        parts = [_forward_chunk(net, c) for c in chunks]
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def forward(net: Network, x: Sequence[float]) -> np.ndarray:
    """Evaluate the network on one input vector, returning the logits."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return _forward_batch(net, X)[0]


def classify(net: Network, x: Sequence[float]) -> int:
    """Index of the largest logit; ties break to the lowest class index."""
    return int(np.argmax(forward(net, x)))


def margin(net: Network, spec: MarginSpec, x: Sequence[float]) -> float:
    """Margin of the true class over a single target class, f_true - f_target.

    Both scores come from one forward pass.  Nonnegative means no
    misclassification toward the target.
    """
    if spec.all_targets:
        raise ValueError("margin() needs a single target class; use margin_batch for ALL")
    spec.validate_for(net.output_dim, allow_equal=True)
    logits = forward(net, x)
    return float(logits[spec.true_class] - logits[spec.target_class])


def margin_batch(
    net: Network,
    spec: MarginSpec,
    xs: Sequence[Sequence[float]],
    threads: int = 1,
) -> np.ndarray:
    """Margins for a batch of inputs, in input order.

    Single target: elementwise margin.  ALL_TARGETS: per sample, the minimum
    margin over every class != true class, i.e. f_true - max of the others.
    """
    X = np.asarray(xs, dtype=np.float64)
    if X.size == 0:
        return np.empty(0)
    spec.validate_for(net.output_dim, allow_equal=True)
    logits = _forward_batch(net, X, threads=threads)
    true_scores = logits[:, spec.true_class]
    if spec.all_targets:
        others = np.delete(logits, spec.true_class, axis=1)
        return true_scores - others.max(axis=1)
    return true_scores - logits[:, spec.target_class]
