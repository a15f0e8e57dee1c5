"""I.i.d. input sampling with reproducible, splittable random streams.

A sampled input always decomposes as nominal + noise.  Randomness comes
from the counter-based Philox generator keyed directly by
(root_seed, stream_id); draws that need two independent variate roles
(direction and radius for the lp-ball constructions) start at disjoint
counter offsets of the same key, so a stream is fully determined by its
seed no matter how many variates each role consumes.

Sample generation is vectorized and sequential per stream, which makes
the results independent of worker counts by construction; concurrency
lives in margin evaluation, where the actual cost is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError
from .network import _frozen_array

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Absolute tolerance on lp-norm membership checks: direction normalization
# can overshoot the radius by a few ulps.
NORM_TOL = 1e-12

_ALLOWED_P = (1.0, 2.0, math.inf)


def _mix64(z: int) -> int:
    """SplitMix64 finalizer; a bijection on 64-bit words."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SampleSeed:
    """Root seed plus a stream id; distinct stream ids behave independently."""

    root_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("root_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def derive(self, tag: int) -> "SampleSeed":
        """Child seed for substream `tag`; injective in tag for a fixed seed."""
        # GOLDEN is odd, so tag -> stream_id + GOLDEN*(tag+1) is injective
        # mod 2^64, and the SplitMix64 finalizer is a bijection.
        child = _mix64((self.stream_id + _GOLDEN * (tag + 1)) & _MASK64)
        return SampleSeed(self.root_seed, child)


def _generator(seed: SampleSeed, role: int = 0) -> np.random.Generator:
    """Philox stream for (seed, role); roles start 2^192 counter blocks apart."""
    key = np.array([seed.root_seed, seed.stream_id], dtype=np.uint64)
    counter = np.array([0, 0, 0, role], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True)
class UniformBall:
    """Uniform distribution on the lp ball of radius alpha, p in {1, 2, inf}."""

    p: float
    alpha: float

    def __post_init__(self):
        p = float(self.p)
        if p not in _ALLOWED_P:
            raise ValueError(f"unsupported norm order {self.p!r}; use 1, 2, or inf")
        object.__setattr__(self, "p", p)
        if not (np.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"ball radius must be finite and >= 0, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))


@dataclass(frozen=True)
class Gaussian:
    """Isotropic Gaussian noise with per-coordinate standard deviation sigma."""

    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class Empirical:
    """Uniform draws (with replacement) from a finite set of noise vectors."""

    deltas: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.deltas, ndim=2)
        if arr.shape[0] == 0:
            raise ValueError("empirical noise needs at least one vector")
        object.__setattr__(self, "deltas", arr)


NoiseSpec = Union[UniformBall, Gaussian, Empirical]


@dataclass(frozen=True)
class NoiseModel:
    """Distribution of the random input X = nominal + noise.

    clamp01 clips sampled inputs into [0, 1] after perturbation.  It is off
    by default because clipping changes the distribution; turn it on only
    when inputs must stay in a pixel-style range.
    """

    nominal: np.ndarray
    noise: NoiseSpec
    clamp01: bool = False

    def __post_init__(self):
        nominal = _frozen_array(self.nominal, ndim=1)
        if not np.all(np.isfinite(nominal)):
            raise ValueError("nominal input has non-finite entries")
        object.__setattr__(self, "nominal", nominal)
        if isinstance(self.noise, Empirical) and self.noise.deltas.shape[1] != nominal.shape[0]:
            raise DimensionError(
                f"empirical noise vectors have length {self.noise.deltas.shape[1]}, "
                f"nominal has length {nominal.shape[0]}"
            )

    @property
    def dim(self) -> int:
        return self.nominal.shape[0]

    def to_dict(self) -> dict:
        return {
            "nominal": self.nominal.tolist(),
            "noise": noise_spec_to_dict(self.noise),
            "clamp01": self.clamp01,
        }


def p_to_json(p: float) -> object:
    return "inf" if math.isinf(p) else int(p)


def p_from_json(value) -> float:
    if value in ("inf", "Infinity"):
        return math.inf
    return float(value)


def noise_spec_to_dict(spec: NoiseSpec) -> dict:
    if isinstance(spec, UniformBall):
        return {"kind": "uniform_ball", "p": p_to_json(spec.p), "alpha": spec.alpha}
    if isinstance(spec, Gaussian):
        return {"kind": "gaussian", "sigma": spec.sigma}
    if isinstance(spec, Empirical):
        return {"kind": "empirical", "deltas": spec.deltas.tolist()}
    raise TypeError(f"unknown noise spec {spec!r}")


def noise_spec_from_dict(d: dict) -> NoiseSpec:
    kind = d.get("kind")
    if kind == "uniform_ball":
        return UniformBall(p=p_from_json(d["p"]), alpha=float(d["alpha"]))
    if kind == "gaussian":
        return Gaussian(sigma=float(d["sigma"]))
    if kind == "empirical":
        return Empirical(deltas=np.asarray(d["deltas"], dtype=np.float64))
    raise ValueError(f"unknown noise kind {kind!r}")


def _ball_noise(spec: UniformBall, n: int, dim: int, seed: SampleSeed) -> np.ndarray:
    if math.isinf(spec.p):
        return _generator(seed, role=0).uniform(-spec.alpha, spec.alpha, size=(n, dim))
    # Exact uniform-on-ball constructions: a direction uniform on the unit
    # lp sphere, scaled by alpha * U^(1/dim).
    if spec.p == 2.0:
        z = _generator(seed, role=0).standard_normal(size=(n, dim))
        norms = np.linalg.norm(z, axis=1)
    else:  # p == 1
        z = _generator(seed, role=0).laplace(0.0, 1.0, size=(n, dim))
        norms = np.abs(z).sum(axis=1)
    norms[norms == 0.0] = 1.0  # measure-zero guard; leaves the draw at the center
    radii = spec.alpha * _generator(seed, role=1).random(n) ** (1.0 / dim)
    return z * (radii / norms)[:, None]


def sample(model: NoiseModel, n: int, seed: SampleSeed) -> np.ndarray:
    """Draw n i.i.d. inputs X = nominal + noise as an (n, dim) array.

    Deterministic given (model, n, seed), and prefix-stable: the first k
    rows of a length-n draw equal the length-k draw with the same seed.
    """
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    dim = model.dim
    spec = model.noise
    if isinstance(spec, UniformBall):
        noise = _ball_noise(spec, n, dim, seed)
    elif isinstance(spec, Gaussian):
        noise = spec.sigma * _generator(seed, role=0).standard_normal(size=(n, dim))
    else:
        idx = _generator(seed, role=0).integers(0, spec.deltas.shape[0], size=n)
        noise = spec.deltas[idx]
    out = model.nominal + noise
    if model.clamp01:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def _pnorm(d: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.max(d, initial=0.0))
    if p == 1.0:
        return float(d.sum())
    return float(np.sqrt((d * d).sum()))


def support_contains(model: NoiseModel, x: Sequence[float]) -> bool:
    """Whether x lies in the support of the input distribution.

    Ball kinds use an absolute tolerance of NORM_TOL on the norm constraint;
    the Gaussian has full support; empirical membership is exact.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimensionError(f"x has shape {x.shape}, expected ({model.dim},)")
    spec = model.noise
    if isinstance(spec, Gaussian):
        return True
    if isinstance(spec, Empirical):
        candidates = model.nominal + spec.deltas
        if model.clamp01:
            candidates = np.clip(candidates, 0.0, 1.0)
        return bool(np.any(np.all(candidates == x, axis=1)))
    if model.clamp01:
        if np.any(x < 0.0) or np.any(x > 1.0):
            return False
        # Smallest per-coordinate perturbation whose clipped image is x.
        d = np.abs(x - model.nominal)
        d = np.where(x == 0.0, np.maximum(model.nominal, 0.0), d)
        d = np.where(x == 1.0, np.maximum(1.0 - model.nominal, 0.0), d)
    else:
        d = np.abs(x - model.nominal)
    return _pnorm(d, spec.p) <= spec.alpha + NORM_TOL
