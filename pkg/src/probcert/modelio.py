"""Model, report, and trace file formats.

Models are versioned JSON with row-major weight matrices: human-inspectable,
diffable, and exact under round-trip (JSON floats carry full double
precision).  Reports echo the full resolved run configuration plus its
digest, so a report and the model file together replay a run bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import __version__
from .certify import Certificate, EstimateResult
from .errors import ModelFormatError
from .network import Activation, Layer, Network
from .radius import RadiusSearchResult
from .sampling import SampleSeed

MODEL_FORMAT_VERSION = "1"

_PathLike = Union[str, Path]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def network_to_dict(net: Network, metadata: Optional[dict] = None) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ],
        "metadata": metadata or {},
    }


def save_model(net: Network, path: _PathLike, metadata: Optional[dict] = None) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net, metadata), indent=2) + "\n")


def _layer_from_dict(index: int, entry) -> Layer:
    if not isinstance(entry, dict):
        raise ModelFormatError(f"layer {index}: expected an object, got {type(entry).__name__}")
    for key in ("weights", "bias", "activation"):
        if key not in entry:
            raise ModelFormatError(f"layer {index}: missing field {key!r}")
    try:
        weights = np.asarray(entry["weights"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"layer {index}: weights are not a numeric matrix: {exc}") from None
    if weights.ndim != 2:
        raise ModelFormatError(f"layer {index}: weights must be a 2-D row-major array")
    try:
        bias = np.asarray(entry["bias"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"layer {index}: bias is not a numeric vector: {exc}") from None
    try:
        activation = Activation(entry["activation"])
    except ValueError:
        raise ModelFormatError(
            f"layer {index}: unknown activation {entry['activation']!r}"
        ) from None
    try:
        return Layer(weights=weights, bias=bias, activation=activation)
    except ValueError as exc:
        raise ModelFormatError(f"layer {index}: {exc}") from None


def load_model(path: _PathLike) -> Network:
    """Load and validate a model file; errors carry the offending location.

    The final layer must have identity activation (logits are raw scores);
    hidden layers may use any supported activation.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"model file {path} is not valid JSON at byte offset {exc.pos}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must contain a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {version!r}; this tool reads version "
            f"{MODEL_FORMAT_VERSION!r}"
        )
    entries = doc.get("layers")
    if not isinstance(entries, list) or not entries:
        raise ModelFormatError("model file needs a nonempty 'layers' list")
    layers = [_layer_from_dict(k, entry) for k, entry in enumerate(entries)]
    if layers[-1].activation is not Activation.IDENTITY:
        raise ModelFormatError(
            f"layer {len(layers) - 1}: the final activation must be 'identity' "
            f"(got {layers[-1].activation.value!r}); logits are raw scores"
        )
    try:
        return Network(layers=tuple(layers))
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


def seed_to_dict(seed: SampleSeed) -> dict:
    return {"root_seed": seed.root_seed, "stream_id": seed.stream_id}


def certificate_to_dict(cert: Certificate) -> dict:
    out = asdict(cert)
    out["seed"] = seed_to_dict(cert.seed)
    return out


def estimate_to_dict(est: EstimateResult) -> dict:
    return asdict(est)


def radius_result_to_dict(result: RadiusSearchResult) -> dict:
    return {
        "status": result.status.value,
        "alpha": result.alpha,
        "final_interval": list(result.final_interval),
        "trace": [asdict(entry) for entry in result.trace],
    }


def build_report(command: str, config: dict, result: dict, duration_seconds: float) -> dict:
    return {
        "tool": "probcert",
        "version": __version__,
        "command": command,
        "config": config,
        "config_digest": digest(config),
        "result": result,
        "duration_seconds": duration_seconds,
    }


def write_report(report: dict, path: _PathLike) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n")


def load_report(path: _PathLike) -> dict:
    return json.loads(Path(path).read_text())


def write_trace_csv(result: RadiusSearchResult, path: _PathLike) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "alpha", "r_hat", "N"])
        for entry in result.trace:
            writer.writerow([entry.iteration, repr(entry.alpha), repr(entry.r_hat), entry.n_samples])
