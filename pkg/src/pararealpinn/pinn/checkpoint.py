"""Self-describing JSON checkpoints for :class:`Mlp`.

Floats are written with Python's shortest round-trip repr, so loading
reproduces every weight bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..model import MarketParams
from .network import Activation, Mlp

FORMAT = "pararealpinn-mlp"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class MalformedCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def save_checkpoint(path, net: Mlp, metadata: dict | None = None) -> Path:
    doc = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "layer_sizes": net.layer_sizes,
        "activation": net.activation.value,
        "dtype": np.dtype(net.dtype).name,
        "input_scale": float(net.input_scale),
        "output_scale": float(net.output_scale),
        "weights": [w.astype(float).tolist() for w in net.weights],
        "biases": [b.astype(float).tolist() for b in net.biases],
        "metadata": metadata or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def load_checkpoint(path) -> tuple[Mlp, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedCheckpointError(f"{path}: not a valid checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise MalformedCheckpointError(f"{path}: unknown document format")
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {doc.get('format_version')!r}, expected {FORMAT_VERSION}")
    try:
        dtype = np.dtype(doc["dtype"])
        weights = [np.array(w, dtype=float).astype(dtype) for w in doc["weights"]]
        biases = [np.array(b, dtype=float).astype(dtype) for b in doc["biases"]]
        net = Mlp(weights, biases, Activation(doc["activation"]),
                  float(doc["input_scale"]), float(doc["output_scale"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedCheckpointError(f"{path}: {exc}") from exc
    if net.layer_sizes != list(doc["layer_sizes"]):
        raise MalformedCheckpointError(f"{path}: layer_sizes do not match weight shapes")
    return net, doc.get("metadata", {})


def market_metadata(params: MarketParams) -> dict:
    return {"r": params.r, "sigma": params.sigma, "strike": params.strike,
            "expiry": params.expiry, "domain_bound": params.domain_bound}


def domain_mismatch(metadata: dict, params: MarketParams) -> list:
    """Names of domain fields (strike, expiry, domain_bound) that differ from ``params``."""
    market = metadata.get("market", {})
    return [name for name in ("strike", "expiry", "domain_bound")
            if name in market and market[name] != getattr(params, name)]
