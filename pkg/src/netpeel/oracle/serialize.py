"""Text interchange format for networks.

One JSON document per network.  Layout:

    depth    2 or 3
    d        input dimension
    d1       hidden width (first hidden layer for depth 3)
    d2       second hidden width, depth 3 only
    W, b     first-layer weights (flat, row-major) and biases
    V, c, u  second layer for depth 3; for depth 2 the unit signs live in "u"
             and W/b are the unit weights/biases
    skip_w, skip_b
             optional affine term: over the input for depth 2, over the first
             hidden activations for depth 3
    seed, delta
             optional provenance metadata

Floats are written with 17 significant digits, so parsing reproduces the
exact float64 bit pattern and serialization is deterministic.
"""
from __future__ import annotations

import json

import numpy as np

from .nets import (
    AffineMap,
    Neuron,
    ThreeLayerFunction,
    ThreeLayerNet,
    TwoLayerNet,
)

FORMAT_NAME = "netpeel-net"

_KEY_ORDER = [
    "format", "depth", "d", "d1", "d2",
    "W", "b", "V", "c", "u", "skip_w", "skip_b",
    "seed", "delta",
]


def format_float(x: float) -> str:
    s = format(float(x), ".17g")
    # Keep the token a JSON number even for integral values.
    if "e" not in s and "E" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _emit_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_emit_value(e) for e in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_document(doc: dict) -> str:
    unknown = set(doc) - set(_KEY_ORDER)
    if unknown:
        raise ValueError(f"unknown document keys: {sorted(unknown)}")
    lines = ["{"]
    keys = [k for k in _KEY_ORDER if k in doc]
    for i, k in enumerate(keys):
        comma = "," if i + 1 < len(keys) else ""
        lines.append(f'  "{k}": {_emit_value(doc[k])}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def loads_document(text: str) -> dict:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("network document must be a JSON object")
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise ValueError(f"unrecognized document format {doc.get('format')!r}")
    if doc.get("depth") not in (2, 3):
        raise ValueError("document depth must be 2 or 3")
    return doc


def _meta(doc: dict, seed, delta) -> dict:
    if seed is not None:
        doc["seed"] = int(seed)
    if delta is not None:
        doc["delta"] = float(delta)
    return doc


def two_layer_to_document(net: TwoLayerNet, seed=None, delta=None) -> dict:
    doc = {
        "format": FORMAT_NAME,
        "depth": 2,
        "d": net.d,
        "d1": net.width,
        "W": [float(v) for n in net.neurons for v in n.w],
        "b": [float(n.b) for n in net.neurons],
        "u": [n.sign for n in net.neurons],
    }
    if net.skip is not None:
        doc["skip_w"] = [float(v) for v in net.skip.w]
        doc["skip_b"] = float(net.skip.b)
    return _meta(doc, seed, delta)


def three_layer_to_document(net, seed=None, delta=None) -> dict:
    if isinstance(net, ThreeLayerNet):
        W, b = net.W, net.b
        V, c, u = net.V, net.c, [int(s) for s in net.signs]
        skip = None
    elif isinstance(net, ThreeLayerFunction):
        W, b = net.W, net.b
        V = net.top.weight_matrix()
        c = net.top.biases()
        u = [n.sign for n in net.top.neurons]
        skip = net.top.skip
    else:
        raise TypeError(f"not a three-layer container: {type(net).__name__}")
    doc = {
        "format": FORMAT_NAME,
        "depth": 3,
        "d": W.shape[1],
        "d1": W.shape[0],
        "d2": len(u),
        "W": [float(v) for row in W for v in row],
        "b": [float(v) for v in b],
        "V": [float(v) for row in np.atleast_2d(V) for v in row],
        "c": [float(v) for v in c],
        "u": u,
    }
    if skip is not None:
        doc["skip_w"] = [float(v) for v in skip.w]
        doc["skip_b"] = float(skip.b)
    return _meta(doc, seed, delta)


def net_to_document(net, seed=None, delta=None) -> dict:
    if isinstance(net, TwoLayerNet):
        return two_layer_to_document(net, seed=seed, delta=delta)
    return three_layer_to_document(net, seed=seed, delta=delta)


def _reshape(flat, rows, cols, name) -> np.ndarray:
    arr = np.asarray(flat, dtype=float)
    if arr.size != rows * cols:
        raise ValueError(f"{name} has {arr.size} entries, expected {rows}x{cols}")
    return arr.reshape(rows, cols)


def document_to_net(doc: dict):
    """Rebuild the container a document describes.

    Depth 2 gives a `TwoLayerNet`.  Depth 3 gives a `ThreeLayerNet` when there
    is no affine term and the strict class invariants hold, otherwise a
    `ThreeLayerFunction`.
    """
    d = int(doc["d"])
    d1 = int(doc["d1"])
    if doc["depth"] == 2:
        W = _reshape(doc["W"], d1, d, "W")
        b = np.asarray(doc["b"], dtype=float)
        u = [int(s) for s in doc["u"]]
        skip = None
        if "skip_w" in doc or "skip_b" in doc:
            skip = AffineMap(np.asarray(doc.get("skip_w", np.zeros(d)), dtype=float),
                             float(doc.get("skip_b", 0.0)))
        neurons = tuple(Neuron(W[j], b[j], u[j]) for j in range(d1))
        return TwoLayerNet(d=d, neurons=neurons, skip=skip)

    d2 = int(doc["d2"])
    W = _reshape(doc["W"], d1, d, "W")
    b = np.asarray(doc["b"], dtype=float)
    V = _reshape(doc["V"], d2, d1, "V")
    c = np.asarray(doc["c"], dtype=float)
    u = [int(s) for s in doc["u"]]
    if "skip_w" not in doc and "skip_b" not in doc:
        try:
            return ThreeLayerNet(W=W, b=b, V=V, c=c, signs=u)
        except ValueError:
            pass  # fall through to the loose container
    skip = AffineMap(np.asarray(doc.get("skip_w", np.zeros(d1)), dtype=float),
                     float(doc.get("skip_b", 0.0)))
    neurons = tuple(Neuron(V[k], c[k], u[k]) for k in range(d2))
    top = TwoLayerNet(d=d1, neurons=neurons, skip=skip)
    return ThreeLayerFunction(W=W, b=b, top=top)


def save_net(path, net, seed=None, delta=None):
    text = dumps_document(net_to_document(net, seed=seed, delta=delta))
    with open(path, "w") as fh:
        fh.write(text)


def load_net(path):
    with open(path) as fh:
        return document_to_net(loads_document(fh.read()))
