"""Feed-forward network loading, forward propagation, and device adapters.

Structure comes from a JSON document {input_dim, layers:[{name, kind, in,
out, activation}]}; parameters come from a raw little-endian float64 blob
laid out in JSON layer order, each dense layer as row-major (out x in)
weights followed by the bias. The JSON is the single source of shape truth.

A loaded network can be wrapped as a parameterized derivative function and
integrated by the dynamics module in place of a mechanistic generator model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import generic_trapezoidal_update
from .errors import (
    BlobSizeMismatch,
    DimensionChainBroken,
    DimensionMismatch,
    InterfaceMismatch,
    SchemaError,
)

ACTIVATIONS = ("tanh", "relu", "identity")
KINDS = ("dense", "activation")


@dataclass(frozen=True)
class Layer:
    name: str
    kind: str
    in_size: int
    out_size: int
    activation: str = "identity"


@dataclass(frozen=True)
class NeuralNetSpec:
    input_dim: int
    layers: tuple[Layer, ...]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_size if self.layers else self.input_dim

    @property
    def parameter_count(self) -> int:
        return sum(l.in_size * l.out_size + l.out_size
                   for l in self.layers if l.kind == "dense")


class Network:
    """Immutable inference-only network."""

    def __init__(self, spec: NeuralNetSpec, weights, biases):
        self.spec = spec
        self._weights = weights  # dense-layer index -> (out, in) array
        self._biases = biases
        for w in weights.values():
            w.flags.writeable = False
        for b in biases.values():
            b.flags.writeable = False

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.spec.input_dim,):
            raise DimensionMismatch(
                f"input length {x.shape} != network input {self.spec.input_dim}")
        for li, layer in enumerate(self.spec.layers):
            if layer.kind == "dense":
                x = self._weights[li] @ x + self._biases[li]
            elif layer.activation == "tanh":
                x = np.tanh(x)
            elif layer.activation == "relu":
                x = np.maximum(x, 0.0)
            # identity: no-op
        return x


def parse_spec(doc: dict, source: str = "<dict>") -> NeuralNetSpec:
    if not isinstance(doc, dict) or "layers" not in doc or "input_dim" not in doc:
        raise SchemaError(f"{source}: need object with input_dim and layers")
    layers = []
    for i, rec in enumerate(doc["layers"]):
        name = rec.get("name", f"layer{i}")
        kind = rec.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"{source}: layer {name!r}: unknown kind {kind!r}")
        try:
            in_size = int(rec["in"])
            out_size = int(rec["out"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{source}: layer {name!r}: bad sizes: {exc}") from None
        act = rec.get("activation", "identity")
        if act not in ACTIVATIONS:
            raise SchemaError(f"{source}: layer {name!r}: unknown activation {act!r}")
        if kind == "activation" and in_size != out_size:
            raise SchemaError(
                f"{source}: activation layer {name!r} must keep its size")
        if kind == "dense" and act != "identity":
            raise SchemaError(
                f"{source}: dense layer {name!r} carries an activation; "
                "use a separate activation layer")
        layers.append(Layer(name, kind, in_size, out_size, act))
    expect = int(doc["input_dim"])
    for layer in layers:
        if layer.in_size != expect:
            raise DimensionChainBroken(
                f"{source}: layer {layer.name!r} expects {layer.in_size} "
                f"inputs but receives {expect}")
        expect = layer.out_size
    return NeuralNetSpec(int(doc["input_dim"]), tuple(layers))


def _attach_parameters(spec: NeuralNetSpec, flat: np.ndarray) -> Network:
    weights, biases = {}, {}
    pos = 0
    for li, layer in enumerate(spec.layers):
        if layer.kind != "dense":
            continue
        need = layer.in_size * layer.out_size + layer.out_size
        if pos + need > flat.size:
            raise BlobSizeMismatch(
                f"blob exhausted at layer {layer.name!r}: needs {need} more "
                f"values, {flat.size - pos} left")
        w = flat[pos:pos + layer.in_size * layer.out_size]
        weights[li] = w.reshape(layer.out_size, layer.in_size).copy()
        pos += layer.in_size * layer.out_size
        biases[li] = flat[pos:pos + layer.out_size].copy()
        pos += layer.out_size
    if pos != flat.size:
        raise BlobSizeMismatch(
            f"blob holds {flat.size} values but the structure declares {pos}")
    return Network(spec, weights, biases)


def load_network(spec_file, blob_file) -> Network:
    try:
        with open(spec_file) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{spec_file}: {exc}") from exc
    spec = parse_spec(doc, source=str(spec_file))
    flat = np.fromfile(blob_file, dtype="<f8")
    return _attach_parameters(spec, flat)


def network_from_arrays(spec: NeuralNetSpec, flat) -> Network:
    return _attach_parameters(spec, np.asarray(flat, dtype=np.float64))


def save_network(net: Network, spec_file, blob_file) -> None:
    """Re-emit spec + blob so load(save(net)) round-trips bit-exactly."""
    doc = {
        "input_dim": net.spec.input_dim,
        "layers": [
            {"name": l.name, "kind": l.kind, "in": l.in_size,
             "out": l.out_size, "activation": l.activation}
            for l in net.spec.layers
        ],
    }
    with open(spec_file, "w") as fh:
        json.dump(doc, fh, indent=1)
    parts = []
    for li, layer in enumerate(net.spec.layers):
        if layer.kind == "dense":
            parts.append(net._weights[li].ravel())
            parts.append(net._biases[li])
    flat = np.concatenate(parts) if parts else np.zeros(0)
    flat.astype("<f8").tofile(blob_file)


class NeuralGenerator:
    """Generator whose rotor dynamics come from a loaded network.

    The network regresses the state derivative from (state, Re V, Im V); the
    grid interface stays the classic Norton equivalent, with the EMF phasor
    angle taken from the declared angle channel.
    """

    def __init__(self, net: Network, layout, gen, omega_s):
        layout = list(layout)
        if "angle" not in layout or "speed" not in layout:
            raise InterfaceMismatch(
                "state layout must name 'angle' and 'speed' channels")
        if len(set(layout)) != len(layout):
            raise InterfaceMismatch(f"duplicate channels in layout {layout}")
        if net.input_dim != len(layout) + 2:
            raise InterfaceMismatch(
                f"network input {net.input_dim} != state size {len(layout)} "
                "+ 2 voltage channels")
        if net.output_dim != len(layout):
            raise InterfaceMismatch(
                f"network output {net.output_dim} != state size {len(layout)}")
        self.net = net
        self.layout = layout
        self.state_size = len(layout)
        self.angle_index = layout.index("angle")
        self.speed_index = layout.index("speed")
        self.xdp = gen.xdp
        self.omega_s = omega_s
        self.norton_y = 1.0 / (1j * gen.xdp)
        self.ep = 1.0

    def initialize(self, v_term: complex, p: float, q: float) -> np.ndarray:
        i_term = np.conj(complex(p, q) / v_term)
        e = v_term + 1j * self.xdp * i_term
        self.ep = abs(e)
        x0 = np.zeros(self.state_size)
        x0[self.angle_index] = np.angle(e)
        x0[self.speed_index] = 1.0
        return x0

    def derivative(self, x, v) -> np.ndarray:
        features = np.concatenate([x, [v.real, v.imag]])
        return self.net.forward(features)

    def injection(self, x) -> complex:
        d = x[self.angle_index]
        return self.ep * complex(math.cos(d), math.sin(d)) * self.norton_y

    def trapezoidal_update(self, x_old, f_old, v, h) -> np.ndarray:
        return generic_trapezoidal_update(self, x_old, f_old, v, h)

    def angle(self, x) -> float:
        return float(x[self.angle_index])

    def speed(self, x) -> float:
        return float(x[self.speed_index])

    def emf(self) -> float:
        return self.ep

    def electrical_power(self, x, v) -> float:
        d = x[self.angle_index]
        return self.ep * abs(v) * math.sin(d - math.atan2(v.imag, v.real)) \
            / self.xdp

    def terminal_current(self, x, v) -> complex:
        d = x[self.angle_index]
        e = self.ep * complex(math.cos(d), math.sin(d))
        return (e - v) * self.norton_y


def as_derivative_model(net: Network, layout, gen, omega_s) -> NeuralGenerator:
    """Wrap a loaded network as a device model for the dynamics engine."""
    return NeuralGenerator(net, layout, gen, omega_s)
