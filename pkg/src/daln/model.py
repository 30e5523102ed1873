"""Feature extractor G, task classifier C and the DANN domain discriminator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Node, ShapeError

CHECKPOINT_FORMAT = "daln-checkpoint"
CHECKPOINT_VERSION = 1
DEFAULT_LAYER_DIMS = (2, 16, 16, 8)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class FeatureExtractor:
    """MLP mapping inputs to features; tanh on every layer except the last.

    Weights are stored input-major (``fan_in x fan_out``) so a layer is
    ``x @ W + b``.
    """

    layer_dims: tuple[int, ...]
    weights: list[Node]
    biases: list[Node]
    activation: str = "tanh"

    @classmethod
    def init(cls, layer_dims, rng: np.random.Generator, activation: str = "tanh"):
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"layer_dims must hold at least two positive sizes, got {dims}")
        weights = [Node(glorot_uniform(rng, a, b), requires_grad=True) for a, b in zip(dims, dims[1:])]
        biases = [Node(np.zeros((1, b)), requires_grad=True) for b in dims[1:]]
        return cls(dims, weights, biases, activation)

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[Node]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class Classifier:
    """Single fully connected layer followed by a row softmax.

    ``weight`` is ``k x d`` so logits are ``f @ weight.T + bias``.
    """

    weight: Node
    bias: Node

    @classmethod
    def init(cls, d: int, k: int, rng: np.random.Generator):
        w = glorot_uniform(rng, d, k).T
        return cls(Node(w, requires_grad=True), Node(np.zeros((1, k)), requires_grad=True))

    @property
    def num_classes(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    def parameters(self) -> list[Node]:
        return [self.weight, self.bias]


@dataclass
class Discriminator:
    """Domain discriminator for the DANN baseline: relu MLP with a sigmoid output."""

    weights: list[Node]
    biases: list[Node]

    @classmethod
    def init(cls, d: int, rng: np.random.Generator, hidden: int = 16):
        dims = (d, hidden, 1)
        weights = [Node(glorot_uniform(rng, a, b), requires_grad=True) for a, b in zip(dims, dims[1:])]
        biases = [Node(np.zeros((1, b)), requires_grad=True) for b in dims[1:]]
        return cls(weights, biases)

    def parameters(self) -> list[Node]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass
class GrlState:
    coeff: float = 0.0


@dataclass
class Model:
    extractor: FeatureExtractor
    classifier: Classifier
    discriminator: Discriminator | None = None
    grl: GrlState = field(default_factory=GrlState)

    @classmethod
    def init(cls, layer_dims, num_classes: int, rng: np.random.Generator, with_discriminator: bool = False):
        g = FeatureExtractor.init(layer_dims, rng)
        c = Classifier.init(g.out_dim, num_classes, rng)
        disc = Discriminator.init(g.out_dim, rng) if with_discriminator else None
        return cls(g, c, disc)

    def parameters(self) -> list[Node]:
        params = self.extractor.parameters() + self.classifier.parameters()
        if self.discriminator is not None:
            params += self.discriminator.parameters()
        return params

    def predict_proba(self, x) -> np.ndarray:
        tape = ad.Tape()
        return classify(self.classifier, extract(self.extractor, tape.constant(x))).value

    def features(self, x) -> np.ndarray:
        tape = ad.Tape()
        return extract(self.extractor, tape.constant(x)).value


def extract(g: FeatureExtractor, x: Node) -> Node:
    if x.shape[1] != g.layer_dims[0]:
        raise ShapeError(f"extractor expects width {g.layer_dims[0]}, got input of shape {x.shape}")
    act = {"tanh": ad.tanh, "relu": ad.relu}[g.activation]
    h = x
    last = len(g.weights) - 1
    for i, (w, b) in enumerate(zip(g.weights, g.biases)):
        h = ad.add_row(ad.matmul(h, w), b)
        if i < last:
            h = act(h)
    return h


def logits(c: Classifier, f: Node) -> Node:
    if f.shape[1] != c.in_dim:
        raise ShapeError(f"classifier expects width {c.in_dim}, got features of shape {f.shape}")
    return ad.add_row(ad.matmul_bt(f, c.weight), c.bias)


def classify(c: Classifier, f: Node) -> Node:
    return ad.softmax_rows(logits(c, f))


def critic_score(c: Classifier, f: Node, norm: str = "nuclear") -> Node:
    """Batch norm of the prediction matrix divided by batch size."""
    z = classify(c, f)
    if norm == "nuclear":
        s = ad.nuclear_norm(z)
    elif norm == "frobenius":
        s = ad.frobenius_norm(z)
    else:
        raise ValueError(f"unknown critic norm {norm!r}")
    return ad.scale(s, 1.0 / z.shape[0])


def discriminate(d: Discriminator, f: Node) -> Node:
    h = f
    last = len(d.weights) - 1
    for i, (w, b) in enumerate(zip(d.weights, d.biases)):
        h = ad.add_row(ad.matmul(h, w), b)
        h = ad.relu(h) if i < last else ad.sigmoid(h)
    return h


# -- checkpoints --------------------------------------------------------------

def _matrix_record(node: Node) -> dict:
    rows, cols = node.shape
    return {"rows": rows, "cols": cols, "data": [repr(float(v)) for v in node.value.ravel()]}


def _matrix_from_record(rec: dict) -> Node:
    data = np.array([float(v) for v in rec["data"]], dtype=np.float64)
    if data.size != rec["rows"] * rec["cols"]:
        raise ValueError("checkpoint matrix data length does not match rows*cols")
    return Node(data.reshape(rec["rows"], rec["cols"]), requires_grad=True)


def save_checkpoint(model: Model, path) -> None:
    """Write a JSON checkpoint; floats use shortest round-trip repr (<= 17 digits)."""
    g = model.extractor
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_dims": list(g.layer_dims),
        "activation": g.activation,
        "extractor": {
            "weights": [_matrix_record(w) for w in g.weights],
            "biases": [_matrix_record(b) for b in g.biases],
        },
        "classifier": {
            "weight": _matrix_record(model.classifier.weight),
            "bias": _matrix_record(model.classifier.bias),
        },
    }
    if model.discriminator is not None:
        doc["discriminator"] = {
            "weights": [_matrix_record(w) for w in model.discriminator.weights],
            "biases": [_matrix_record(b) for b in model.discriminator.biases],
        }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> Model:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    ex = doc["extractor"]
    g = FeatureExtractor(
        tuple(doc["layer_dims"]),
        [_matrix_from_record(r) for r in ex["weights"]],
        [_matrix_from_record(r) for r in ex["biases"]],
        doc.get("activation", "tanh"),
    )
    for w, (a, b) in zip(g.weights, zip(g.layer_dims, g.layer_dims[1:])):
        if w.shape != (a, b):
            raise ValueError(f"{path}: layer shape {w.shape} does not chain with layer_dims {g.layer_dims}")
    c = Classifier(_matrix_from_record(doc["classifier"]["weight"]), _matrix_from_record(doc["classifier"]["bias"]))
    disc = None
    if "discriminator" in doc:
        dd = doc["discriminator"]
        disc = Discriminator([_matrix_from_record(r) for r in dd["weights"]],
                             [_matrix_from_record(r) for r in dd["biases"]])
    return Model(g, c, disc)
