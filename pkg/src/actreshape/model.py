"""Feed-forward networks, datasets, forward passes, and fixture training.

Layer indices are 1-based throughout the public API (layer 1 is the first
layer, layer L the output layer); dataset point indices are 0-based.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    InputShapeError,
    LayerRangeError,
    MissingLabelsError,
    ValidationError,
)

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "identity")

DEFAULT_LEAKY_SLOPE = 0.01


def apply_activation(kind: str, x: np.ndarray, slope: float = DEFAULT_LEAKY_SLOPE) -> np.ndarray:
    """Apply a monotone activation elementwise."""
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        return np.where(x >= 0.0, x, slope * x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "identity":
        return x
    raise ValidationError(f"unknown activation kind: {kind!r}")


@dataclass(frozen=True)
class Layer:
    """One fully connected layer: an affine map followed by an activation."""

    weights: np.ndarray  # shape (out_dim, in_dim)
    bias: np.ndarray  # shape (out_dim,)
    activation: str
    slope: float = DEFAULT_LEAKY_SLOPE  # only used by leaky_relu

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        if w.ndim != 2:
            raise InputShapeError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise InputShapeError(
                f"bias length {b.shape} does not match weight rows {w.shape[0]}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation kind: {self.activation!r}")
        if self.activation == "leaky_relu" and not 0.0 <= self.slope <= 1.0:
            raise ValidationError("leaky_relu slope must lie in [0, 1] to stay monotone")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    """A layered feed-forward model over a fixed hyper-box input domain."""

    layers: tuple[Layer, ...]
    input_dim: int
    input_range: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        lo, hi = self.input_range
        object.__setattr__(self, "input_range", (float(lo), float(hi)))
        if not self.layers:
            raise ValidationError("network needs at least one layer")
        if self.input_dim < 1:
            raise ValidationError("input_dim must be positive")
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ValidationError(f"invalid input range [{lo}, {hi}]")
        prev = self.input_dim
        for idx, layer in enumerate(self.layers, start=1):
            if layer.in_dim != prev:
                raise InputShapeError(
                    f"layer {idx} expects {layer.in_dim} inputs, previous width is {prev}"
                )
            prev = layer.out_dim

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def layer_width(self, layer: int) -> int:
        self.check_layer_index(layer)
        return self.layers[layer - 1].out_dim

    def check_layer_index(self, layer: int) -> None:
        if not 1 <= layer <= self.n_layers:
            raise LayerRangeError(
                f"layer index {layer} outside valid range 1..{self.n_layers}"
            )


@dataclass(frozen=True)
class Dataset:
    """A multiset of input points with optional integer class labels."""

    points: np.ndarray  # shape (n, d)
    labels: np.ndarray | None = None  # shape (n,), int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            pts = pts.reshape(len(pts), -1) if pts.size else pts.reshape(0, 0)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            object.__setattr__(self, "labels", lab)
            if lab.shape != (len(pts),):
                raise ValidationError(
                    f"{len(lab)} labels for {len(pts)} points"
                )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.points[idx], None if self.labels is None else self.labels[idx])


def _check_in_range(net: Network, points: np.ndarray, what: str = "input") -> None:
    lo, hi = net.input_range
    if points.size and (points.min() < lo or points.max() > hi):
        bad = points[(points < lo) | (points > hi)].flat[0]
        raise DomainError(
            f"{what} coordinate {bad} outside input range [{lo}, {hi}]"
        )


def forward(net: Network, x) -> list[np.ndarray]:
    """Run one input through the network; returns activations of layers 1..L."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (net.input_dim,):
        raise InputShapeError(
            f"input shape {vec.shape} does not match input_dim {net.input_dim}"
        )
    _check_in_range(net, vec)
    outs = []
    cur = vec
    for layer in net.layers:
        cur = apply_activation(layer.activation, layer.weights @ cur + layer.bias, layer.slope)
        outs.append(cur)
    return outs


def forward_batch(net: Network, points: np.ndarray, layer: int, threads: int = 1) -> np.ndarray:
    """Activations at one layer for a batch of points, shape (n, d_layer).

    Points from distinct rows are independent, so the batch may be split
    across worker threads when requested.
    """
    net.check_layer_index(layer)
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or (pts.size and pts.shape[1] != net.input_dim):
        raise InputShapeError(
            f"points shape {pts.shape} does not match input_dim {net.input_dim}"
        )
    _check_in_range(net, pts)
    if len(pts) == 0:
        return np.zeros((0, net.layer_width(layer)))

    def run(chunk: np.ndarray) -> np.ndarray:
        cur = chunk
        for lyr in net.layers[:layer]:
            cur = apply_activation(lyr.activation, cur @ lyr.weights.T + lyr.bias, lyr.slope)
        return cur

    if threads <= 1 or len(pts) < 2 * threads:
        return run(pts)
    chunks = np.array_split(pts, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, chunks))
    return np.vstack(parts)


def collect_values(net: Network, data: Dataset, layer: int, threads: int = 1) -> np.ndarray:
    """Per-neuron multisets of activation values at one layer.

    Returns an array of shape (d_layer, |data|); row i is the multiset of
    neuron i's values over the dataset, in dataset order.
    """
    acts = forward_batch(net, data.points, layer, threads=threads)
    return acts.T.copy()


# ---------------------------------------------------------------------------
# fixture training (desk-scale synthetic models only)
# ---------------------------------------------------------------------------


def _activation_grad(kind: str, pre: np.ndarray, slope: float) -> np.ndarray:
    if kind == "relu":
        return (pre > 0.0).astype(np.float64)
    if kind == "leaky_relu":
        return np.where(pre > 0.0, 1.0, slope)
    if kind == "tanh":
        return 1.0 - np.tanh(pre) ** 2
    return np.ones_like(pre)


def init_network(
    dims: list[int],
    activations: list[str],
    input_range: tuple[float, float],
    seed: int = 0,
) -> Network:
    """Seeded random network: dims = [d0, d1, ..., dL]."""
    if len(dims) < 2 or len(activations) != len(dims) - 1:
        raise ValidationError("need dims [d0..dL] and one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, d_out, act in zip(dims[:-1], dims[1:], activations):
        scale = np.sqrt(2.0 / d_in)
        layers.append(Layer(rng.normal(0.0, scale, (d_out, d_in)), np.zeros(d_out), act))
    return Network(tuple(layers), dims[0], input_range)


def train_fixture(
    dims: list[int],
    activations: list[str],
    data: Dataset,
    epochs: int,
    step: float,
    seed: int = 0,
    input_range: tuple[float, float] | None = None,
    batch_size: int = 32,
) -> Network:
    """Train a small classifier with plain seeded SGD on softmax cross-entropy.

    Deterministic for a fixed seed; with epochs=0 the seeded initial network
    is returned unchanged.  Serves only to produce desk-scale fixtures.
    """
    if data.labels is None:
        raise MissingLabelsError("fixture training needs a labeled dataset")
    if input_range is None:
        pad = 0.1 * max(1.0, float(np.abs(data.points).max(initial=1.0)))
        input_range = (float(data.points.min()) - pad, float(data.points.max()) + pad)
    net = init_network(dims, activations, input_range, seed=seed)
    if epochs == 0:
        return net

    rng = np.random.default_rng(seed + 1)
    weights = [l.weights.copy() for l in net.layers]
    biases = [l.bias.copy() for l in net.layers]
    acts = [l.activation for l in net.layers]
    slopes = [l.slope for l in net.layers]
    n = len(data)
    n_classes = dims[-1]
    if data.labels.min() < 0 or data.labels.max() >= n_classes:
        raise ValidationError("labels must lie in 0..output_width-1")

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            x = data.points[idx]
            y = data.labels[idx]
            # forward, keeping pre-activations for the backward pass
            pres, outs = [], [x]
            cur = x
            for w, b, a, s in zip(weights, biases, acts, slopes):
                pre = cur @ w.T + b
                cur = apply_activation(a, pre, s)
                pres.append(pre)
                outs.append(cur)
            logits = outs[-1]
            shifted = logits - logits.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            probs /= probs.sum(axis=1, keepdims=True)
            grad = probs
            grad[np.arange(len(idx)), y] -= 1.0
            grad /= len(idx)
            # backward
            for li in range(len(weights) - 1, -1, -1):
                grad = grad * _activation_grad(acts[li], pres[li], slopes[li])
                gw = grad.T @ outs[li]
                gb = grad.sum(axis=0)
                if li > 0:
                    grad = grad @ weights[li]
                weights[li] -= step * gw
                biases[li] -= step * gb

    layers = tuple(
        Layer(w, b, a, s) for w, b, a, s in zip(weights, biases, acts, slopes)
    )
    return Network(layers, dims[0], net.input_range)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def network_to_dict(net: Network) -> dict:
    layers = []
    for l in net.layers:
        entry = {
            "weights": l.weights.tolist(),
            "bias": l.bias.tolist(),
            "activation": l.activation,
        }
        if l.activation == "leaky_relu":
            entry["slope"] = l.slope
        layers.append(entry)
    return {
        "input_dim": net.input_dim,
        "input_range": list(net.input_range),
        "layers": layers,
    }


def network_from_dict(doc: dict) -> Network:
    try:
        layers = tuple(
            Layer(
                np.asarray(l["weights"], dtype=np.float64),
                np.asarray(l["bias"], dtype=np.float64),
                l["activation"],
                float(l.get("slope", DEFAULT_LEAKY_SLOPE)),
            )
            for l in doc["layers"]
        )
        return Network(layers, int(doc["input_dim"]), tuple(doc["input_range"]))
    except KeyError as exc:
        raise ValidationError(f"model file missing field {exc}") from exc


def save_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def save_dataset(data: Dataset, path) -> None:
    """CSV with header x0..x{d-1}[,label], one point per row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"x{i}" for i in range(data.dim)]
        if data.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i in range(len(data)):
            row = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            writer.writerow(row)


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"dataset file {path} is empty")
        has_label = header and header[-1] == "label"
        dim = len(header) - (1 if has_label else 0)
        if header[:dim] != [f"x{i}" for i in range(dim)]:
            raise ValidationError(f"dataset header {header} is not x0..x{dim-1}[,label]")
        points, labels = [], []
        for row in reader:
            if not row:
                continue
            points.append([float(v) for v in row[:dim]])
            if has_label:
                labels.append(int(row[dim]))
        pts = np.asarray(points, dtype=np.float64).reshape(len(points), dim)
        return Dataset(pts, np.asarray(labels, dtype=np.int64) if has_label else None)
