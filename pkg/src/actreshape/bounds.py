"""Sound per-neuron activation intervals and binning parameters.

Interval-bound propagation (boxed abstraction) gives, in a single pass that
is linear in the total neuron count, conservative ranges [lo_i, hi_i] for
every neuron at the analyzed layer.  From those ranges and a bin width the
binning parameters (c, delta, N) are derived so every reachable activation
falls inside the binning domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatasetError, ValidationError
from .model import Layer, Network, apply_activation


@dataclass(frozen=True)
class NeuronInterval:
    """Conservative activation range of one neuron."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValidationError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValidationError(f"empty interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class BinningSpec:
    """Parameters (c, delta, n) of the binning function.

    The binning domain is [c, c + (n+1)*delta]: bin 0 is the closed interval
    [c, c+delta], bins 1..n are half-open (c+j*delta, c+(j+1)*delta].  Sound
    bounds guarantee activations within [c, c+n*delta]; the trailing slack
    bin is harmless.
    """

    c: float
    delta: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "n", int(self.n))
        if not self.delta > 0:
            raise ValidationError("bin width delta must be positive")
        if self.n < 0:
            raise ValidationError("bin count n must be non-negative")

    @property
    def domain(self) -> tuple[float, float]:
        return (self.c, self.c + (self.n + 1) * self.delta)

    @property
    def n_bins(self) -> int:
        return self.n + 1

    def to_dict(self) -> dict:
        return {"c": self.c, "delta": self.delta, "n": self.n}

    @staticmethod
    def from_dict(doc: dict) -> "BinningSpec":
        return BinningSpec(float(doc["c"]), float(doc["delta"]), int(doc["n"]))


def _layer_intervals(layer: Layer, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One propagation step: affine part split by weight sign, then the
    (monotone) activation applied to the endpoints."""
    w_pos = np.maximum(layer.weights, 0.0)
    w_neg = np.minimum(layer.weights, 0.0)
    pre_lo = w_pos @ lo + w_neg @ hi + layer.bias
    pre_hi = w_pos @ hi + w_neg @ lo + layer.bias
    return (
        apply_activation(layer.activation, pre_lo, layer.slope),
        apply_activation(layer.activation, pre_hi, layer.slope),
    )


def propagate_intervals(net: Network, layer: int) -> list[NeuronInterval]:
    """Sound activation intervals for every neuron at the given layer.

    For every input in the network's domain, the activation of neuron i lies
    in the returned interval i.  Single forward pass over layers 1..layer.
    """
    net.check_layer_index(layer)
    v_min, v_max = net.input_range
    lo = np.full(net.input_dim, v_min)
    hi = np.full(net.input_dim, v_max)
    for lyr in net.layers[:layer]:
        lo, hi = _layer_intervals(lyr, lo, hi)
    return [NeuronInterval(float(a), float(b)) for a, b in zip(lo, hi)]


def derive_binning(intervals: list[NeuronInterval], delta: float) -> BinningSpec:
    """Binning parameters covering every interval: c is the least lower
    endpoint, n the ceiling of (largest upper endpoint - c) / delta."""
    if not intervals:
        raise EmptyDatasetError("cannot derive binning from an empty interval list")
    if not delta > 0:
        raise ValidationError("bin width delta must be positive")
    c = min(iv.lo for iv in intervals)
    top = max(iv.hi for iv in intervals)
    n = max(0, math.ceil((top - c) / delta))
    return BinningSpec(c, float(delta), n)
