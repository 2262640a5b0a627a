"""Binned activation histograms and distribution-similarity measures.

A histogram records, per monitored neuron, how many dataset points land in
each bin of a shared binning function.  Two similarity notions compare the
test-set histogram against the operational one: a per-neuron KL divergence
bound (kappa) and a per-bin absolute ratio gap bound (eps).  Neuron indices
are 1-based, matching layer indexing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BinningSpec
from .errors import (
    BinningDomainError,
    EmptyDatasetError,
    IncompatibleHistogramError,
    ValidationError,
)
from .model import Dataset, Network, forward_batch


def bin_indices(spec: BinningSpec, values: np.ndarray) -> np.ndarray:
    """Vectorized binning; raises when any value is outside the domain."""
    x = np.asarray(values, dtype=np.float64)
    lo, hi = spec.domain
    bad = (x < lo) | (x > hi) | ~np.isfinite(x)
    if bad.any():
        offender = x[bad].flat[0]
        raise BinningDomainError(
            f"value {offender} outside binning domain [{lo}, {hi}]", value=float(offender)
        )
    j = np.ceil((x - spec.c) / spec.delta).astype(np.int64) - 1
    return np.clip(j, 0, spec.n)


def bin_value(spec: BinningSpec, x: float) -> int:
    """Bin index of a single value: 0 on [c, c+delta], else the j with
    x in (c+j*delta, c+(j+1)*delta]."""
    return int(bin_indices(spec, np.asarray([x]))[0])


def _resolve_neurons(net: Network, layer: int, neurons) -> tuple[int, ...]:
    width = net.layer_width(layer)
    if neurons is None:
        return tuple(range(1, width + 1))
    subset = tuple(int(i) for i in neurons)
    if not subset:
        raise ValidationError("neuron subset must be nonempty")
    if len(set(subset)) != len(subset):
        raise ValidationError("neuron subset contains duplicates")
    for i in subset:
        if not 1 <= i <= width:
            raise ValidationError(f"neuron index {i} outside 1..{width}")
    return subset


@dataclass(frozen=True)
class ActivationHistogram:
    """Per-neuron bin counts of one dataset's activations at one layer.

    counts[k][j] is the number of points whose neuron neurons[k] activation
    falls in bin j; every row sums to total.
    """

    counts: np.ndarray  # shape (len(neurons), n+1), int64
    total: int
    spec: BinningSpec
    layer: int
    neurons: tuple[int, ...]

    def __post_init__(self):
        cts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", cts)
        object.__setattr__(self, "neurons", tuple(int(i) for i in self.neurons))
        if cts.shape != (len(self.neurons), self.spec.n + 1):
            raise ValidationError(
                f"counts shape {cts.shape} does not match "
                f"{len(self.neurons)} neurons x {self.spec.n + 1} bins"
            )
        if (cts < 0).any():
            raise ValidationError("negative bin count")
        if cts.size and not (cts.sum(axis=1) == self.total).all():
            raise ValidationError("every neuron row must sum to the dataset size")

    def ratios(self) -> np.ndarray:
        """Relative bin frequencies, counts / total."""
        if self.total == 0:
            raise EmptyDatasetError("histogram over an empty dataset has no ratios")
        return self.counts / self.total

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "layer": self.layer,
            "neurons": list(self.neurons),
            "spec": self.spec.to_dict(),
            "total": self.total,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ActivationHistogram":
        return ActivationHistogram(
            np.asarray(doc["counts"], dtype=np.int64),
            int(doc["total"]),
            BinningSpec.from_dict(doc["spec"]),
            int(doc["layer"]),
            tuple(doc["neurons"]),
        )


def save_histogram(hist: ActivationHistogram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hist.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_histogram(path) -> ActivationHistogram:
    with open(path, "r", encoding="utf-8") as fh:
        return ActivationHistogram.from_dict(json.load(fh))


def bin_signatures(
    net: Network,
    data: Dataset,
    layer: int,
    spec: BinningSpec,
    neurons=None,
    threads: int = 1,
) -> np.ndarray:
    """Bin-index vector of every point, shape (|data|, len(neurons)).

    Row p is the signature of point p: the bin its activation occupies at
    each monitored neuron, in dataset order.
    """
    subset = _resolve_neurons(net, layer, neurons)
    acts = forward_batch(net, data.points, layer, threads=threads)
    cols = np.asarray([i - 1 for i in subset], dtype=np.int64)
    picked = acts[:, cols] if len(acts) else acts.reshape(0, len(cols))
    try:
        return bin_indices(spec, picked)
    except BinningDomainError as exc:
        where = np.argwhere(~((picked >= spec.domain[0]) & (picked <= spec.domain[1])))
        p, k = (int(where[0][0]), int(where[0][1])) if len(where) else (None, None)
        raise BinningDomainError(
            f"activation {exc.value} of point {p}, neuron {subset[k] if k is not None else '?'} "
            f"outside binning domain {spec.domain}",
            value=exc.value,
            point=p,
            neuron=subset[k] if k is not None else None,
        ) from None


def counts_from_signatures(sigs: np.ndarray, n_bins: int) -> np.ndarray:
    """Per-neuron bin counts from a signature matrix."""
    n_neurons = sigs.shape[1]
    counts = np.zeros((n_neurons, n_bins), dtype=np.int64)
    for k in range(n_neurons):
        counts[k] = np.bincount(sigs[:, k], minlength=n_bins)
    return counts


def build_histogram(
    net: Network,
    data: Dataset,
    layer: int,
    spec: BinningSpec,
    neurons=None,
    threads: int = 1,
) -> ActivationHistogram:
    """Histogram of the dataset's activations at one layer under a spec."""
    subset = _resolve_neurons(net, layer, neurons)
    sigs = bin_signatures(net, data, layer, spec, subset, threads=threads)
    counts = counts_from_signatures(sigs, spec.n + 1)
    return ActivationHistogram(counts, len(data), spec, layer, subset)


# ---------------------------------------------------------------------------
# similarity measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimilarityReport:
    """Outcome of one similarity check between two histograms.

    per_neuron maps each monitored neuron to its worst statistic: the KL
    divergence for kind "kl", the largest absolute per-bin ratio gap for
    kind "portion".  max_location is the (neuron, bin) of the overall worst
    gap for "portion" and (neuron, None) for "kl".  undefined_bins lists the
    (neuron, bin) pairs where the test set contributes but operation does
    not (KL only).
    """

    kind: str  # "portion" | "kl"
    threshold: float
    satisfied: bool
    per_neuron: dict = field(default_factory=dict)
    max_stat: float = 0.0
    max_location: tuple = (None, None)
    undefined_bins: tuple = ()

    def to_dict(self) -> dict:
        enc = lambda v: "inf" if math.isinf(v) else v
        return {
            "kind": self.kind,
            "max_location": list(self.max_location),
            "max_stat": enc(self.max_stat),
            "per_neuron": {str(k): enc(v) for k, v in sorted(self.per_neuron.items())},
            "satisfied": self.satisfied,
            "threshold": self.threshold,
            "undefined_bins": [list(b) for b in self.undefined_bins],
        }

    @staticmethod
    def from_dict(doc: dict) -> "SimilarityReport":
        dec = lambda v: math.inf if v == "inf" else float(v)
        return SimilarityReport(
            kind=doc["kind"],
            threshold=float(doc["threshold"]),
            satisfied=bool(doc["satisfied"]),
            per_neuron={int(k): dec(v) for k, v in doc["per_neuron"].items()},
            max_stat=dec(doc["max_stat"]),
            max_location=tuple(doc["max_location"]),
            undefined_bins=tuple(tuple(b) for b in doc["undefined_bins"]),
        )


def save_report(report: SimilarityReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _check_compatible(h_op: ActivationHistogram, h_test: ActivationHistogram) -> None:
    if h_op.spec != h_test.spec:
        raise IncompatibleHistogramError(
            f"binning specs differ: {h_op.spec} vs {h_test.spec}"
        )
    if h_op.layer != h_test.layer:
        raise IncompatibleHistogramError(
            f"layers differ: {h_op.layer} vs {h_test.layer}"
        )
    if h_op.neurons != h_test.neurons:
        raise IncompatibleHistogramError(
            f"neuron subsets differ: {h_op.neurons} vs {h_test.neurons}"
        )
    if h_op.total == 0 or h_test.total == 0:
        raise EmptyDatasetError("similarity needs nonempty datasets on both sides")


def portion_gaps(h_op: ActivationHistogram, h_test: ActivationHistogram) -> np.ndarray:
    """Signed per-(neuron, bin) ratio differences, operation minus test."""
    _check_compatible(h_op, h_test)
    return h_op.ratios() - h_test.ratios()


def epsilon_portion_similar(
    h_op: ActivationHistogram, h_test: ActivationHistogram, eps: float
) -> SimilarityReport:
    """Check that every per-bin relative frequency differs by at most eps.

    The comparison is an exact <= against the threshold; the report records
    the worst absolute gap and where it occurs.
    """
    gaps = np.abs(portion_gaps(h_op, h_test))
    per_neuron = {n: float(gaps[k].max()) for k, n in enumerate(h_op.neurons)}
    flat = int(np.argmax(gaps))
    k, j = divmod(flat, gaps.shape[1])
    max_stat = float(gaps[k, j])
    return SimilarityReport(
        kind="portion",
        threshold=float(eps),
        satisfied=bool(max_stat <= eps),
        per_neuron=per_neuron,
        max_stat=max_stat,
        max_location=(h_op.neurons[k], int(j)),
    )


def kl_similar(
    h_op: ActivationHistogram, h_test: ActivationHistogram, kappa: float
) -> SimilarityReport:
    """Per-neuron discrete KL divergence of test ratios from operational
    ratios, bounded by kappa.

    Bins empty on both sides are omitted; a bin where the test set
    contributes but operation does not makes the divergence infinite and is
    reported in undefined_bins.
    """
    _check_compatible(h_op, h_test)
    p = h_test.ratios()
    q = h_op.ratios()
    per_neuron: dict[int, float] = {}
    undefined: list[tuple[int, int]] = []
    for k, neuron in enumerate(h_op.neurons):
        div = 0.0
        for j in range(h_op.spec.n + 1):
            if p[k, j] == 0.0:
                continue
            if q[k, j] == 0.0:
                undefined.append((neuron, j))
                div = math.inf
                continue
            if not math.isinf(div):
                div += float(p[k, j]) * math.log(p[k, j] / q[k, j])
        per_neuron[neuron] = float(div)
    worst = max(per_neuron, key=lambda n: per_neuron[n])
    satisfied = not undefined and all(v <= kappa for v in per_neuron.values())
    return SimilarityReport(
        kind="kl",
        threshold=float(kappa),
        satisfied=bool(satisfied),
        per_neuron=per_neuron,
        max_stat=per_neuron[worst],
        max_location=(worst, None),
        undefined_bins=tuple(undefined),
    )


def conservative_kappa(h_test: ActivationHistogram, eps: float) -> dict[int, float]:
    """Per-neuron kappa bound guaranteed to hold for any operational
    histogram that is eps-portion similar to the test set (and nonzero
    wherever the test set contributes).

    Uses the worst case where every operational bin ratio sits at p_j - eps;
    neurons with a contributing bin at p_j <= eps get an infinite bound
    (flagged, not an error).
    """
    if eps < 0:
        raise ValidationError("eps must be non-negative")
    p = h_test.ratios()
    out: dict[int, float] = {}
    for k, neuron in enumerate(h_test.neurons):
        bound = 0.0
        for pj in p[k]:
            if pj == 0.0:
                continue
            if pj - eps <= 0.0:
                bound = math.inf
                break
            bound += float(pj) * math.log(pj / (pj - eps))
        out[neuron] = float(bound)
    return out
