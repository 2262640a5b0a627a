"""Safety-performance indicators, covariate-shift simulation, and the
end-to-end reshaping experiment harness.

The indicators are accuracy-based (overall and per class) plus the class
composition of the dataset; shifted operational sets are produced by seeded
weighted sampling without replacement.  run_experiment wires the whole
pipeline together — bounds, histograms, similarity, reshaping, indicator
re-estimation — and writes every artifact to a bundle directory so runs are
reproducible and inspectable.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, asdict, replace

import numpy as np

from .bounds import derive_binning, propagate_intervals
from .errors import (
    ComparabilityError,
    EmptyDatasetError,
    MissingLabelsError,
    SampleSizeError,
    ValidationError,
)
from .histogram import (
    build_histogram,
    epsilon_portion_similar,
    kl_similar,
    save_histogram,
    save_report,
)
from .model import (
    Dataset,
    Network,
    collect_values,
    load_dataset,
    load_network,
    save_dataset,
    save_network,
    train_fixture,
)
from .reshape import (
    apply_plan,
    encode,
    export_lp,
    save_plan,
    solve_exact,
    solve_greedy,
)


@dataclass(frozen=True)
class SpiReport:
    """Accuracy-based safety performance indicators for one dataset."""

    overall_accuracy: float
    per_class_accuracy: dict[int, float]
    class_ratios: dict[int, float]
    dataset_size: int

    def __post_init__(self):
        total = sum(self.class_ratios.values())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"class ratios sum to {total}, expected 1")
        accs = [self.overall_accuracy, *self.per_class_accuracy.values()]
        if any(not 0.0 <= a <= 1.0 for a in accs):
            raise ValidationError("accuracies must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": {str(c): v for c, v in self.per_class_accuracy.items()},
            "class_ratios": {str(c): v for c, v in self.class_ratios.items()},
            "dataset_size": self.dataset_size,
        }

    @staticmethod
    def from_dict(doc: dict) -> "SpiReport":
        return SpiReport(
            overall_accuracy=float(doc["overall_accuracy"]),
            per_class_accuracy={int(c): float(v) for c, v in doc["per_class_accuracy"].items()},
            class_ratios={int(c): float(v) for c, v in doc["class_ratios"].items()},
            dataset_size=int(doc["dataset_size"]),
        )


def save_spi(report: SpiReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spi(path) -> SpiReport:
    with open(path, "r", encoding="utf-8") as fh:
        return SpiReport.from_dict(json.load(fh))


@dataclass(frozen=True)
class ShiftSpec:
    """Weighted-resampling recipe: per-class sampling weights, target size,
    and the seed that makes the draw reproducible."""

    class_weights: dict[int, float]
    sample_size: int
    seed: int

    def __post_init__(self):
        if not self.class_weights:
            raise ValidationError("class_weights must not be empty")
        if any(w < 0 for w in self.class_weights.values()):
            raise ValidationError("class weights must be non-negative")
        if not any(w > 0 for w in self.class_weights.values()):
            raise ValidationError("at least one class weight must be positive")
        if self.sample_size <= 0:
            raise ValidationError("sample_size must be positive")


def compute_spi(net: Network, data: Dataset, classes=None) -> SpiReport:
    """Exact counts-based indicators; prediction = argmax of the final layer.

    classes fixes the class universe (needed when comparing reports across
    datasets that may not contain every class); default is the classes
    present in `data`.  A class absent from the data gets ratio 0 and, by
    convention, per-class accuracy 0.
    """
    if data.labels is None:
        raise MissingLabelsError("indicator computation needs a labeled dataset")
    if len(data) == 0:
        raise EmptyDatasetError("indicator computation needs a nonempty dataset")
    if classes is None:
        classes = sorted(int(c) for c in np.unique(data.labels))
    else:
        classes = sorted(int(c) for c in classes)
        present = set(int(c) for c in np.unique(data.labels))
        if not present.issubset(classes):
            raise ValidationError("dataset contains labels outside the class universe")
    width = net.layer_width(net.n_layers)
    if width < max(classes) + 1:
        raise ValidationError(
            f"output width {width} cannot represent class {max(classes)}"
        )
    outputs = collect_values(net, data, net.n_layers)
    preds = np.argmax(outputs, axis=0)
    labels = data.labels
    n = len(data)
    per_acc: dict[int, float] = {}
    ratios: dict[int, float] = {}
    for c in classes:
        mask = labels == c
        cnt = int(mask.sum())
        ratios[c] = cnt / n
        per_acc[c] = float((preds[mask] == c).sum() / cnt) if cnt else 0.0
    return SpiReport(
        overall_accuracy=float((preds == labels).sum() / n),
        per_class_accuracy=per_acc,
        class_ratios=ratios,
        dataset_size=n,
    )


def simulate_shift(data: Dataset, spec: ShiftSpec) -> Dataset:
    """Seeded weighted sampling without replacement from a labeled pool.

    Classes named in the spec must exist in the pool; classes the spec does
    not mention sample with weight 1.  Zero-weight classes are excluded
    entirely, and asking for more points than the positively-weighted pool
    holds raises a sample-size error.
    """
    if data.labels is None:
        raise MissingLabelsError("shift simulation needs a labeled dataset")
    present = set(int(c) for c in np.unique(data.labels))
    missing = sorted(set(spec.class_weights) - present)
    if missing:
        raise ValidationError(f"classes {missing} not present in the pool")
    weights = np.ones(len(data))
    for c, w in spec.class_weights.items():
        weights[data.labels == c] = w
    attainable = int((weights > 0).sum())
    if spec.sample_size > attainable:
        raise SampleSizeError(
            f"requested {spec.sample_size} points but only {attainable} have "
            "positive weight"
        )
    rng = np.random.default_rng(spec.seed)
    probs = weights / weights.sum()
    idx = rng.choice(len(data), size=spec.sample_size, replace=False, p=probs)
    return data.subset(np.sort(idx))


def ratio_distance(a: SpiReport, b: SpiReport) -> float:
    """Sum over classes of |ratio difference| between two reports."""
    if set(a.class_ratios) != set(b.class_ratios):
        raise ComparabilityError("reports cover different class universes")
    return float(
        sum(abs(a.class_ratios[c] - b.class_ratios[c]) for c in a.class_ratios)
    )


def gaussian_clusters(
    size: int,
    n_classes: int,
    input_dim: int = 2,
    seed: int = 0,
    radius: float = 4.0,
    spread: float = 0.9,
) -> Dataset:
    """Balanced labeled dataset of isotropic Gaussian blobs, one per class,
    with centers spaced on a circle (first two coordinates)."""
    if size <= 0 or n_classes <= 0 or input_dim <= 0:
        raise ValidationError("size, n_classes, and input_dim must be positive")
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = np.zeros((n_classes, input_dim))
    centers[:, 0] = radius * np.cos(angles)
    if input_dim >= 2:
        centers[:, 1] = radius * np.sin(angles)
    labels = np.arange(size) % n_classes
    rng.shuffle(labels)
    points = centers[labels] + spread * rng.standard_normal((size, input_dim))
    return Dataset(points, labels)


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs; JSON-serializable.

    With the path fields unset the harness builds a self-contained synthetic
    run: a Gaussian-cluster pool, a fixture-trained classifier, a test set
    oversampling the top class ids, and a uniformly-sampled operational set.
    eps_ladder lists fallback tolerances tried in order when reshaping at
    `eps` is infeasible.
    """

    out_dir: str
    model_path: str | None = None
    test_path: str | None = None
    op_path: str | None = None
    n_classes: int = 5
    input_dim: int = 2
    hidden: tuple[int, ...] = (24, 10)
    hidden_activations: tuple[str, ...] = ("relu", "tanh")
    train_size: int = 3000
    epochs: int = 40
    step: float = 0.05
    test_size: int = 2000
    op_size: int = 1000
    test_weights: dict[int, float] | None = None
    op_weights: dict[int, float] | None = None
    layer: int | None = None
    neurons: tuple[int, ...] | None = None
    max_neurons: int = 20
    delta: float = 1.0
    eps: float = 0.01
    eps_ladder: tuple[float, ...] = (0.02, 0.05, 0.1)
    kappa: float | None = None
    candidates: str = "all"
    method: str = "exact"
    min_survivors: int = 1
    # per-attempt search cap: degenerate instances keep a usable (verified)
    # incumbent but report "timeout" instead of grinding on an optimality
    # proof the LP relaxation cannot close
    node_budget: int = 30_000
    export_lp_file: bool = False
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict:
        doc = asdict(self)
        for key in ("hidden", "hidden_activations", "eps_ladder", "neurons"):
            if doc[key] is not None:
                doc[key] = list(doc[key])
        for key in ("test_weights", "op_weights"):
            if doc[key] is not None:
                doc[key] = {str(c): w for c, w in doc[key].items()}
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        for key in ("hidden", "hidden_activations", "eps_ladder", "neurons"):
            if doc.get(key) is not None:
                doc[key] = tuple(doc[key])
        for key in ("test_weights", "op_weights"):
            if doc.get(key) is not None:
                doc[key] = {int(c): float(w) for c, w in doc[key].items()}
        return ExperimentConfig(**doc)


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class ExperimentResult:
    """Headline numbers of one run plus where the artifacts were written.

    x = ratio_distance(operational, reshaped), y = ratio_distance
    (operational, original test); x < y means reshaping moved the test
    composition toward operation.
    """

    x: float
    y: float
    removed: int | None
    status: str
    eps_used: float | None
    feasible: bool
    solve_seconds: float
    out_dir: str
    spi_test: SpiReport
    spi_op: SpiReport
    spi_reshaped: SpiReport
    attempts: tuple = ()


def _default_weights(n_classes: int, inflate: bool) -> dict[int, float]:
    """Oversample the top three class ids (or uniform when inflate=False)."""
    top = set(range(max(0, n_classes - 3), n_classes))
    if not inflate:
        return {c: 1.0 for c in range(n_classes)}
    return {c: (3.0 if c in top else 1.0) for c in range(n_classes)}


def _materialize_inputs(cfg: ExperimentConfig):
    """Load or synthesize (net, d_test, d_op) per the config."""
    pools = []
    d_test = load_dataset(cfg.test_path) if cfg.test_path else None
    d_op = load_dataset(cfg.op_path) if cfg.op_path else None
    if d_test is None:
        pool = gaussian_clusters(
            4 * cfg.test_size, cfg.n_classes, cfg.input_dim, seed=cfg.seed + 101
        )
        weights = cfg.test_weights or _default_weights(cfg.n_classes, inflate=True)
        d_test = simulate_shift(pool, ShiftSpec(weights, cfg.test_size, cfg.seed + 1))
        pools.append(pool.points)
    if d_op is None:
        pool = gaussian_clusters(
            4 * cfg.op_size, cfg.n_classes, cfg.input_dim, seed=cfg.seed + 202
        )
        weights = cfg.op_weights or _default_weights(cfg.n_classes, inflate=False)
        d_op = simulate_shift(pool, ShiftSpec(weights, cfg.op_size, cfg.seed + 2))
        pools.append(pool.points)

    if cfg.model_path:
        net = load_network(cfg.model_path)
    else:
        train_pool = gaussian_clusters(
            cfg.train_size, cfg.n_classes, cfg.input_dim, seed=cfg.seed + 303
        )
        pools.append(train_pool.points)
        pools.append(d_test.points)
        pools.append(d_op.points)
        stacked = np.vstack(pools)
        input_range = (float(stacked.min()) - 1.0, float(stacked.max()) + 1.0)
        dims = [cfg.input_dim, *cfg.hidden, cfg.n_classes]
        activations = [*cfg.hidden_activations, "identity"]
        net = train_fixture(
            dims,
            activations,
            train_pool,
            epochs=cfg.epochs,
            step=cfg.step,
            seed=cfg.seed,
            input_range=input_range,
        )
    return net, d_test, d_op


def _pick_candidates(cfg: ExperimentConfig, n_test: int):
    """Resolve the candidate policy string to indices (None = all)."""
    if cfg.candidates == "all":
        return None
    if cfg.candidates.startswith("random:"):
        parts = cfg.candidates.split(":")
        k = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else cfg.seed + 4
        if not 0 < k <= n_test:
            raise ValidationError(f"random candidate count must lie in 1..{n_test}")
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(n_test, size=k, replace=False))
    raise ValidationError(f"unknown candidate policy: {cfg.candidates!r}")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Full pipeline: bounds -> histograms -> similarity -> reshape -> SPI.

    Writes a bundle under cfg.out_dir (histograms, plan, indicator reports,
    summary.csv, timings.json, resolved config).  Everything except
    timings.json and the solve-time column of summary.csv is
    byte-deterministic for a fixed config.  An infeasible reshaping is
    recorded in the bundle, with indicators computed on the untouched test
    set, rather than raised.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    timings: dict[str, float] = {}
    t_all = time.perf_counter()

    net, d_test, d_op = _materialize_inputs(cfg)
    layer = cfg.layer if cfg.layer is not None else max(1, net.n_layers - 1)
    net.check_layer_index(layer)
    width = net.layer_width(layer)
    neurons = cfg.neurons or tuple(range(1, min(cfg.max_neurons, width) + 1))

    t0 = time.perf_counter()
    intervals = propagate_intervals(net, layer)
    spec = derive_binning(intervals, cfg.delta)
    timings["bounds"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    h_test = build_histogram(net, d_test, layer, spec, neurons, threads=cfg.threads)
    h_op = build_histogram(net, d_op, layer, spec, neurons, threads=cfg.threads)
    timings["histograms"] = time.perf_counter() - t0

    before = epsilon_portion_similar(h_op, h_test, cfg.eps)
    kl_before = kl_similar(h_op, h_test, cfg.kappa) if cfg.kappa is not None else None

    candidates = _pick_candidates(cfg, len(d_test))
    attempts: list[dict] = []
    plan = None
    eps_used = None
    solve_seconds = 0.0
    for eps in (cfg.eps, *cfg.eps_ladder):
        inst = encode(
            h_op, net, d_test, candidates, layer, spec, eps,
            min_survivors=cfg.min_survivors,
        )
        if cfg.export_lp_file and eps == cfg.eps:
            export_lp(inst, os.path.join(cfg.out_dir, "model.lp"))
        t0 = time.perf_counter()
        trial = (
            solve_greedy(inst)
            if cfg.method == "greedy"
            else solve_exact(inst, node_budget=cfg.node_budget)
        )
        dt = time.perf_counter() - t0
        solve_seconds += dt
        attempts.append(
            {
                "eps": eps,
                "status": trial.status,
                "removed_count": trial.removed_count,
                "seconds": dt,
            }
        )
        if trial.verified:
            plan, eps_used = trial, eps
            break
        plan = trial
    timings["solve"] = solve_seconds

    feasible = plan is not None and plan.verified
    d_reshaped = apply_plan(d_test, plan) if feasible else d_test
    h_reshaped = build_histogram(
        net, d_reshaped, layer, spec, neurons, threads=cfg.threads
    )
    after = epsilon_portion_similar(
        h_op, h_reshaped, eps_used if eps_used is not None else cfg.eps
    )

    universe = sorted(
        set(int(c) for c in np.unique(d_test.labels))
        | set(int(c) for c in np.unique(d_op.labels))
    )
    spi_test = compute_spi(net, d_test, universe)
    spi_op = compute_spi(net, d_op, universe)
    spi_reshaped = compute_spi(net, d_reshaped, universe) if feasible else spi_test
    x = ratio_distance(spi_op, spi_reshaped)
    y = ratio_distance(spi_op, spi_test)

    out = cfg.out_dir
    save_network(net, os.path.join(out, "model.json"))
    save_dataset(d_test, os.path.join(out, "test.csv"))
    save_dataset(d_op, os.path.join(out, "op.csv"))
    save_dataset(d_reshaped, os.path.join(out, "reshaped.csv"))
    save_histogram(h_test, os.path.join(out, "hist_test.json"))
    save_histogram(h_op, os.path.join(out, "hist_op.json"))
    save_histogram(h_reshaped, os.path.join(out, "hist_reshaped.json"))
    save_report(before, os.path.join(out, "similarity_before.json"))
    save_report(after, os.path.join(out, "similarity_after.json"))
    if kl_before is not None:
        save_report(kl_before, os.path.join(out, "similarity_kl.json"))
    save_plan(plan, os.path.join(out, "plan.json"), similarity=after.to_dict())
    save_spi(spi_test, os.path.join(out, "spi_test.json"))
    save_spi(spi_op, os.path.join(out, "spi_op.json"))
    save_spi(spi_reshaped, os.path.join(out, "spi_reshaped.json"))
    with open(os.path.join(out, "bounds.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "layer": layer,
                "intervals": [[iv.lo, iv.hi] for iv in intervals],
                "spec": spec.to_dict(),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    with open(os.path.join(out, "attempts.json"), "w", encoding="utf-8") as fh:
        json.dump(attempts, fh, indent=2, sort_keys=True)
        fh.write("\n")
    resolved = replace(cfg, layer=layer, neurons=tuple(neurons))
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(resolved.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    n_candidates = len(d_test) if candidates is None else len(candidates)
    with open(os.path.join(out, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["test_size", "op_size", "candidates", "removed", "x", "y", "solve_seconds"]
        )
        writer.writerow(
            [
                len(d_test),
                len(d_op),
                n_candidates,
                plan.removed_count if plan.removed_count is not None else "",
                repr(x),
                repr(y),
                repr(solve_seconds),
            ]
        )

    timings["total"] = time.perf_counter() - t_all
    with open(os.path.join(out, "timings.json"), "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return ExperimentResult(
        x=x,
        y=y,
        removed=plan.removed_count,
        status=plan.status,
        eps_used=eps_used,
        feasible=feasible,
        solve_seconds=solve_seconds,
        out_dir=out,
        spi_test=spi_test,
        spi_op=spi_op,
        spi_reshaped=spi_reshaped,
        attempts=tuple(
            (a["eps"], a["status"], a["removed_count"]) for a in attempts
        ),
    )
