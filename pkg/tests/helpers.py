"""Shared test utilities: independent oracles and small random problems.

The reshaping oracle enumerates every candidate subset directly against the
ratio definition, with no dependence on the solver under test; the LP-file
parser understands exactly the text format export_lp emits so exported
models can be solved by scipy and compared.
"""

from __future__ import annotations

import re

import numpy as np

from actreshape import (
    BinningSpec,
    Dataset,
    Layer,
    Network,
    bin_signatures,
    build_histogram,
    derive_binning,
    propagate_intervals,
)


def survivor_counts(base_counts, sigs, removed):
    """Per-(neuron, bin) counts after deleting the given point indices."""
    counts = base_counts.copy()
    for p in removed:
        for k, j in enumerate(sigs[p]):
            counts[k, j] -= 1
    return counts


def brute_force_reshape(h_op, net, d_test, candidates, layer, spec, eps,
                        min_survivors=1):
    """Exhaustive minimum-removal search over all 2^|candidates| subsets.

    Feasibility is the raw ratio check on the survivor multiset.  Returns
    (best_size, removed_indices) with the lexicographically smallest optimal
    index tuple, or (None, None) when no subset works.
    """
    cand = sorted(int(i) for i in candidates)
    m = len(cand)
    sigs = bin_signatures(net, d_test, layer, spec, h_op.neurons)
    n_bins = spec.n + 1
    k_n = len(h_op.neurons)
    base = np.zeros((k_n, n_bins), dtype=np.int64)
    for k in range(k_n):
        base[k] = np.bincount(sigs[:, k], minlength=n_bins)
    op_r = h_op.ratios().reshape(-1)
    T = len(d_test)

    # one-hot contribution of each candidate, flattened over (neuron, bin)
    onehot = np.zeros((m, k_n * n_bins))
    for i, p in enumerate(cand):
        for k in range(k_n):
            onehot[i, k * n_bins + sigs[p, k]] = 1.0

    masks = np.arange(1 << m, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(np.float64)
    sizes = bits.sum(axis=1)
    survivors = T - sizes
    ok_size = survivors >= min_survivors
    counts = base.reshape(-1)[None, :] - bits @ onehot
    with np.errstate(divide="ignore", invalid="ignore"):
        gaps = np.abs(op_r[None, :] - counts / survivors[:, None])
    feasible = ok_size & (gaps.max(axis=1) <= eps)
    if not feasible.any():
        return None, None
    best = int(sizes[feasible].min())
    at_best = np.where(feasible & (sizes == best))[0]
    options = []
    for mask in at_best:
        removed = tuple(cand[i] for i in range(m) if (int(mask) >> i) & 1)
        options.append(removed)
    return best, min(options)


def random_problem(seed, max_candidates=12):
    """Small seeded reshaping problem: random net, datasets, tolerance.

    Sized so the brute-force oracle stays cheap; roughly a third of the
    seeds produce infeasible instances.
    """
    rng = np.random.default_rng(seed)
    d_in = int(rng.integers(1, 4))
    widths = [d_in] + [int(rng.integers(1, 4)) for _ in range(int(rng.integers(1, 3)))]
    kinds = ("relu", "leaky_relu", "tanh", "identity")
    layers = []
    for a, b in zip(widths[:-1], widths[1:]):
        layers.append(
            Layer(
                rng.uniform(-1.5, 1.5, (b, a)),
                rng.uniform(-0.5, 0.5, b),
                kinds[int(rng.integers(len(kinds)))],
            )
        )
    net = Network(tuple(layers), d_in, (-1.0, 1.0))
    layer = net.n_layers
    width = net.layer_width(layer)
    neurons = tuple(
        sorted(rng.choice(width, size=int(rng.integers(1, width + 1)), replace=False) + 1)
    )
    n_test = int(rng.integers(6, 14))
    d_test = Dataset(rng.uniform(-1.0, 1.0, (n_test, d_in)))
    d_op = Dataset(rng.uniform(-1.0, 1.0, (int(rng.integers(5, 20)), d_in)))
    intervals = propagate_intervals(net, layer)
    delta = float(rng.choice([0.5, 1.0, 2.0]))
    spec = derive_binning(intervals, delta)
    while spec.n > 4:  # keep instances small enough for exhaustive checking
        delta *= 2.0
        spec = derive_binning(intervals, delta)
    h_op = build_histogram(net, d_op, layer, spec, neurons)
    eps = float(rng.choice([0.05, 0.08, 0.1, 0.15, 0.2]))
    if n_test <= max_candidates and rng.random() < 0.6:
        candidates = list(range(n_test))
    else:
        k = int(rng.integers(1, min(max_candidates, n_test) + 1))
        candidates = sorted(rng.choice(n_test, size=k, replace=False).tolist())
    return h_op, net, d_test, candidates, layer, spec, eps


def random_single_neuron_problem(seed):
    """Seeded one-neuron reshaping problem for greedy/exact agreement."""
    rng = np.random.default_rng(seed)
    net = Network(
        (Layer(np.ones((1, 1)), np.zeros(1), "identity"),), 1, (0.0, 10.0)
    )
    spec = BinningSpec(0.0, 1.0, 9)
    n_test = int(rng.integers(5, 40))
    d_test = Dataset(rng.uniform(0.0, 10.0, (n_test, 1)))
    d_op = Dataset(rng.uniform(0.0, 10.0, (int(rng.integers(5, 40)), 1)))
    h_op = build_histogram(net, d_op, 1, spec, (1,))
    eps = float(rng.choice([0.05, 0.1, 0.15, 0.25]))
    return h_op, net, d_test, 1, spec, eps


_TERM = re.compile(r"([+-])?\s*([0-9.]+(?:[eE][+-]?[0-9]+)?)?\s*(x_g[0-9]+)")


def parse_lp_file(path):
    """Parse the exported LP text back into arrays.

    Returns (names, objective, rows, rhs, lower, upper, integer_names) where
    rows/rhs describe `<=` constraints and names fixes variable order.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    statements = [s.strip() for s in text.split(";") if s.strip()]

    def read_terms(expr, coeffs, names):
        for sign, mag, name in _TERM.findall(expr):
            value = float(mag) if mag else 1.0
            if sign == "-":
                value = -value
            coeffs[names.index(name)] += value

    names: list[str] = []
    for stmt in statements:
        for _, _, name in _TERM.findall(stmt):
            if name not in names:
                names.append(name)
    objective = np.zeros(len(names))
    rows, rhs, labels = [], [], []
    lower = np.zeros(len(names))
    upper = np.full(len(names), np.inf)
    integers: list[str] = []
    for stmt in statements:
        if stmt.startswith("min:"):
            read_terms(stmt[4:], objective, names)
        elif stmt.startswith("int "):
            integers = [n.strip() for n in stmt[4:].split(",")]
        elif re.fullmatch(
            r"0\s*<=\s*x_g[0-9]+\s*<=\s*[0-9]+", stmt
        ):
            _, _, rest = stmt.partition("<=")
            name, _, cap = rest.partition("<=")
            upper[names.index(name.strip())] = float(cap)
        else:
            label, _, body = stmt.partition(":")
            lhs, _, rhs_text = body.partition("<=")
            row = np.zeros(len(names))
            read_terms(lhs, row, names)
            rows.append(row)
            rhs.append(float(rhs_text))
            labels.append(label.strip())
    return names, objective, np.array(rows), np.array(rhs), lower, upper, integers, labels
