"""Minimum-removal test-set reshaping as a grouped 0-1 / bounded-integer MILP.

The encoding introduces one bounded integer variable per distinct bin
signature among the removal candidates (candidates sharing a signature are
interchangeable), linearizes the ratio constraints by multiplying through by
the survivor count, and solves exactly with a depth-first branch-and-bound
over LP relaxations from the bundled simplex.  Integer incumbents are
accepted only if the survivor multiset passes the exact per-bin ratio check,
so an optimal plan always verifies against the same arithmetic the
similarity checker uses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BinningSpec
from .errors import (
    EmptyDatasetError,
    IncompatibleHistogramError,
    ValidationError,
    WrongMethodError,
)
from .histogram import ActivationHistogram, bin_signatures
from .model import Dataset, Network
from .simplex import INFEASIBLE, OPTIMAL, solve_lp

# slack added to the LP relaxation only, so float roundoff in the exact
# ratio check can never make a truly feasible point LP-infeasible
_LP_PAD = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_TIMEOUT = "timeout"


@dataclass(frozen=True)
class SignatureGroup:
    """Removal candidates sharing one bin-signature, members ascending."""

    signature: tuple[int, ...]
    members: tuple[int, ...]

    @property
    def capacity(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class MilpInstance:
    """Grouped encoding of the reshaping problem with constants precomputed.

    op_ratios[k][j] and test_counts[k][j] are indexed by neuron position k
    (into `neurons`) and bin j; test_total is |D_test|.  Feasible integer
    assignments x (one entry per group, 0 <= x_g <= capacity) are exactly
    the removal multisets whose survivor set is eps-portion similar to the
    operational histogram.
    """

    groups: tuple[SignatureGroup, ...]
    op_ratios: np.ndarray
    test_counts: np.ndarray
    test_total: int
    eps: float
    spec: BinningSpec
    layer: int
    neurons: tuple[int, ...]
    min_survivors: int = 1

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "op_ratios", np.asarray(self.op_ratios, dtype=np.float64))
        object.__setattr__(self, "test_counts", np.asarray(self.test_counts, dtype=np.int64))
        shape = (len(self.neurons), self.spec.n + 1)
        if self.op_ratios.shape != shape or self.test_counts.shape != shape:
            raise ValidationError("constant matrices do not match neurons x bins")
        if (self.test_counts < 0).any() or (self.test_counts > self.test_total).any():
            raise ValidationError("test counts must lie in 0..|D_test|")
        if not 1 <= self.min_survivors <= self.test_total:
            raise ValidationError("min_survivors must lie in 1..|D_test|")
        sigs = [g.signature for g in self.groups]
        if len(set(sigs)) != len(sigs):
            raise ValidationError("group signatures must be distinct")

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def capacities(self) -> np.ndarray:
        return np.asarray([g.capacity for g in self.groups], dtype=np.int64)

    def _signature_matrix(self) -> np.ndarray:
        if not self.groups:
            return np.zeros((0, len(self.neurons)), dtype=np.int64)
        return np.asarray([g.signature for g in self.groups], dtype=np.int64)

    def removals_by_bin(self, x: np.ndarray) -> np.ndarray:
        """Per-(neuron, bin) removal totals implied by group counts x."""
        sig = self._signature_matrix()
        out = np.zeros_like(self.test_counts)
        for k in range(len(self.neurons)):
            out[k] = np.bincount(
                sig[:, k], weights=np.asarray(x, dtype=np.float64), minlength=self.spec.n + 1
            ).astype(np.int64) if len(sig) else 0
        return out

    def feasible_removal(self, x: np.ndarray) -> bool:
        """Exact similarity check of the survivor multiset for integer x.

        Uses the same double-precision ratio arithmetic as the portion
        similarity checker, so acceptance here implies the post-hoc recheck
        succeeds with no tolerance.
        """
        x = np.asarray(x, dtype=np.int64)
        if (x < 0).any() or (x > self.capacities).any():
            return False
        removed = int(x.sum())
        survivors = self.test_total - removed
        if survivors < self.min_survivors:
            return False
        surv_counts = self.test_counts - self.removals_by_bin(x)
        if (surv_counts < 0).any():
            return False
        gaps = self.op_ratios - surv_counts / survivors
        return bool((np.abs(gaps) <= self.eps).all())

    def constraint_rows(self, pad: float = 0.0):
        """Linearized <=-rows over group variables.

        Two rows per (neuron, bin) plus the survivor-count row; `pad` widens
        eps symmetrically (used for the LP relaxation only).  Returns
        (A, b, descriptors) where descriptors name each row.
        """
        k_n, n_bins = self.test_counts.shape
        G = self.n_groups
        eps = self.eps + pad
        T = self.test_total
        sig = self._signature_matrix()
        rows = 2 * k_n * n_bins + 1
        A = np.zeros((rows, G))
        b = np.zeros(rows)
        desc: list[tuple] = []
        r = 0
        for k in range(k_n):
            member = (
                (sig[:, k][None, :] == np.arange(n_bins)[:, None]).astype(np.float64)
                if G
                else np.zeros((n_bins, 0))
            )
            for j in range(n_bins):
                ratio = self.op_ratios[k, j]
                ct = int(self.test_counts[k, j])
                A[r] = member[j] - ratio + eps
                b[r] = (eps - ratio) * T + ct
                desc.append((self.neurons[k], j, "upper"))
                A[r + 1] = -member[j] + ratio + eps
                b[r + 1] = (eps + ratio) * T - ct
                desc.append((self.neurons[k], j, "lower"))
                r += 2
        A[r] = 1.0
        b[r] = T - self.min_survivors
        desc.append(("survivors",))
        return A, b, desc

    def realize(self, x: np.ndarray) -> tuple[int, ...]:
        """Removal multiset for group counts x: lowest member indices first."""
        removed: list[int] = []
        for g, cnt in zip(self.groups, np.asarray(x, dtype=np.int64)):
            removed.extend(g.members[: int(cnt)])
        return tuple(sorted(removed))


@dataclass(frozen=True)
class ReshapePlan:
    """Removal decision: point indices into D_test plus solver metadata."""

    removed: tuple[int, ...]
    removed_count: int | None
    status: str
    verified: bool
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "removed": list(self.removed),
            "removed_count": self.removed_count,
            "status": self.status,
            "verified": self.verified,
            "stats": self.stats,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ReshapePlan":
        return ReshapePlan(
            removed=tuple(doc["removed"]),
            removed_count=doc["removed_count"],
            status=doc["status"],
            verified=bool(doc["verified"]),
            stats=dict(doc.get("stats", {})),
        )


def encode(
    h_op: ActivationHistogram,
    net: Network,
    d_test: Dataset,
    d_can=None,
    layer: int | None = None,
    spec: BinningSpec | None = None,
    eps: float = 0.01,
    min_survivors: int = 1,
) -> MilpInstance:
    """Build the grouped MILP instance for one reshaping problem.

    d_can is a set of 0-based point indices into d_test (default: every
    point is a removal candidate).  layer and spec default to the
    operational histogram's and must match it when given explicitly.
    """
    if len(d_test) == 0:
        raise EmptyDatasetError("cannot reshape an empty test set")
    if h_op.total == 0:
        raise EmptyDatasetError("operational histogram is empty")
    if layer is not None and layer != h_op.layer:
        raise IncompatibleHistogramError(
            f"layer {layer} does not match operational histogram layer {h_op.layer}"
        )
    if spec is not None and spec != h_op.spec:
        raise IncompatibleHistogramError("binning spec does not match operational histogram")
    layer = h_op.layer
    spec = h_op.spec
    if eps < 0:
        raise ValidationError("eps must be non-negative")

    if d_can is None:
        candidates = list(range(len(d_test)))
    else:
        candidates = sorted(int(i) for i in d_can)
        if len(set(candidates)) != len(candidates):
            raise ValidationError("candidate indices contain duplicates")
        if candidates and (candidates[0] < 0 or candidates[-1] >= len(d_test)):
            raise IndexError(
                f"candidate index outside 0..{len(d_test) - 1}"
            )

    sigs = bin_signatures(net, d_test, layer, spec, h_op.neurons)
    n_bins = spec.n + 1
    test_counts = np.zeros((len(h_op.neurons), n_bins), dtype=np.int64)
    for k in range(len(h_op.neurons)):
        test_counts[k] = np.bincount(sigs[:, k], minlength=n_bins)

    by_sig: dict[tuple, list[int]] = {}
    for p in candidates:
        by_sig.setdefault(tuple(int(v) for v in sigs[p]), []).append(p)
    groups = tuple(
        SignatureGroup(sig, tuple(members)) for sig, members in sorted(by_sig.items())
    )
    return MilpInstance(
        groups=groups,
        op_ratios=h_op.ratios(),
        test_counts=test_counts,
        test_total=len(d_test),
        eps=float(eps),
        spec=spec,
        layer=layer,
        neurons=h_op.neurons,
        min_survivors=min_survivors,
    )


class _BranchAndBound:
    """Depth-first branch-and-bound over the grouped LP relaxation.

    Each node first tries to round-and-repair the LP point into an exact
    integer solution matching the node's objective bound, which resolves the
    subtree without a dive; branching is the fallback.  A shared node budget
    spans the main solve and any follow-up feasibility probes; all
    tie-breaks are deterministic.
    """

    def __init__(self, inst: MilpInstance, node_budget: int):
        self.inst = inst
        self.budget = node_budget
        self.nodes = 0
        self.lp_iterations = 0
        G = inst.n_groups
        A, b, self.rows = inst.constraint_rows(pad=_LP_PAD)
        # trailing row carries the per-node objective floor (sum x >= f)
        self.A = np.vstack([A, -np.ones((1, G))]) if G else np.vstack([A, np.zeros((1, 0))])
        self.b_base = np.append(b, 0.0)
        self.c = np.ones(G)
        self.caps = inst.capacities.astype(np.float64)
        self.sig = inst._signature_matrix()
        self.exhausted = False
        self.root_lp_x: np.ndarray | None = None

    # -- rounding heuristic ------------------------------------------------

    def _gap_matrix(self, x: np.ndarray):
        """Exact per-(neuron, bin) ratio gaps for integer x, or None when the
        survivor floor is violated."""
        inst = self.inst
        survivors = inst.test_total - int(x.sum())
        if survivors < inst.min_survivors:
            return None
        surv_counts = inst.test_counts - inst.removals_by_bin(x)
        if (surv_counts < 0).any():
            return None
        return inst.op_ratios - surv_counts / survivors

    def _violation(self, x: np.ndarray) -> float:
        gaps = self._gap_matrix(x)
        if gaps is None:
            return math.inf
        return float(np.maximum(np.abs(gaps) - self.inst.eps, 0.0).sum())

    def _heuristic(self, x_lp, lo, up, target: int):
        """Round the LP point to an integer vector with sum exactly `target`,
        then hill-repair with transfer moves until the exact gate passes.

        Returns the vector or None.  Transfers are chosen among groups that
        can relieve a violated row, so a sweep costs O(|violations| * G).
        """
        inst = self.inst
        G = inst.n_groups
        if G == 0:
            return None
        x = np.clip(np.round(x_lp), lo, up).astype(np.int64)
        drift = x - x_lp
        # walk the sum to the target along the least-damaging roundings
        for _ in range(int(abs(int(x.sum()) - target)) + 1):
            diff = int(x.sum()) - target
            if diff == 0:
                break
            if diff > 0:
                movable = np.where(x > lo)[0]
                if movable.size == 0:
                    return None
                g = movable[int(np.argmax(drift[movable]))]
                x[g] -= 1
                drift[g] -= 1.0
            else:
                movable = np.where(x < up)[0]
                if movable.size == 0:
                    return None
                g = movable[int(np.argmin(drift[movable]))]
                x[g] += 1
                drift[g] += 1.0
        if int(x.sum()) != target:
            return None

        lo_i = lo.astype(np.int64)
        up_i = up.astype(np.int64)
        score = self._violation(x)
        for _ in range(4 * G + 20):
            if score == 0.0:
                return x if inst.feasible_removal(x) else None
            gaps = self._gap_matrix(x)
            if gaps is None:
                return None
            need_more = gaps < -inst.eps  # survivors over-represented: remove more
            need_less = gaps > inst.eps  # over-removed: give back
            inc, dec = set(), set()
            for g in range(G):
                bins = self.sig[g]
                hits_more = need_more[np.arange(len(bins)), bins]
                if x[g] < up_i[g] and hits_more.any():
                    inc.add(g)
                hits_less = need_less[np.arange(len(bins)), bins]
                if x[g] > lo_i[g] and hits_less.any():
                    dec.add(g)
            free_dec = [g for g in range(G) if x[g] > lo_i[g]]
            free_inc = [g for g in range(G) if x[g] < up_i[g]]
            pairs = {(g, h) for g in inc for h in free_dec if g != h}
            pairs |= {(g, h) for g in free_inc for h in dec if g != h}
            best = None
            for g, h in sorted(pairs):
                x[g] += 1
                x[h] -= 1
                s = self._violation(x)
                x[g] -= 1
                x[h] += 1
                if s < score - 1e-15 and (best is None or s < best[0]):
                    best = (s, g, h)
            if best is None:
                return None
            score, g, h = best
            x[g] += 1
            x[h] -= 1
        return None

    # -- search ------------------------------------------------------------

    def search(
        self,
        lower: np.ndarray,
        stop_at: int | None = None,
        node_cap: int | None = None,
    ):
        """Returns (found: bool, x, value, proven: bool).

        stop_at: accept the first solution at this known-optimal value and
        pin the LP objective there.  node_cap bounds this call's nodes on
        top of the shared budget.  proven is False when either limit ran out
        before the space was exhausted.
        """
        inst = self.inst
        limit = self.budget if node_cap is None else min(self.budget, self.nodes + node_cap)
        best_x, best_val = None, math.inf
        base_floor = float(stop_at) if stop_at is not None else 0.0
        stack = [(lower.astype(np.float64), self.caps.copy(), base_floor)]
        proven = True
        while stack:
            if self.nodes >= limit:
                self.exhausted = self.nodes >= self.budget
                proven = False
                break
            lo, up, floor = stack.pop()
            self.nodes += 1
            b = self.b_base.copy()
            b[-1] = -floor
            res = solve_lp(self.c, self.A, b, lo, up)
            self.lp_iterations += res.iterations
            if self.root_lp_x is None:
                self.root_lp_x = res.x.copy()
            if res.status == INFEASIBLE:
                continue
            if res.status != OPTIMAL:
                proven = False  # iteration limit: treat conservatively
                continue
            bound = int(math.ceil(res.objective - 1e-6))
            if bound >= best_val:
                continue
            if stop_at is not None and bound > stop_at:
                continue
            frac = np.abs(res.x - np.round(res.x))
            if frac.size == 0 or frac.max() <= 1e-6:
                x_int = np.clip(np.round(res.x), lo, up).astype(np.int64)
                if inst.feasible_removal(x_int):
                    val = int(x_int.sum())
                    if val < best_val:
                        best_x, best_val = x_int, val
                        if stop_at is not None and best_val <= stop_at:
                            return True, best_x, best_val, True
                else:
                    # LP-feasible but fails the exact ratio gate (pad sliver):
                    # force the objective past this value and re-explore
                    stack.append((lo, up, float(int(round(res.x.sum())) + 1)))
                continue
            x_h = self._heuristic(res.x, lo, up, bound)
            if x_h is not None and inst.feasible_removal(x_h):
                # bound met exactly, so this subtree cannot do better
                if bound < best_val:
                    best_x, best_val = x_h, bound
                    if stop_at is not None and best_val <= stop_at:
                        return True, best_x, best_val, True
                continue
            g = int(np.argmax(frac))
            v = res.x[g]
            up_branch_lo = lo.copy()
            up_branch_lo[g] = math.ceil(v)
            down_branch_up = up.copy()
            down_branch_up[g] = math.floor(v)
            stack.append((up_branch_lo, up, floor))
            stack.append((lo, down_branch_up, floor))  # explored first
        return best_x is not None, best_x, best_val, proven


def _infeasibility_certificate(bb: _BranchAndBound) -> list:
    """Rows still violated at the LP phase-1 end point, for diagnostics."""
    if bb.root_lp_x is None:
        return []
    A, b, desc = bb.inst.constraint_rows(pad=0.0)
    resid = A @ bb.root_lp_x - b if bb.inst.n_groups else -b
    out = []
    for row, r in zip(desc, resid):
        if r > 1e-9:
            out.append({"row": list(row), "violation": float(r)})
    return out


_PROBE_NODE_CAP = 400


def _lexicographic_refine(
    bb: _BranchAndBound, x_star: np.ndarray, value: int
) -> tuple[np.ndarray, int]:
    """Among optimal plans, steer to the lexicographically smallest removed
    index multiset.  Returns (group counts, probes run).

    Scans candidate points in ascending index order, keeping a witness
    optimum; a feasibility probe runs only when the witness does not already
    cover the scanned point, and a group once proven unusable stays dead.
    Probes are node-capped: an undecided probe skips its point (the result
    stays a valid optimum, lex-minimality becomes best-effort), and global
    budget exhaustion falls back to the current witness.
    """
    inst = bb.inst
    lb = np.zeros(inst.n_groups, dtype=np.int64)
    witness = x_star.astype(np.int64).copy()
    dead = np.zeros(inst.n_groups, dtype=bool)
    probes = 0
    scan = sorted(
        (member, gi) for gi, g in enumerate(inst.groups) for member in g.members
    )
    for _point, gi in scan:
        if int(lb.sum()) >= value:
            break
        if dead[gi] or lb[gi] >= inst.groups[gi].capacity:
            continue
        if witness[gi] >= lb[gi] + 1:
            lb[gi] += 1
            continue
        trial = lb.copy()
        trial[gi] += 1
        probes += 1
        found, x2, v2, proven = bb.search(
            trial.astype(np.float64), stop_at=value, node_cap=_PROBE_NODE_CAP
        )
        if found and v2 == value:
            lb[gi] += 1
            witness = x2.astype(np.int64)
        elif proven:
            dead[gi] = True
        elif bb.exhausted:
            # global budget ran out mid-probe: realize the current witness
            return witness, probes
    if int(lb.sum()) == value:
        return lb, probes
    return witness, probes


def solve_exact(inst: MilpInstance, node_budget: int = 200_000) -> ReshapePlan:
    """Minimum-cardinality removal plan via branch-and-bound.

    Status is optimal when the search space was exhausted, infeasible when
    no removal subset achieves similarity, timeout when the node budget ran
    out (the best incumbent, if any, is reported).  Among optimal plans the
    lexicographically smallest removed index multiset is returned.
    """
    bb = _BranchAndBound(inst, node_budget)
    found, x, value, proven = bb.search(np.zeros(inst.n_groups))
    stats = {"nodes": bb.nodes, "lp_iterations": bb.lp_iterations, "probes": 0}
    if not found:
        if proven:
            stats["certificate"] = _infeasibility_certificate(bb)
            return ReshapePlan((), None, STATUS_INFEASIBLE, False, stats)
        return ReshapePlan((), None, STATUS_TIMEOUT, False, stats)
    if not proven:
        stats["nodes"] = bb.nodes
        return ReshapePlan(
            inst.realize(x), int(value), STATUS_TIMEOUT, True, stats
        )
    x_final, probes = _lexicographic_refine(bb, x, int(value))
    stats.update(nodes=bb.nodes, lp_iterations=bb.lp_iterations, probes=probes)
    assert inst.feasible_removal(x_final)
    return ReshapePlan(inst.realize(x_final), int(value), STATUS_OPTIMAL, True, stats)


def solve_greedy(inst: MilpInstance) -> ReshapePlan:
    """Single-neuron fast path: scan total removal counts upward.

    With one monitored neuron each candidate affects exactly one bin
    numerator, so for a fixed total S the per-bin feasible removal counts
    form independent integer ranges; the first S admitting an allocation
    within group capacities is optimal.
    """
    if len(inst.neurons) != 1:
        raise WrongMethodError(
            "greedy reshaping is only sound for a single monitored neuron"
        )
    n_bins = inst.spec.n + 1
    caps = np.zeros(n_bins, dtype=np.int64)
    group_of_bin = {}
    for gi, g in enumerate(inst.groups):
        caps[g.signature[0]] = g.capacity
        group_of_bin[g.signature[0]] = gi
    ct = inst.test_counts[0]
    ratios = inst.op_ratios[0]
    T = inst.test_total
    eps = inst.eps

    def gap_ok(j: int, y: int, survivors: int) -> bool:
        return abs(ratios[j] - (int(ct[j]) - y) / survivors) <= eps

    for removed in range(0, T - inst.min_survivors + 1):
        survivors = T - removed
        lo_sum, hi_sum = 0, 0
        lo = np.zeros(n_bins, dtype=np.int64)
        hi = np.zeros(n_bins, dtype=np.int64)
        feasible = True
        for j in range(n_bins):
            l = max(0, math.ceil(ct[j] - (ratios[j] + eps) * survivors - 1e-9))
            u = min(int(caps[j]), math.floor(ct[j] - (ratios[j] - eps) * survivors + 1e-9))
            while l <= u and not gap_ok(j, l, survivors):
                l += 1
            while u >= l and not gap_ok(j, u, survivors):
                u -= 1
            if l > u:
                feasible = False
                break
            lo[j], hi[j] = l, u
            lo_sum += l
            hi_sum += u
        if not feasible or not lo_sum <= removed <= hi_sum:
            continue
        alloc = lo.copy()
        spare = removed - lo_sum
        for j in range(n_bins):
            take = min(spare, int(hi[j] - lo[j]))
            alloc[j] += take
            spare -= take
        x = np.zeros(inst.n_groups, dtype=np.int64)
        for j, cnt in enumerate(alloc):
            if cnt:
                x[group_of_bin[j]] = cnt
        assert inst.feasible_removal(x)
        return ReshapePlan(
            inst.realize(x), removed, STATUS_OPTIMAL, True, {"scanned": removed + 1}
        )
    return ReshapePlan((), None, STATUS_INFEASIBLE, False, {"scanned": T - inst.min_survivors + 1})


def export_lp(inst: MilpInstance, path) -> None:
    """Write the linearized model in lp_solve's LP text format.

    Variables x_g<k> follow group order (signatures sorted ascending), with
    bound lines, integer declarations, and the survivor-count constraint.
    """
    A, b, desc = inst.constraint_rows(pad=0.0)
    names = [f"x_g{k}" for k in range(inst.n_groups)]

    def terms(coeffs) -> str:
        parts = []
        for name, coef in zip(names, coeffs):
            if coef == 0.0:
                continue
            sign = "-" if coef < 0 else ("+" if parts else "")
            mag = repr(abs(float(coef)))
            parts.append(f"{sign} {mag} {name}".strip())
        return " ".join(parts) if parts else "0"

    lines = [
        f"/* minimum-removal reshaping: {inst.n_groups} groups, "
        f"|D_test| = {inst.test_total}, eps = {inst.eps!r} */"
    ]
    lines.append("min: " + (" + ".join(names) if names else "0") + ";")
    lines.append("")
    for row, coeffs, rhs in zip(desc, A, b):
        if row[0] == "survivors":
            label = "survivors"
        else:
            label = f"n{row[0]}_b{row[1]}_{'up' if row[2] == 'upper' else 'lo'}"
        lines.append(f"{label}: {terms(coeffs)} <= {float(rhs)!r};")
    lines.append("")
    for name, cap in zip(names, inst.capacities):
        lines.append(f"0 <= {name} <= {int(cap)};")
    if names:
        lines.append("")
        lines.append("int " + ", ".join(names) + ";")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def apply_plan(d_test: Dataset, plan: ReshapePlan) -> Dataset:
    """Remove the planned points; survivors keep their order and labels."""
    removed = sorted(set(plan.removed))
    if len(removed) != len(plan.removed):
        raise ValidationError("plan removes the same index twice")
    if removed and (removed[0] < 0 or removed[-1] >= len(d_test)):
        raise IndexError(f"removed index outside 0..{len(d_test) - 1}")
    keep = np.ones(len(d_test), dtype=bool)
    keep[list(removed)] = False
    return Dataset(
        d_test.points[keep],
        None if d_test.labels is None else d_test.labels[keep],
    )


def save_plan(plan: ReshapePlan, path, similarity: dict | None = None) -> None:
    doc = plan.to_dict()
    if similarity is not None:
        doc["similarity"] = similarity
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path) -> ReshapePlan:
    with open(path, "r", encoding="utf-8") as fh:
        return ReshapePlan.from_dict(json.load(fh))
