"""MILP encoding, exact and greedy reshaping solvers, LP export, plan apply."""

import itertools
import json

import numpy as np
import pytest

from actreshape import (
    ActivationHistogram,
    BinningSpec,
    Dataset,
    EmptyDatasetError,
    IncompatibleHistogramError,
    Layer,
    MilpInstance,
    Network,
    ValidationError,
    WrongMethodError,
    apply_plan,
    build_histogram,
    encode,
    epsilon_portion_similar,
    export_lp,
    solve_exact,
    solve_greedy,
)
from actreshape.reshape import SignatureGroup, load_plan, save_plan

from helpers import brute_force_reshape, parse_lp_file, random_problem, random_single_neuron_problem


def two_bin_net():
    """One pass-through neuron over [0, 2] with bins [0,1] and (1,2]."""
    net = Network((Layer(np.eye(1), np.zeros(1), "identity"),), 1, (0.0, 2.0))
    return net, BinningSpec(0.0, 1.0, 1)


def hist_from_counts(counts, spec, layer=1, neurons=None):
    counts = np.asarray(counts, dtype=np.int64)
    neurons = neurons or tuple(range(1, counts.shape[0] + 1))
    return ActivationHistogram(counts, int(counts[0].sum()), spec, layer, neurons)


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def test_encode_groups_by_signature(signature_table):
    net, data, spec = signature_table
    h_op = build_histogram(net, data, 1, spec)  # any compatible histogram works
    inst = encode(h_op, net, data, None, 1, spec, eps=0.1)
    assert [g.signature for g in inst.groups] == [(0, 3, 4), (1, 4, 4), (2, 1, 2)]
    assert [g.members for g in inst.groups] == [(2,), (0,), (1,)]
    assert inst.test_total == 3
    assert inst.capacities.sum() == 3


def test_encode_aggregates_identical_signatures(identity_net):
    spec = BinningSpec(0.0, 1.0, 4)
    data = Dataset(np.array([[0.5, 2.5, 4.5], [0.5, 2.7, 4.5], [3.5, 0.5, 1.5]]))
    h_op = build_histogram(identity_net, data, 1, spec)
    inst = encode(h_op, identity_net, data, None, 1, spec, eps=0.1)
    # points 0 and 1 share bins (0, 2, 4)
    assert len(inst.groups) == 2
    cap_by_sig = {g.signature: g.capacity for g in inst.groups}
    assert cap_by_sig[(0, 2, 4)] == 2


def test_encode_constraint_touches_only_matching_groups(signature_table):
    """The (neuron 3, bin 4) rows involve exactly the groups whose third
    signature entry is 4, through a +1 on the shared denominator column."""
    net, data, spec = signature_table
    h_op = build_histogram(net, data, 1, spec)
    inst = encode(h_op, net, data, None, 1, spec, eps=0.1)
    A, b, desc = inst.constraint_rows()
    row = desc.index((3, 4, "upper"))
    coeffs = A[row]
    names = [g.signature for g in inst.groups]
    in_numerator = [sig[2] == 4 for sig in names]
    assert in_numerator == [True, True, False]
    base = coeffs[2]  # the group outside the numerator carries -r + eps only
    for g, member in enumerate(in_numerator):
        assert coeffs[g] == pytest.approx(base + (1.0 if member else 0.0))


def test_encode_empty_candidate_set(identity_net):
    spec = BinningSpec(0.0, 1.0, 4)
    data = Dataset(np.array([[0.5, 2.5, 4.5], [1.5, 2.5, 3.5]]))
    h_op = build_histogram(identity_net, data, 1, spec)
    inst = encode(h_op, identity_net, data, [], 1, spec, eps=0.01)
    assert inst.n_groups == 0
    plan = solve_exact(inst)
    assert plan.status == "optimal" and plan.removed_count == 0

    shifted = Dataset(np.array([[0.5, 0.5, 0.5]] * 3))
    h_far = build_histogram(identity_net, shifted, 1, spec)
    inst2 = encode(h_far, identity_net, data, [], 1, spec, eps=0.01)
    plan2 = solve_exact(inst2)
    assert plan2.status == "infeasible"
    assert plan2.stats["certificate"]


def test_encode_validation_errors(identity_net):
    spec = BinningSpec(0.0, 1.0, 4)
    data = Dataset(np.array([[0.5, 2.5, 4.5], [1.5, 2.5, 3.5]]))
    h_op = build_histogram(identity_net, data, 1, spec)
    with pytest.raises(IndexError):
        encode(h_op, identity_net, data, [0, 2], 1, spec, eps=0.1)
    with pytest.raises(ValidationError):
        encode(h_op, identity_net, data, [0, 0], 1, spec, eps=0.1)
    with pytest.raises(EmptyDatasetError):
        encode(h_op, identity_net, Dataset(np.zeros((0, 3))), None, 1, spec, eps=0.1)
    with pytest.raises(IncompatibleHistogramError):
        encode(h_op, identity_net, data, None, 2, spec, eps=0.1)
    with pytest.raises(IncompatibleHistogramError):
        encode(h_op, identity_net, data, None, 1, BinningSpec(0.0, 1.0, 3), eps=0.1)
    with pytest.raises(ValidationError):
        encode(h_op, identity_net, data, None, 1, spec, eps=-0.5)


def test_instance_invariants():
    spec = BinningSpec(0.0, 1.0, 1)
    with pytest.raises(ValidationError):
        MilpInstance(
            groups=(SignatureGroup((0,), (0,)), SignatureGroup((0,), (1,))),
            op_ratios=np.array([[0.5, 0.5]]),
            test_counts=np.array([[1, 1]]),
            test_total=2,
            eps=0.1,
            spec=spec,
            layer=1,
            neurons=(1,),
        )
    with pytest.raises(ValidationError):
        MilpInstance(
            groups=(),
            op_ratios=np.array([[0.5, 0.5]]),
            test_counts=np.array([[9, 1]]),
            test_total=2,
            eps=0.1,
            spec=spec,
            layer=1,
            neurons=(1,),
        )


def test_encoding_soundness_small_enumeration():
    """For every assignment within group bounds, the linearized rows hold
    exactly when the survivor multiset passes the ratio check (assignments
    within 1e-9 of the tolerance boundary are skipped: there the two float
    evaluations may legitimately differ in the last ulp)."""
    rng = np.random.default_rng(5)
    for trial in range(25):
        k_n = int(rng.integers(1, 3))
        n_bins = int(rng.integers(2, 4))
        n_groups = min(int(rng.integers(1, 4)), n_bins**k_n)
        sigs = set()
        while len(sigs) < n_groups:
            sigs.add(tuple(int(v) for v in rng.integers(0, n_bins, k_n)))
        sigs = sorted(sigs)
        caps = [int(rng.integers(1, 5)) for _ in sigs]
        extra = int(rng.integers(0, 6))
        total = sum(caps) + extra
        counts = np.zeros((k_n, n_bins), dtype=np.int64)
        for sig, cap in zip(sigs, caps):
            for k in range(k_n):
                counts[k, sig[k]] += cap
        for _ in range(extra):
            j = rng.integers(0, n_bins, k_n)
            for k in range(k_n):
                counts[k, j[k]] += 1
        op = rng.integers(1, 10, (k_n, n_bins)).astype(np.float64)
        op_ratios = op / op.sum(axis=1, keepdims=True)
        eps = float(rng.choice([0.1, 0.2, 0.3]))
        members, nxt = [], 0
        for cap in caps:
            members.append(tuple(range(nxt, nxt + cap)))
            nxt += cap
        inst = MilpInstance(
            groups=tuple(SignatureGroup(s, m) for s, m in zip(sigs, members)),
            op_ratios=op_ratios,
            test_counts=counts,
            test_total=total,
            eps=eps,
            spec=BinningSpec(0.0, 1.0, n_bins - 1),
            layer=1,
            neurons=tuple(range(1, k_n + 1)),
        )
        A, b, _ = inst.constraint_rows()
        for assignment in itertools.product(*(range(c + 1) for c in caps)):
            x = np.array(assignment, dtype=np.float64)
            survivors = total - int(x.sum())
            if survivors < 1:
                continue
            surv_counts = counts - inst.removals_by_bin(x.astype(np.int64))
            gaps = np.abs(op_ratios - surv_counts / survivors)
            if np.any(np.abs(gaps - eps) < 1e-9):
                continue  # boundary: float row/gate evaluations may split
            rows_hold = bool((A @ x <= b + 1e-12).all())
            gate_holds = inst.feasible_removal(x.astype(np.int64))
            assert rows_hold == gate_holds


# ---------------------------------------------------------------------------
# exact solver vs. brute force
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(40))
def test_exact_matches_brute_force(seed):
    h_op, net, d_test, cand, layer, spec, eps = random_problem(seed)
    inst = encode(h_op, net, d_test, cand, layer, spec, eps)
    plan = solve_exact(inst)
    best, best_removed = brute_force_reshape(h_op, net, d_test, cand, layer, spec, eps)
    if best is None:
        assert plan.status == "infeasible"
        assert plan.removed_count is None and plan.removed == ()
    else:
        assert plan.status == "optimal"
        assert plan.removed_count == best
        assert plan.verified
        assert set(plan.removed).issubset(set(cand))
        assert plan.removed == best_removed  # lexicographically smallest optimum


def test_exact_is_deterministic():
    h_op, net, d_test, cand, layer, spec, eps = random_problem(11)
    inst = encode(h_op, net, d_test, cand, layer, spec, eps)
    a = solve_exact(inst)
    b = solve_exact(inst)
    assert a.removed == b.removed and a.removed_count == b.removed_count


def test_exact_monotone_in_candidate_set():
    """Enlarging the candidate set never worsens the optimum."""
    for seed in range(8):
        h_op, net, d_test, _, layer, spec, eps = random_problem(seed + 100)
        all_idx = list(range(len(d_test)))
        small = all_idx[: len(all_idx) // 2]
        plan_small = solve_exact(encode(h_op, net, d_test, small, layer, spec, eps))
        plan_all = solve_exact(encode(h_op, net, d_test, all_idx, layer, spec, eps))
        if plan_small.status == "optimal":
            assert plan_all.status == "optimal"
            assert plan_all.removed_count <= plan_small.removed_count


def test_exact_never_removes_everything():
    """The survivor-count constraint keeps at least one point."""
    net, spec = two_bin_net()
    d_test = Dataset(np.full((4, 1), 1.5))  # all of the test set in bin 1
    h_op = hist_from_counts([[10, 0]], spec)  # operation entirely in bin 0
    inst = encode(h_op, net, d_test, None, 1, spec, eps=0.01)
    plan = solve_exact(inst)
    assert plan.status == "infeasible"


def test_exact_respects_min_survivors():
    net, spec = two_bin_net()
    d_test = Dataset(np.array([[0.5], [0.5], [0.5], [1.5]]))
    h_op = hist_from_counts([[10, 0]], spec)
    # feasible only by removing the bin-1 point, leaving 3 survivors
    plan = solve_exact(encode(h_op, net, d_test, None, 1, spec, 0.01, min_survivors=3))
    assert plan.status == "optimal" and plan.removed == (3,)
    plan4 = solve_exact(encode(h_op, net, d_test, None, 1, spec, 0.01, min_survivors=4))
    assert plan4.status == "infeasible"


def test_zero_node_budget_reports_timeout():
    h_op, net, d_test, cand, layer, spec, eps = random_problem(3)
    inst = encode(h_op, net, d_test, cand, layer, spec, eps)
    plan = solve_exact(inst, node_budget=0)
    assert plan.status == "timeout"
    assert plan.removed_count is None and not plan.verified


def test_multi_neuron_coupling_fixture():
    """Removing by one neuron's histogram alone breaks the other; the exact
    solver finds the two points whose signatures fix both at once."""
    net = Network((Layer(np.eye(2), np.zeros(2), "identity"),), 2, (0.0, 2.0))
    spec = BinningSpec(0.0, 1.0, 1)
    pts = [[0.5, 0.5]] * 4 + [[1.5, 1.5]] * 4 + [[0.5, 1.5]] * 2
    d_test = Dataset(np.array(pts))
    op_pts = [[0.5, 0.5]] * 5 + [[1.5, 1.5]] * 5
    h_op = build_histogram(net, Dataset(np.array(op_pts)), 1, spec)
    eps = 0.05

    plan = solve_exact(encode(h_op, net, d_test, None, 1, spec, eps))
    assert plan.status == "optimal"
    assert plan.removed == (8, 9)

    # Greedy over neuron 1 alone reaches its own target but wrecks neuron 2.
    h_op_n1 = build_histogram(net, Dataset(np.array(op_pts)), 1, spec, neurons=(1,))
    greedy_plan = solve_greedy(encode(h_op_n1, net, d_test, None, 1, spec, eps))
    assert greedy_plan.status == "optimal"
    assert greedy_plan.removed_count == 2
    mangled = apply_plan(d_test, greedy_plan)
    recheck = epsilon_portion_similar(h_op, build_histogram(net, mangled, 1, spec), eps)
    assert not recheck.satisfied


# ---------------------------------------------------------------------------
# greedy solver
# ---------------------------------------------------------------------------


def test_greedy_hand_example():
    """Op ratios (0.5, 0.5) against test counts (6, 4): S=0 and S=1 fail,
    S=2 removes two bin-0 points leaving survivors (4, 4)."""
    net, spec = two_bin_net()
    d_test = Dataset(np.array([[0.5]] * 6 + [[1.5]] * 4))
    h_op = hist_from_counts([[5, 5]], spec)
    inst = encode(h_op, net, d_test, None, 1, spec, eps=0.01)
    plan = solve_greedy(inst)
    assert plan.status == "optimal"
    assert plan.removed_count == 2
    assert plan.removed == (0, 1)
    survivors = apply_plan(d_test, plan)
    h_after = build_histogram(net, survivors, 1, spec)
    assert h_after.counts.tolist() == [[4, 4]]


def test_greedy_already_similar_removes_nothing():
    net, spec = two_bin_net()
    d_test = Dataset(np.array([[0.5]] * 5 + [[1.5]] * 5))
    h_op = hist_from_counts([[5, 5]], spec)
    plan = solve_greedy(encode(h_op, net, d_test, None, 1, spec, eps=0.01))
    assert plan.status == "optimal" and plan.removed_count == 0


def test_greedy_rejects_multi_neuron(signature_table):
    net, data, spec = signature_table
    h_op = build_histogram(net, data, 1, spec)
    inst = encode(h_op, net, data, None, 1, spec, eps=0.1)
    with pytest.raises(WrongMethodError):
        solve_greedy(inst)


def test_greedy_infeasible_case():
    net, spec = two_bin_net()
    d_test = Dataset(np.full((3, 1), 1.5))
    h_op = hist_from_counts([[10, 0]], spec)
    plan = solve_greedy(encode(h_op, net, d_test, None, 1, spec, eps=0.01))
    assert plan.status == "infeasible"


@pytest.mark.parametrize("seed", range(40))
def test_greedy_agrees_with_exact_on_single_neuron(seed):
    h_op, net, d_test, layer, spec, eps = random_single_neuron_problem(seed)
    inst = encode(h_op, net, d_test, None, layer, spec, eps)
    greedy = solve_greedy(inst)
    exact = solve_exact(inst)
    assert greedy.status == exact.status
    if greedy.status == "optimal":
        assert greedy.removed_count == exact.removed_count
        assert greedy.verified and exact.verified


def test_greedy_respects_restricted_candidates():
    net, spec = two_bin_net()
    d_test = Dataset(np.array([[0.5]] * 6 + [[1.5]] * 4))
    h_op = hist_from_counts([[5, 5]], spec)
    # only one bin-0 point is removable: twO removals are needed, infeasible
    plan = solve_greedy(encode(h_op, net, d_test, [0, 6], 1, spec, eps=0.01))
    assert plan.status == "infeasible"
    plan2 = solve_greedy(encode(h_op, net, d_test, [0, 1, 6], 1, spec, eps=0.01))
    assert plan2.status == "optimal" and plan2.removed == (0, 1)


# ---------------------------------------------------------------------------
# LP export
# ---------------------------------------------------------------------------


def test_export_lp_zero_variables(tmp_path, identity_net):
    spec = BinningSpec(0.0, 1.0, 4)
    data = Dataset(np.array([[0.5, 2.5, 4.5]]))
    h_op = build_histogram(identity_net, data, 1, spec)
    inst = encode(h_op, identity_net, data, [], 1, spec, eps=0.1)
    path = tmp_path / "zero.lp"
    export_lp(inst, path)
    text = path.read_text()
    assert "min: 0;" in text
    assert "int" not in text
    names, objective, rows, rhs, lower, upper, integers, labels = parse_lp_file(path)
    assert names == [] and len(rows) == 2 * 3 * 5 + 1


def test_export_lp_structure_matches_signature_membership(tmp_path, signature_table):
    net, data, spec = signature_table
    h_op = build_histogram(net, data, 1, spec)
    inst = encode(h_op, net, data, None, 1, spec, eps=0.1)
    path = tmp_path / "table.lp"
    export_lp(inst, path)
    names, objective, rows, rhs, lower, upper, integers, labels = parse_lp_file(path)
    assert names == ["x_g0", "x_g1", "x_g2"]
    assert integers == names
    assert np.array_equal(objective, [1.0, 1.0, 1.0])
    assert np.array_equal(upper, [1.0, 1.0, 1.0])
    row = labels.index("n3_b4_up")
    coeffs = rows[row]
    # groups are signature-sorted: x_g0=(0,3,4), x_g1=(1,4,4), x_g2=(2,1,2)
    assert coeffs[0] == pytest.approx(coeffs[2] + 1.0)
    assert coeffs[1] == pytest.approx(coeffs[2] + 1.0)
    survivors_row = labels.index("survivors")
    assert np.array_equal(rows[survivors_row], [1.0, 1.0, 1.0])
    assert rhs[survivors_row] == pytest.approx(2.0)


@pytest.mark.parametrize("seed", [0, 2, 4, 7, 9, 12, 15, 21, 30, 33])
def test_export_lp_round_trips_through_external_solver(tmp_path, seed):
    """scipy's MILP on the exported file reproduces the solver's objective."""
    milp = pytest.importorskip("scipy.optimize")
    h_op, net, d_test, cand, layer, spec, eps = random_problem(seed)
    inst = encode(h_op, net, d_test, cand, layer, spec, eps)
    plan = solve_exact(inst)
    path = tmp_path / f"round_{seed}.lp"
    export_lp(inst, path)
    names, objective, rows, rhs, lower, upper, integers, _ = parse_lp_file(path)
    if not names:
        return
    res = milp.milp(
        c=objective,
        constraints=milp.LinearConstraint(rows, -np.inf, rhs),
        bounds=milp.Bounds(lower, upper),
        integrality=np.ones(len(names)),
    )
    if plan.status == "infeasible":
        assert res.status != 0 or res.x is None
    else:
        assert res.status == 0
        assert round(res.fun) == plan.removed_count


# ---------------------------------------------------------------------------
# plan application and serialization
# ---------------------------------------------------------------------------


def test_apply_plan_basics():
    data = Dataset(np.arange(10.0).reshape(5, 2), np.array([0, 1, 2, 3, 4]))
    from actreshape import ReshapePlan

    empty = ReshapePlan((), 0, "optimal", True)
    out = apply_plan(data, empty)
    assert np.array_equal(out.points, data.points)

    plan = ReshapePlan((0, 3), 2, "optimal", True)
    out = apply_plan(data, plan)
    assert np.array_equal(out.points, data.points[[1, 2, 4]])
    assert np.array_equal(out.labels, [1, 2, 4])

    with pytest.raises(IndexError):
        apply_plan(data, ReshapePlan((7,), 1, "optimal", True))
    with pytest.raises(ValidationError):
        apply_plan(data, ReshapePlan((1, 1), 2, "optimal", True))


def test_optimal_plan_passes_posthoc_recheck():
    """Histogram of the reshaped set is similar whenever status is optimal."""
    for seed in (1, 6, 13, 27):
        h_op, net, d_test, cand, layer, spec, eps = random_problem(seed)
        plan = solve_exact(encode(h_op, net, d_test, cand, layer, spec, eps))
        if plan.status != "optimal":
            continue
        reshaped = apply_plan(d_test, plan)
        h_after = build_histogram(net, reshaped, layer, spec, h_op.neurons)
        assert epsilon_portion_similar(h_op, h_after, eps).satisfied


def test_plan_file_round_trip(tmp_path):
    from actreshape import ReshapePlan

    plan = ReshapePlan((1, 4, 6, 9), 4, "optimal", True, {"nodes": 17})
    path = tmp_path / "plan.json"
    save_plan(plan, path, similarity={"satisfied": True})
    back = load_plan(path)
    assert back == ReshapePlan((1, 4, 6, 9), 4, "optimal", True, {"nodes": 17})
    doc = json.loads(path.read_text())
    assert doc["similarity"] == {"satisfied": True}
