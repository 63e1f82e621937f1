import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from safetree import features, formula as F, navenv, octree
from safetree.errors import DomainError, ParseError


def exact_two_box_tree():
    """Hand-built tree: root splits x into [0.1,0.7] and [0.7,0.9]; the left
    child tightens y to [0.1,0.3], the right child to [0.1,0.9]."""
    def leaf(lo, hi):
        return octree.TreeNode(
            box_lo=np.asarray(lo, float), box_hi=np.asarray(hi, float), sample_count=1
        )

    left = octree.TreeNode(
        box_lo=np.array([0.1, 0.1]),
        box_hi=np.array([0.7, 0.9]),
        sample_count=1,
        split_dim=1,
        children=[((0.1, 0.3), leaf([0.1, 0.1], [0.7, 0.3]))],
    )
    right = octree.TreeNode(
        box_lo=np.array([0.7, 0.1]),
        box_hi=np.array([0.9, 0.9]),
        sample_count=1,
        split_dim=1,
        children=[((0.1, 0.9), leaf([0.7, 0.1], [0.9, 0.9]))],
    )
    root = octree.TreeNode(
        box_lo=np.array([0.1, 0.1]),
        box_hi=np.array([0.9, 0.9]),
        sample_count=2,
        split_dim=0,
        children=[((0.1, 0.7), left), ((0.7, 0.9), right)],
    )
    bounds = features.FeatureBounds(lo=np.array([0.1, 0.1]), hi=np.array([0.9, 0.9]))
    tree = octree.Tree(root=root, dim=2, config=octree.TreeConfig(), bounds=bounds)
    tree.root.validate()
    return tree, bounds


def conj_key(conj):
    return frozenset((l.dim, l.op, l.threshold) for l in conj.literals)


EXPECTED_TWO_BOX_TEXT = (
    r"phi0 < 0.1 \/ phi0 > 0.9 \/ phi1 < 0.1 \/ phi1 > 0.9"
    r" \/ phi0 >= 0.1 /\ phi0 <= 0.7 /\ phi1 < 0.1"
    r" \/ phi0 >= 0.1 /\ phi0 <= 0.7 /\ phi1 > 0.3"
    r" \/ phi0 >= 0.7 /\ phi0 <= 0.9 /\ phi1 < 0.1"
    r" \/ phi0 >= 0.7 /\ phi0 <= 0.9 /\ phi1 > 0.9"
)


def test_extract_reproduces_worked_two_box_formula():
    tree, bounds = exact_two_box_tree()
    got = F.extract_formula(tree, bounds)
    want = F.parse_text(EXPECTED_TWO_BOX_TEXT, dim=2)
    assert {conj_key(c) for c in got.conjunctions} == {
        conj_key(c) for c in want.conjunctions
    }
    assert len(got) == 8


def test_single_leaf_tree_gives_only_bound_rules():
    bounds = features.FeatureBounds(lo=np.array([0.0, -1.0]), hi=np.array([1.0, 2.0]))
    root = octree.TreeNode(
        box_lo=bounds.lo.copy(), box_hi=bounds.hi.copy(), sample_count=10
    )
    tree = octree.Tree(root=root, dim=2, config=octree.TreeConfig(), bounds=bounds)
    f = F.extract_formula(tree, bounds)
    assert len(f) == 4
    assert all(c.complexity == 1 for c in f.conjunctions)


def test_formula_tree_equivalence_monte_carlo():
    rng = np.random.default_rng(21)
    trajs = navenv.generate_expert(60, noise=0.05, seed=2)
    ds = features.build_dataset(trajs, "identity_xy")
    bounds = features.feature_bounds(ds)
    tree = octree.build_tree(ds, octree.TreeConfig(max_depth=3))
    f = F.extract_formula(tree, bounds)
    probes = rng.uniform(-0.1, 1.1, size=(10000, 2))
    for p in probes:
        violated, _ = F.evaluate(f, p)
        safe = octree.contains(tree, p) and bounds.contains(p)
        assert violated == (not safe)


def test_evaluate_credits_simplest_conjunction():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    violated, credited = F.evaluate(f, np.array([0.4, 0.6]))
    assert violated
    credited_conj = f.conjunctions[credited]
    assert conj_key(credited_conj) == frozenset(
        [(0, ">=", 0.1), (0, "<=", 0.7), (1, ">", 0.3)]
    )
    violated, credited = F.evaluate(f, np.array([0.5, 0.2]))
    assert not violated and credited is None
    # a point violating both a bound rule and a 3-literal rule credits the
    # 1-literal rule
    violated, credited = F.evaluate(f, np.array([0.4, 0.95]))
    assert violated
    assert f.conjunctions[credited].complexity == 1


def test_evaluate_dimension_mismatch():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    with pytest.raises(DomainError):
        F.evaluate(f, np.array([0.1, 0.2, 0.3]))


def test_evaluate_stats_short_circuit_counting():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    F.evaluate(f, np.array([0.05, 0.5]), stats)  # violates the first bound rule
    credited = int(np.argmax(stats.violations))
    assert stats.violations.sum() == 1
    # everything after the credited conjunction was not evaluated
    assert np.all(stats.evaluations[credited + 1 :] == 0)
    assert np.all(stats.evaluations[: credited + 1] == 1)
    # a safe point evaluates every conjunction
    F.evaluate(f, np.array([0.5, 0.2]), stats)
    assert np.all(stats.evaluations[credited + 1 :] == 1)


def test_count_all_mode_checks_everything():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    violated, credited = F.evaluate(f, np.array([0.05, 0.5]), stats, count_all=True)
    assert violated
    assert np.all(stats.evaluations == 1)


def test_cost_values():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    assert F.cost(f, np.array([0.4, 0.6])) == 1
    assert F.cost(f, np.array([0.5, 0.2])) == 0


def test_cost_zero_on_every_training_point():
    trajs = navenv.generate_expert(40, noise=0.05, seed=5)
    ds = features.build_dataset(trajs, "identity_xy")
    bounds = features.feature_bounds(ds)
    tree = octree.build_tree(ds, octree.TreeConfig(max_depth=2))
    f = F.extract_formula(tree, bounds)
    assert all(F.cost(f, p) == 0 for p in ds.points)


def test_credited_conjunction_has_minimal_complexity():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    rng = np.random.default_rng(3)
    for p in rng.uniform(-0.2, 1.2, size=(2000, 2)):
        violated, credited = F.evaluate(f, p)
        if not violated:
            continue
        satisfied = [c.complexity for c in f.conjunctions if c.holds(p)]
        assert f.conjunctions[credited].complexity == min(satisfied)


# --- pruning -----------------------------------------------------------------

def test_prune_keeps_ratio_above_threshold():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    stats.evaluations[:] = 1000
    stats.violations[:] = 0
    keep = 4
    stats.violations[keep] = 10  # ratio 0.01
    pruned = F.prune(f, stats, 0.001)
    assert len(pruned) == 1
    assert conj_key(pruned.conjunctions[0]) == conj_key(f.conjunctions[keep])


def test_prune_all_zero_stats_empty_formula():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    stats.evaluations[:] = 50
    assert len(F.prune(f, stats, 0.001)) == 0


def test_prune_threshold_zero_keeps_evaluated():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    stats.evaluations[:] = 1
    pruned = F.prune(f, stats, 0.0)
    assert len(pruned) == len(f)


def test_prune_misaligned_stats_rejected():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    with pytest.raises(DomainError):
        F.prune(f, F.ConjunctionStats(len(f) + 1), 0.001)


def test_pruned_violation_set_is_subset():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    stats.evaluations[:] = 100
    stats.violations[::2] = 5
    pruned = F.prune(f, stats, 0.01)
    rng = np.random.default_rng(9)
    for p in rng.uniform(-0.2, 1.2, size=(3000, 2)):
        if F.evaluate(pruned, p)[0]:
            assert F.evaluate(f, p)[0]


def test_stats_merge_matches_sequential():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    rng = np.random.default_rng(17)
    points = rng.uniform(-0.2, 1.2, size=(400, 2))
    seq = F.ConjunctionStats(len(f))
    for p in points:
        F.evaluate(f, p, seq)
    a = F.ConjunctionStats(len(f))
    b = F.ConjunctionStats(len(f))
    for p in points[:200]:
        F.evaluate(f, p, a)
    for p in points[200:]:
        F.evaluate(f, p, b)
    merged = a.merge(b)
    assert np.array_equal(merged.evaluations, seq.evaluations)
    assert np.array_equal(merged.violations, seq.violations)


# --- text format ---------------------------------------------------------------

def test_render_empty_formula():
    assert F.render_text(F.DnfFormula(conjunctions=(), dim=2)) == "false"


def test_render_pruned_rule_style():
    conj = F.Conjunction(
        literals=(
            F.Literal(0, ">", 0.1),
            F.Literal(0, "<", 0.7),
            F.Literal(1, ">", 0.3),
        )
    )
    f = F.DnfFormula(conjunctions=(conj,), dim=2)
    assert F.render_text(f) == r"phi0 > 0.1 /\ phi0 < 0.7 /\ phi1 > 0.3"


def test_parse_false():
    f = F.parse_text("false", dim=2)
    assert len(f) == 0 and f.dim == 2


def test_parse_error_carries_position():
    with pytest.raises(ParseError, match="position"):
        F.parse_text("phi0 < ")
    with pytest.raises(ParseError, match="position"):
        F.parse_text("phi0 ! 0.3")


@st.composite
def formulas(draw):
    k = draw(st.integers(1, 4))
    n_conj = draw(st.integers(1, 5))
    conjs = []
    for _ in range(n_conj):
        n_lit = draw(st.integers(1, 4))
        lits = []
        used = set()
        for _ in range(n_lit):
            dim = draw(st.integers(0, k - 1))
            op = draw(st.sampled_from(F.OPS))
            if (dim, op) in used:
                continue
            used.add((dim, op))
            lits.append(
                F.Literal(
                    dim,
                    op,
                    draw(
                        st.floats(
                            -1e9, 1e9, allow_nan=False, allow_infinity=False
                        )
                    ),
                )
            )
        if lits:
            conjs.append(F.Conjunction(literals=tuple(lits)))
    if not conjs:
        conjs.append(F.Conjunction(literals=(F.Literal(0, "<", 0.5),)))
    return F.DnfFormula(conjunctions=tuple(conjs), dim=k)


@given(formulas())
@settings(max_examples=1000, deadline=None)
def test_render_parse_round_trip(f):
    back = F.parse_text(F.render_text(f), dim=f.dim)
    assert back.dim == f.dim
    assert len(back) == len(f)
    for a, b in zip(f.conjunctions, back.conjunctions):
        assert a == b


def test_formula_json_round_trip():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    back = F.formula_from_json(F.formula_to_json(f))
    assert back == f


def test_stats_csv_round_trip():
    tree, bounds = exact_two_box_tree()
    f = F.extract_formula(tree, bounds)
    stats = F.ConjunctionStats(len(f))
    stats.evaluations[:] = np.arange(len(f)) + 5
    stats.violations[:] = np.arange(len(f))
    text = F.stats_to_csv(f, stats)
    assert text.splitlines()[0] == "conjunction_id,complexity,evaluations,violations,ratio"
    back = F.stats_from_csv(text, f)
    assert np.array_equal(back.evaluations, stats.evaluations)
    assert np.array_equal(back.violations, stats.violations)


def test_literal_subsumption_keeps_tightest():
    conj = F._normalize(
        [
            F.Literal(0, ">=", 0.1),
            F.Literal(0, "<=", 0.9),
            F.Literal(0, "<", 0.7),
        ]
    )
    assert conj_key(conj) == frozenset([(0, ">=", 0.1), (0, "<", 0.7)])
