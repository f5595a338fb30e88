import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublex import (AdaptedProcess, Event, NotAdaptedError, RandomVariable,
                    SizeGuardError, StoppingTime, TreeSpace,
                    build_product_space, event_from_predicate,
                    is_stopping_time)


def test_product_space_shapes():
    s = build_product_space(1, 2, [1.0, 0.0])
    assert s.n_leaves == 2 and s.depth == 1

    s = build_product_space(2, 3, [-1.0, 0.0, 1.0])
    assert s.n_leaves == 9
    assert s.n_atoms(1) == 3
    # edge value at step i is exactly the outcome of the branch taken
    x1 = s.step_outcomes(1)
    assert list(x1[:3]) == [-1.0, -1.0, -1.0]
    assert list(np.unique(x1)) == [-1.0, 0.0, 1.0]


def test_depth_zero_space_is_a_point():
    s = build_product_space(0, 2, [1.0, 0.0])
    assert s.n_leaves == 1
    c = RandomVariable.constant(s, 3.5)
    assert c.values[0] == 3.5


def test_size_guard():
    with pytest.raises(SizeGuardError):
        build_product_space(30, 3, [0.0, 1.0, 2.0])


def test_atom_partition_property():
    s = build_product_space(3, 2, [1.0, 0.0])
    for t in range(s.depth + 1):
        spans = [s.leaf_span(v) for v in range(*s.atoms(t))]
        assert spans[0][0] == 0 and spans[-1][1] == s.n_leaves
        for (a, b), (c, d) in zip(spans, spans[1:]):
            assert b == c  # contiguous, disjoint, covering


def test_event_levels_binary_walk():
    s = build_product_space(2, 2, [1.0, 0.0])
    first_heads = event_from_predicate(s, lambda i, path: path[0] == 1.0)
    assert first_heads.level == 1

    two_heads = event_from_predicate(s, lambda i, path: sum(path) == 2.0)
    assert two_heads.level == 2 and two_heads.size == 1

    omega = event_from_predicate(s, lambda i, path: True)
    assert omega.level == 0


def test_complement_preserves_level(rng):
    s = build_product_space(3, 2, [1.0, 0.0])
    for _ in range(25):
        ev = Event(s, rng.random(s.n_leaves) < 0.5)
        assert ev.complement().level == ev.level


def test_event_algebra():
    s = build_product_space(2, 2, [1.0, 0.0])
    a = event_from_predicate(s, lambda i, path: path[0] == 1.0)
    b = event_from_predicate(s, lambda i, path: path[1] == 1.0)
    assert (a | b).size == 3
    assert (a & b).size == 1
    assert a.symmetric_difference(b).size == 2


def test_project_rejects_non_adapted():
    s = build_product_space(2, 2, [1.0, 0.0])
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(NotAdaptedError):
        s.project(1, vals)
    assert list(s.project(1, np.array([1.0, 1.0, 2.0, 2.0]))) == [1.0, 2.0]


def test_lift_project_round_trip():
    s = build_product_space(3, 3, [0.0, 1.0, 2.0])
    for t in range(s.depth + 1):
        atom_vals = np.arange(s.n_atoms(t), dtype=float)
        assert np.array_equal(s.project(t, s.lift(t, atom_vals)), atom_vals)


def test_constant_stopping_time():
    s = build_product_space(2, 2, [1.0, 0.0])
    ok, st_ = is_stopping_time(s, [1, 1, 1, 1])
    assert ok and st_.nodes == (1, 2)


def test_hitting_time_is_a_stopping_time():
    s = build_product_space(3, 2, [1.0, -1.0])
    rows = [np.zeros(s.n_leaves)]
    walk = np.zeros(s.n_leaves)
    for i in range(1, 4):
        walk = walk + s.step_outcomes(i)
        rows.append(walk.copy())
    proc = AdaptedProcess.from_leaf_rows(s, rows, start=0)
    hit = StoppingTime.first_hitting(proc, 2.0, op=">=")
    ok, _ = is_stopping_time(s, hit.leaf_depths())
    assert ok
    # two up-steps stop at time 2, everything else runs to the cap
    depths = hit.leaf_depths()
    upup = (s.step_outcomes(1) == 1.0) & (s.step_outcomes(2) == 1.0)
    assert np.all(depths[upup] == 2)
    assert np.all(depths[~upup] == 3)


def test_anticipating_rule_is_rejected():
    # tau = 0 iff the LAST step is heads: not measurable at time 0
    s = build_product_space(2, 2, [1.0, 0.0])
    tau = np.where(s.step_outcomes(2) == 1.0, 0, 2)
    ok, st_ = is_stopping_time(s, tau)
    assert not ok and st_ is None


def test_stopping_depth_range_validated():
    s = build_product_space(2, 2, [1.0, 0.0])
    with pytest.raises(ValueError):
        is_stopping_time(s, [0, 1, 2, 3])


@given(st.integers(0, 400))
@settings(max_examples=40, deadline=None)
def test_antichain_round_trip(seed):
    rng = np.random.default_rng(seed)
    s = build_product_space(3, 2, [1.0, 0.0])
    from sublex.generate import random_stopping_time
    st_ = random_stopping_time(rng, s)
    again = StoppingTime.from_leaf_depths(s, st_.leaf_depths())
    assert again.nodes == st_.nodes


def test_adapted_process_at_stopping():
    s = build_product_space(2, 2, [1.0, 0.0])
    proc = AdaptedProcess(s, 0, [[0.0], [10.0, 20.0], [1.0, 2.0, 3.0, 4.0]])
    t1 = StoppingTime.constant(s, 1)
    assert list(proc.at_stopping(t1).values) == [10.0, 10.0, 20.0, 20.0]
    mixed = StoppingTime(s, [1, 5, 6])  # stop early under heads, late under tails
    assert list(proc.at_stopping(mixed).values) == [10.0, 10.0, 3.0, 4.0]


def test_nonuniform_tree_layout():
    # root with two children, first child has 3 children, second has 1
    counts = [2, 3, 1, 0, 0, 0, 0]
    s = TreeSpace(counts)
    assert s.depth == 2 and s.n_leaves == 4
    assert s.leaf_span(1) == (0, 3) and s.leaf_span(2) == (3, 4)
    with pytest.raises(ValueError):
        TreeSpace([2, 1, 0, 0])  # leaves at different depths
