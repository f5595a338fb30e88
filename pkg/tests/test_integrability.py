import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sublex import (CredalKernel, CredalModel, DominationError,
                    RandomVariable, build_product_space,
                    dominated_convergence_check, lb_tail_test, seminorm,
                    ui_check, upper_expectation)
from sublex.generate import random_model, random_variable


def deep_binary(depth=6, p=(0.3, 0.6)):
    space = build_product_space(depth, 2, [1.0, 0.0])
    model = CredalModel(space, CredalKernel.uniform(
        space, [[p[0], 1 - p[0]], [p[1], 1 - p[1]]]))
    return model


def leading_heads_indicator(model, k):
    """k * indicator(first k steps are heads)."""
    space = model.space
    mask = np.ones(space.n_leaves, dtype=bool)
    for i in range(1, k + 1):
        mask &= space.step_outcomes(i) == 1.0
    return RandomVariable(space, k * mask.astype(float))


def test_seminorm_values(m1):
    model, x = m1
    assert seminorm(model, x, 1) == pytest.approx(0.6, abs=1e-12)
    assert seminorm(model, x, 2) == pytest.approx(math.sqrt(0.6), abs=1e-12)


def test_seminorm_of_constants(m1):
    model, _ = m1
    c = RandomVariable.constant(model.space, -3.0)
    for p in (1, 2, 7.5, math.inf):
        assert seminorm(model, c, p) == pytest.approx(3.0, abs=1e-9)


def test_sup_norm_ignores_null_leaves():
    space = build_product_space(1, 2, [1.0, 0.0])
    model = CredalModel(space, CredalKernel.uniform(space, [[1.0, 0.0]]))
    x = RandomVariable(space, [5.0, 99.0])
    assert seminorm(model, x, math.inf) == 5.0


def test_seminorm_rejects_small_p(m1):
    model, x = m1
    with pytest.raises(ValueError):
        seminorm(model, x, 0.5)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_seminorm_properties(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, max_depth=3, max_strategies=150)
    x = random_variable(rng, model.space)
    y = random_variable(rng, model.space)
    a = float(rng.uniform(-3, 3))
    for p in (1, 2, math.inf):
        nx = seminorm(model, x, p)
        assert seminorm(model, x * a, p) == pytest.approx(abs(a) * nx, rel=1e-9,
                                                          abs=1e-9)
        assert seminorm(model, x + y, p) <= nx + seminorm(model, y, p) + 1e-9
    assert seminorm(model, x, 1) <= seminorm(model, x, 2) + 1e-9
    assert seminorm(model, x, 2) <= seminorm(model, x, math.inf) + 1e-9


def test_tail_profile_simple(m1):
    model, x = m1
    prof = lb_tail_test(model, x, 1)
    assert prof.values[0] == pytest.approx(0.6, abs=1e-12)
    assert all(v == 0.0 for v in prof.values[1:])
    assert prof.member


def test_tail_profile_zero_variable(m1):
    model, _ = m1
    prof = lb_tail_test(model, RandomVariable.constant(model.space, 0.0), 1)
    assert set(prof.values) == {0.0}


def test_tail_profile_scaled_family_closed_form():
    model = deep_binary(6)
    for m in (2, 4, 6):
        x = leading_heads_indicator(model, m)
        prof = lb_tail_test(model, x, 1)
        for n, v in zip(prof.thresholds, prof.values):
            expected = m * 0.6 ** m if n < m else 0.0
            assert v == pytest.approx(expected, abs=1e-12)


def test_profile_nonincreasing(rng):
    for _ in range(10):
        model = random_model(rng, max_strategies=100)
        prof = lb_tail_test(model, random_variable(rng, model.space),
                            p=float(rng.uniform(1, 3)))
        assert all(b <= a + 1e-12 for a, b in zip(prof.values, prof.values[1:]))


def test_ui_singleton_family(m1):
    model, x = m1
    rep = ui_check(model, [x])
    assert rep.uniformly_integrable
    assert rep.bound == pytest.approx(0.6, abs=1e-12)
    assert rep.certificates_pass


def test_ui_scaled_indicator_family_curve():
    model = deep_binary(6)
    family = [leading_heads_indicator(model, k) for k in range(1, 7)]
    rep = ui_check(model, family, max_union=1)
    for c, got in zip(rep.cutoffs, rep.sup_tail):
        expected = max((k * 0.6 ** k for k in range(1, 7) if k >= c),
                       default=0.0)
        assert got == pytest.approx(expected, abs=1e-12)
    assert rep.uniformly_integrable
    assert rep.sup_tail[-1] == 0.0
    assert all(b <= a + 1e-12 for a, b in zip(rep.sup_tail, rep.sup_tail[1:]))


def test_ui_certificates_and_mixtures(rng):
    for _ in range(8):
        model = random_model(rng, max_depth=2, max_strategies=60)
        fam = [random_variable(rng, model.space) for _ in range(3)]
        rep = ui_check(model, fam)
        assert rep.uniformly_integrable == rep.certificates_pass == True
        weights = rng.dirichlet(np.ones(len(fam)))
        mix = fam[0] * float(weights[0])
        for w, x in zip(weights[1:], fam[1:]):
            mix = mix + x * float(w)
        mixed = ui_check(model, fam + [mix])
        assert mixed.uniformly_integrable and mixed.certificates_pass
        assert mixed.bound <= rep.bound + 1e-9


def test_ui_rejects_empty_family(m1):
    with pytest.raises(ValueError):
        ui_check(m1[0], [])


def test_dct_scaling_sequence(m2):
    model, nh = m2
    e_abs = upper_expectation(model, abs(nh))
    seq = [nh * (1 - 1 / n) for n in range(1, 40)]
    rep = dominated_convergence_check(model, seq, nh, abs(nh) + 1.0, tol=e_abs / 38)
    assert rep.errors[0] == pytest.approx(e_abs, abs=1e-9)
    assert rep.errors[-1] == pytest.approx(e_abs / 39, abs=1e-9)
    assert rep.passed


def test_dct_capacity_bound_sequence():
    # X_n differs from X only on an event of vanishing upper probability
    model = deep_binary(6)
    space = model.space
    x = RandomVariable(space, space.step_outcomes(1))
    bound = RandomVariable.constant(space, 2.0)
    seq = []
    errors_bound = []
    for k in range(1, 7):
        bump = leading_heads_indicator(model, k)
        seq.append(x + bump.apply(lambda v, k=k: (v > 0).astype(float)))
        errors_bound.append(0.6 ** k)
    rep = dominated_convergence_check(model, seq, x, bound, tol=0.6 ** 6 + 1e-12)
    for err, cap in zip(rep.errors, errors_bound):
        assert err <= cap + 1e-9
    assert rep.passed


def test_l1_convergence_gives_ui_and_capacity_convergence(rng):
    # exact finite-model rendering of: L1 convergence implies the family is
    # uniformly integrable and converges in capacity
    from sublex import Event, capacity_pair
    for _ in range(10):
        model = random_model(rng, max_depth=2, max_strategies=60)
        x = random_variable(rng, model.space)
        z = random_variable(rng, model.space)
        seq = [x + z * (0.5 ** k) for k in range(1, 9)]
        errs = [upper_expectation(model, abs(xn - x)) for xn in seq]
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
        rep = ui_check(model, seq, max_union=2)
        assert rep.uniformly_integrable and rep.certificates_pass
        for eps in (0.5, 0.1):
            caps = [capacity_pair(model, Event(
                model.space, np.abs(xn.values - x.values) > eps))[0]
                for xn in seq]
            assert caps[-1] <= errs[-1] / eps + 1e-12  # Markov, exactly
            assert caps[-1] <= caps[0] + 1e-12 or caps[0] == 0.0


def test_dct_domination_failure_names_a_leaf(m2):
    model, nh = m2
    y = RandomVariable.constant(model.space, 1.0)
    with pytest.raises(DominationError) as info:
        dominated_convergence_check(model, [nh * 5.0], nh, y)
    assert info.value.witness_leaf is not None
