import numpy as np
import pytest

from sublex import (ClassificationError, IndependenceError, RandomVariable,
                    centered_cross_terms, doob_martingale,
                    doob_submartingale_max, doob_submartingale_min,
                    expectation_under, is_mean_certain_steps,
                    kolmogorov_inequality, partial_sum_process,
                    upper_expectation)
from sublex.credal import StrategyMeasure, conditional_process
from sublex.generate import random_model, random_submartingale, random_variable
from tests.test_distribution import history_dependent_model


def test_doob_max_equality_case(m3):
    model, steps = m3
    ssq = partial_sum_process(model, steps).apply(np.square)
    rep = doob_submartingale_max(model, ssq, 4.0)
    assert [t.value for t in rep.terms] == pytest.approx([2.0, 2.0, 2.0, 2.0],
                                                         abs=1e-9)
    assert rep.holds


def test_doob_max_witnesses_reproduce_terms(m3):
    model, steps = m3
    ssq = partial_sum_process(model, steps).apply(np.square)
    rep = doob_submartingale_max(model, ssq, 4.0)
    choices = dict(rep.witnesses)["abs_xn"]
    theta = StrategyMeasure(model, choices)
    sn = RandomVariable(model.space, ssq.leaf_view(2))
    assert expectation_under(theta, abs(sn)) == pytest.approx(
        rep.term("abs_xn"), abs=1e-9)


def test_doob_max_trivial_when_lambda_exceeds_range(m3):
    model, steps = m3
    ssq = partial_sum_process(model, steps).apply(np.square)
    rep = doob_submartingale_max(model, ssq, 100.0)
    assert rep.term("lam_V") == 0.0 and rep.holds


def test_doob_min_chain(m3):
    model, steps = m3
    s = partial_sum_process(model, steps)
    rep = doob_submartingale_min(model, s, 2.0)
    assert [t.value for t in rep.terms] == pytest.approx([0.125, 0.5, 0.5],
                                                         abs=1e-9)
    assert rep.holds


def test_doob_min_terms_match_enumeration(m3):
    # the lower capacity and the mixed expectation term recomputed by raw
    # strategy enumeration, independent of the induction
    from sublex import enumerate_measures
    model, steps = m3
    s = partial_sum_process(model, steps)
    rep = doob_submartingale_min(model, s, 2.0)
    run_min = np.minimum(s.leaf_view(1), s.leaf_view(2))
    mask = (run_min <= -2.0).astype(float)
    thetas = enumerate_measures(model)
    low_v = min(expectation_under(th, RandomVariable(model.space, mask))
                for th in thetas)
    assert rep.term("lam_v") == pytest.approx(2.0 * low_v, abs=1e-12)
    sn = RandomVariable(model.space, s.leaf_view(2))
    neg = max(expectation_under(th, RandomVariable(model.space,
                                                   -mask * sn.values))
              for th in thetas)
    e2 = max(expectation_under(th, sn) for th in thetas)
    e1 = max(expectation_under(th, RandomVariable(model.space, s.leaf_view(1)))
             for th in thetas)
    assert rep.term("mid") == pytest.approx(e2 - e1 + neg, abs=1e-12)


def test_doob_min_nonnegative_process(m3):
    model, steps = m3
    ssq = partial_sum_process(model, steps).apply(np.square)
    rep = doob_submartingale_min(model, ssq, 1.0)
    assert rep.term("lam_v") == 0.0 and rep.holds


def test_doob_martingale_corollary(m3):
    model, steps = m3
    s = partial_sum_process(model, steps)
    rep = doob_martingale(model, s, 2.0)
    assert rep.term("V") == pytest.approx(0.5, abs=1e-9)
    assert rep.term("ind_abs_over_lam") == pytest.approx(0.5, abs=1e-9)
    assert rep.term("sq_over_lam_sq") == pytest.approx(0.5, abs=1e-9)
    assert rep.holds


def test_doob_martingale_rejects_submartingales(m3):
    model, steps = m3
    ssq = partial_sum_process(model, steps).apply(np.square)
    with pytest.raises(ClassificationError) as info:
        doob_martingale(model, ssq, 1.0)
    assert info.value.classification.kind == "submartingale"


def test_lambda_must_be_positive(m3):
    model, steps = m3
    s = partial_sum_process(model, steps)
    with pytest.raises(ValueError):
        doob_submartingale_max(model, s, 0.0)


def test_doob_chains_on_random_submartingales(rng):
    for _ in range(25):
        model = random_model(rng, max_strategies=200)
        proc = random_submartingale(rng, model)
        span = max(abs(v).max() for v in proc.levels) + 1e-6
        lam = float(rng.uniform(0.1, span))
        assert doob_submartingale_max(model, proc, lam).holds
        assert doob_submartingale_min(model, proc, lam).holds


def test_corollary_on_random_martingales(rng):
    for _ in range(25):
        model = random_model(rng, max_strategies=200)
        proc = conditional_process(model, random_variable(rng, model.space))
        lam = float(rng.uniform(0.2, 4.0))
        assert doob_martingale(model, proc, lam).holds


def test_kolmogorov_equality_case(m3):
    model, steps = m3
    rep = kolmogorov_inequality(model, steps, 2.0)
    assert [t.value for t in rep.terms] == pytest.approx([0.5, 0.5, 0.5],
                                                         abs=1e-9)
    assert rep.holds
    assert not any(c.diagnostic for c in rep.comparisons)


def test_kolmogorov_trivial_large_eps(m3):
    model, steps = m3
    rep = kolmogorov_inequality(model, steps, 50.0)
    assert rep.term("V") == 0.0 and rep.holds


def test_kolmogorov_mean_uncertain_diagnostic(m4):
    model, steps = m4
    assert not is_mean_certain_steps(model, steps)
    rep = kolmogorov_inequality(model, steps, 1.6)
    assert rep.term("V") == pytest.approx(0.6, abs=1e-9)
    assert rep.term("sq_over_eps_sq") == pytest.approx(2.752 / 2.56, abs=1e-9)
    assert rep.term("var_sum_over_eps_sq") == pytest.approx(2.24 / 2.56, abs=1e-9)
    bound1, bound2 = rep.comparisons
    assert bound1.holds and not bound1.diagnostic
    assert bound2.diagnostic and not bound2.holds
    assert rep.holds  # diagnostics never fail the verdict


def test_m4_cross_terms_frozen(m4):
    model, steps = m4
    ((i, j, plus, minus),) = centered_cross_terms(model, steps)
    assert (i, j) == (1, 2)
    assert plus == pytest.approx(0.288, abs=1e-9)
    s2 = partial_sum_process(model, steps).leaf_view(2)
    e_sq = upper_expectation(model, RandomVariable(model.space, s2 ** 2))
    assert e_sq == pytest.approx(2.752, abs=1e-9)


def test_mean_certain_cross_terms_vanish(m3):
    model, steps = m3
    for _, _, plus, minus in centered_cross_terms(model, steps):
        assert plus == pytest.approx(0.0, abs=1e-9)
        assert minus == pytest.approx(0.0, abs=1e-9)


def test_kolmogorov_requires_independent_steps():
    model, steps = history_dependent_model()
    with pytest.raises(IndependenceError):
        kolmogorov_inequality(model, steps, 1.0)


def test_kolmogorov_second_bound_tight_for_mean_certain(m3):
    model, steps = m3
    rep = kolmogorov_inequality(model, steps, 1.0)
    assert rep.term("sq_over_eps_sq") == pytest.approx(
        rep.term("var_sum_over_eps_sq"), abs=1e-9)
