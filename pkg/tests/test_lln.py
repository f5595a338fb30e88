import numpy as np
import pytest

from sublex import (DivergenceError, Event, MeanUncertainError,
                    SimulationConfig, StepTemplate, StrategyMeasure,
                    borel_cantelli_bound, build_iid_model, build_product_space,
                    cluster_diagnostic, expectation_under, mean_certain_slln,
                    series_convergence_check, simulate_paths,
                    truncation_condition_check, weighted_slln_check)
from sublex import CredalKernel, CredalModel
from sublex.errors import PreconditionError
from sublex.lln import (CSV_HEADER, default_battery, dyadic_series_trend,
                        strategies_from_names)
from sublex.generate import random_event, random_model
from tests.conftest import M3_TEMPLATE, M4_TEMPLATE

FAIR_COIN = StepTemplate((1.0, -1.0), ((0.5, 0.5),))
SMALL = SimulationConfig(steps=4000, reps=8, seed=11, burn_in=1000)


def test_default_battery_composition():
    batt = default_battery(2)
    kinds = [s.kind for s in batt]
    assert kinds.count("constant") == 2
    assert kinds.count("periodic") == 3
    assert kinds.count("random") == 8
    assert kinds.count("adaptive") == 2


def test_strategy_name_lookup():
    got = strategies_from_names(["const0", "adv-abs"], 2)
    assert [s.name for s in got] == ["const0", "adv-abs"]
    with pytest.raises(ValueError):
        strategies_from_names(["bogus"], 2)


def test_simulation_determinism():
    a = simulate_paths(FAIR_COIN, SMALL)
    b = simulate_paths(FAIR_COIN, SMALL)
    for ra, rb in zip(a.runs, b.runs):
        assert np.array_equal(ra.mean_s, rb.mean_s)
        assert np.array_equal(ra.checkpoint_s, rb.checkpoint_s)
    assert a.csv_text() == b.csv_text()
    c = simulate_paths(FAIR_COIN, SimulationConfig(
        steps=4000, reps=8, seed=12, burn_in=1000))
    assert not np.array_equal(a.runs[0].rep_final, c.runs[0].rep_final)


def test_simple_walk_statistics():
    result = simulate_paths(FAIR_COIN, SMALL)
    run = result.runs[0]
    assert run.strategy.name == "const0"
    # steps are +-1, so parity and range are those of a simple walk
    assert np.all(np.abs(run.rep_final) <= SMALL.steps)
    assert abs(run.mean_s[-1]) / SMALL.steps < 0.1


def test_csv_format():
    text = simulate_paths(FAIR_COIN, SMALL).csv_text()
    lines = text.strip().splitlines()
    assert lines[0] == CSV_HEADER
    first = lines[1].split(",")
    assert first[0] == "const0" and first[1] == "0"
    assert len(first) == 5


def test_strategy_means_match_exact_engine():
    # small horizon: empirical strategy-wise means against the pasted measure
    template = M4_TEMPLATE
    config = SimulationConfig(steps=4, reps=20000, seed=3, burn_in=0,
                              strategies=strategies_from_names(
                                  ["const0", "const1"], 2))
    result = simulate_paths(template, config)
    model, steps = build_iid_model(template, 4)
    total = steps[0] + steps[1] + steps[2] + steps[3]
    for run, choice in zip(result.runs, (0, 1)):
        theta = StrategyMeasure(model, tuple([choice] * model.space.leaf_offset))
        exact = expectation_under(theta, total)
        se = float(np.std(run.rep_final)) / np.sqrt(config.reps)
        assert abs(run.mean_s[-1] - exact) <= 3.0 * se + 1e-9


def test_dyadic_trend_classifier():
    n = np.arange(1, 5000, dtype=float)
    assert dyadic_series_trend(1.0 / n ** 2)[0] == "convergent"
    assert dyadic_series_trend(1.0 / n)[0] == "divergent"
    assert dyadic_series_trend(np.ones(5000))[0] == "divergent"
    assert dyadic_series_trend(np.zeros(100))[0] == "convergent"


def test_series_check_passes_with_summable_weights():
    verdict = series_convergence_check(
        M3_TEMPLATE, "1/i",
        SimulationConfig(steps=20000, reps=8, seed=5, burn_in=4000,
                         tolerance=0.05))
    assert verdict.passed
    assert verdict.pass_fraction == 1.0


def test_series_check_rejects_constant_weights():
    with pytest.raises(DivergenceError):
        series_convergence_check(M3_TEMPLATE, "1", SMALL)


def test_series_degenerate_template():
    silent = StepTemplate((0.0, 0.0), ((0.5, 0.5),))
    verdict = series_convergence_check(silent, "1/i", SMALL)
    assert all(o.statistic == 0.0 for o in verdict.outcomes)


def test_weighted_check_passes_linear_divisor():
    verdict = weighted_slln_check(
        M3_TEMPLATE, "n",
        SimulationConfig(steps=20000, reps=8, seed=5, burn_in=4000))
    assert verdict.passed


def test_weighted_check_rejects_log_divisor():
    with pytest.raises(DivergenceError):
        weighted_slln_check(M3_TEMPLATE, "log", SMALL)


def test_weighted_check_validates_divisor_shape():
    with pytest.raises(PreconditionError):
        weighted_slln_check(M3_TEMPLATE, np.linspace(5, 1, SMALL.steps), SMALL)


def test_weighted_constant_steps_statistic_zero():
    const = StepTemplate((2.0, 2.0), ((0.5, 0.5),))
    verdict = weighted_slln_check(const, "n", SMALL)
    assert all(o.statistic == pytest.approx(0.0, abs=1e-12)
               for o in verdict.outcomes)


def test_slln_mean_certain_template():
    verdict = mean_certain_slln(
        M3_TEMPLATE, SimulationConfig(steps=20000, reps=8, seed=5,
                                      burn_in=4000))
    assert verdict.passed
    assert dict(verdict.details)["mean"] == pytest.approx(0.0, abs=1e-12)


def test_slln_constant_steps_exact_limit():
    const = StepTemplate((1.5, 1.5), ((0.3, 0.7),))
    verdict = mean_certain_slln(const, SMALL)
    for o in verdict.outcomes:
        assert o.limit == pytest.approx(1.5, abs=1e-12)
        assert o.statistic == pytest.approx(0.0, abs=1e-12)


def test_slln_degenerate_kernel_deterministic():
    template = StepTemplate((2.0, -1.0), ((1.0, 0.0),))
    verdict = mean_certain_slln(template, SMALL)
    for o in verdict.outcomes:
        assert o.limit == pytest.approx(2.0, abs=1e-12)


def test_slln_refuses_mean_uncertain_templates():
    with pytest.raises(MeanUncertainError):
        mean_certain_slln(M4_TEMPLATE, SMALL)


def test_cluster_diagnostic_extreme_constants():
    config = SimulationConfig(steps=40000, reps=8, seed=5, burn_in=8000,
                              tolerance=0.05)
    verdict = cluster_diagnostic(M4_TEMPLATE, config)
    details = dict(verdict.details)
    assert details["interval_lower"] == pytest.approx(-0.2)
    assert details["interval_upper"] == pytest.approx(0.2)
    by_name = {o.name: o for o in verdict.outcomes}
    assert by_name["const0"].limit == pytest.approx(-0.2, abs=0.05)
    assert by_name["const1"].limit == pytest.approx(0.2, abs=0.05)
    assert details["non_convergence_exhibited"]
    assert verdict.passed  # everything inside the interval


def test_cluster_periodic_strategies_land_inside():
    config = SimulationConfig(steps=40000, reps=8, seed=5, burn_in=8000,
                              tolerance=0.05)
    verdict = cluster_diagnostic(M4_TEMPLATE, config)
    for o in verdict.outcomes:
        assert -0.2 - 0.05 <= o.limit <= 0.2 + 0.05


def test_cluster_mean_certain_is_degenerate():
    verdict = cluster_diagnostic(M3_TEMPLATE, SMALL)
    assert dict(verdict.details).get("note") == "interval degenerate, converges"


def test_truncation_bounded_template():
    rep = truncation_condition_check(M3_TEMPLATE)
    assert rep.verdict == "finite"
    assert rep.bands == pytest.approx((1.0,))  # single band equals E|X|
    assert rep.tail_bound_holds


def test_truncation_synthetic_bands():
    fine = truncation_condition_check(lambda m: 1.0 / m ** 2, horizon=4000)
    assert fine.verdict == "finite-trend"
    coarse = truncation_condition_check(lambda m: 1.0 / m, horizon=4000)
    assert coarse.verdict == "divergent-trend"


def test_truncation_rejects_negative_bands():
    with pytest.raises(ValueError):
        truncation_condition_check([0.5, -0.1])


def test_borel_cantelli_single_measure_equality():
    space = build_product_space(2, 2, [1.0, 0.0])
    model = CredalModel(space, CredalKernel.uniform(space, [[0.5, 0.5]]))
    events = [Event(space, np.eye(4, dtype=bool)[i]) for i in range(3)]
    rep = borel_cantelli_bound(model, events)
    assert rep.union_value == pytest.approx(0.75, abs=1e-12)
    assert rep.sum_value == pytest.approx(0.75, abs=1e-12)
    assert rep.holds


def test_borel_cantelli_on_m2(m2):
    model, _ = m2
    space = model.space
    events = [Event(space, space.step_outcomes(i) == 1.0) for i in (1, 2)]
    rep = borel_cantelli_bound(model, events)
    assert rep.holds
    assert rep.union_value < rep.sum_value  # strict under sub-additivity here


def test_borel_cantelli_repeated_events(m2):
    model, _ = m2
    a = Event(model.space, model.space.step_outcomes(1) == 1.0)
    rep = borel_cantelli_bound(model, [a, a, a])
    assert rep.union_value == pytest.approx(0.6, abs=1e-12)
    assert rep.sum_value == pytest.approx(1.8, abs=1e-12)
    assert rep.holds


def test_borel_cantelli_random_families(rng):
    for _ in range(15):
        model = random_model(rng, max_strategies=120)
        events = [random_event(rng, model.space)
                  for _ in range(int(rng.integers(1, 6)))]
        assert borel_cantelli_bound(model, events).holds
