"""sublex: exact sublinear expectations on finite filtered trees.

The engine represents a sample space as a leveled rooted tree, a credal set
as per-node families of one-step kernels, and computes upper expectations by
backward induction (equivalently, maximization over all pasted strategy
measures).  On top of that sit verification suites for the classical chains:
maximal inequalities, optional sampling, convexity comparisons, uniform
integrability, and a seeded simulation harness for the strong laws.
"""

__version__ = "0.1.0"

from .errors import (ClassificationError, DivergenceError, DominationError,
                     IndependenceError, MeanUncertainError, ModelFileError,
                     NotAdaptedError, NotStepError, PreconditionError,
                     SizeGuardError, SublexError)
from .tree import (AdaptedProcess, Event, RandomVariable, StoppingTime,
                   TreeSpace, build_product_space, event_from_predicate,
                   is_stopping_time)
from .credal import (CredalKernel, CredalModel, StrategyMeasure,
                     capacity_pair, conditional_at_stopping,
                     conditional_expectation, conditional_process,
                     conjugate_expectation, enumerate_measures,
                     expectation_under, maximizing_strategy,
                     quasi_surely_equal, upper_expectation,
                     upper_expectation_exact)
from .distribution import (BatteryReport, StepTemplate, TestFunctionBattery,
                           approximate_event, build_iid_model,
                           check_identical, check_independence,
                           check_independent_of_filtration, default_battery)
from .martingale import (CONVEX_BATTERY, ProcessClass, classify_process,
                         jensen_transform_check, optional_sampling_check,
                         partial_sum_process)
from .inequalities import (InequalityReport, centered_cross_terms,
                           doob_martingale, doob_submartingale_max,
                           doob_submartingale_min, is_mean_certain_steps,
                           kolmogorov_inequality)
from .integrability import (TailProfile, UIReport, dominated_convergence_check,
                            lb_tail_test, seminorm, ui_check)
from .lln import (ConvergenceVerdict, ScenarioStrategy, SimulationConfig,
                  borel_cantelli_bound, cluster_diagnostic,
                  mean_certain_slln, series_convergence_check,
                  simulate_paths, truncation_condition_check,
                  weighted_slln_check)
