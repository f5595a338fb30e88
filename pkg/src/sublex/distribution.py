"""Independence and identical-distribution certification, IID construction,
and the finite-measure event-approximation bound.

Independence here is the asymmetric product-form notion: Y is independent of
X when E[phi(X, Y)] equals E[phibar(X)] with phibar(x) = E[phi(x, Y)], for
every test function phi.  On a desk we certify against a fixed, versioned
battery of test functions rather than all measurable phi; reports say so.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .credal import (CredalKernel, CredalModel, StrategyMeasure,
                     conditional_expectation, enumerate_measures,
                     maximizing_strategy, upper_expectation)
from .tree import Event, RandomVariable, build_product_space

BATTERY_VERSION = "battery-v1"
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class StepTemplate:
    """A one-step outcome distribution family: outcome values plus the finite
    set of probability vectors over them.  Stamped at every node of a product
    space, it generates an IID sequence."""

    outcomes: tuple[float, ...]
    kernels: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        out = tuple(float(v) for v in self.outcomes)
        object.__setattr__(self, "outcomes", out)
        if len(out) < 1 or not all(np.isfinite(out)):
            raise ValueError("outcomes must be a nonempty finite list")
        kers = []
        for i, row in enumerate(self.kernels):
            vec = tuple(float(p) for p in row)
            if len(vec) != len(out):
                raise ValueError(f"kernel[{i}] arity does not match the outcomes")
            if any(p < 0 for p in vec):
                raise ValueError(f"kernel[{i}] has a negative entry")
            if abs(sum(vec) - 1.0) > 1e-12:
                raise ValueError(f"kernel[{i}] entries sum to {sum(vec)!r}, not 1")
            kers.append(vec)
        if not kers:
            raise ValueError("need at least one kernel")
        object.__setattr__(self, "kernels", tuple(kers))

    @property
    def arity(self) -> int:
        return len(self.outcomes)

    def kernel_means(self) -> np.ndarray:
        x = np.asarray(self.outcomes)
        return np.array([np.dot(k, x) for k in self.kernels])

    def upper_mean(self) -> float:
        return float(self.kernel_means().max())

    def lower_mean(self) -> float:
        return float(self.kernel_means().min())

    def is_mean_certain(self, tol: float = 1e-12) -> bool:
        return abs(self.upper_mean() - self.lower_mean()) <= tol

    def centered_second_moment(self) -> float:
        """Upper expectation of (X - E(X))^2 for a single step."""
        x = np.asarray(self.outcomes) - self.upper_mean()
        return float(max(np.dot(k, x * x) for k in self.kernels))

    def abs_moment_band(self, m: int, power: float = 1.0) -> float:
        """Upper expectation of |X|^power restricted to m-1 < |X| <= m."""
        x = np.asarray(self.outcomes)
        sel = (np.abs(x) > m - 1) & (np.abs(x) <= m)
        vals = np.where(sel, np.abs(x) ** power, 0.0)
        return float(max(np.dot(k, vals) for k in self.kernels))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.outcomes)))

    def fingerprint(self) -> str:
        import hashlib
        h = hashlib.sha256()
        h.update(b"sublex-template/1")
        h.update(np.asarray(self.outcomes).tobytes())
        for k in self.kernels:
            h.update(np.asarray(k).tobytes())
        return h.hexdigest()


def build_iid_model(template: StepTemplate, n_steps: int):
    """Product space with the template stamped at every node.  Returns the
    model together with the step variables X_1..X_n (edge outcomes)."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    space = build_product_space(n_steps, template.arity, template.outcomes)
    kernel = CredalKernel.uniform(space, [np.asarray(k) for k in template.kernels])
    model = CredalModel(space, kernel)
    steps = [RandomVariable(space, space.step_outcomes(i))
             for i in range(1, n_steps + 1)]
    return model, steps


# -- test-function batteries ------------------------------------------------

def _indicator(c):
    return lambda v: (v >= c).astype(float)


@dataclass(frozen=True)
class TestFunctionBattery:
    """Named one-argument members plus the factor set whose pairwise products
    form the two-argument members."""

    version: str
    one_arg: tuple[tuple[str, Callable], ...]
    pair_factors: tuple[tuple[str, Callable], ...]

    def two_arg(self):
        """Product members (name template uses x for the first slot, y for
        the second)."""
        for fn, f in self.pair_factors:
            for gn, g in self.pair_factors:
                yield f"{fn.format('x')}*{gn.format('y')}", f, g


def default_battery(values: Sequence[float], max_thresholds: int = 3) -> TestFunctionBattery:
    """Polynomials to degree 3, |x|, both parts, and indicator steps placed
    between the attained values."""
    one = [
        ("x", lambda v: v),
        ("x^2", lambda v: v * v),
        ("x^3", lambda v: v ** 3),
        ("|x|", np.abs),
        ("x+", lambda v: np.maximum(v, 0.0)),
        ("x-", lambda v: np.maximum(-v, 0.0)),
    ]
    distinct = np.unique(np.asarray(values, dtype=float))
    if distinct.size >= 2:
        mids = (distinct[:-1] + distinct[1:]) / 2.0
        take = np.linspace(0, mids.size - 1, min(max_thresholds, mids.size)).astype(int)
        for c in mids[np.unique(take)]:
            one.append((f"1[x>={c:g}]", _indicator(c)))
    pair = [
        ("{}", lambda v: v),
        ("{}^2", lambda v: v * v),
        ("|{}|", np.abs),
        ("{}+", lambda v: np.maximum(v, 0.0)),
    ]
    return TestFunctionBattery(BATTERY_VERSION, tuple(one), tuple(pair))


@dataclass(frozen=True)
class BatteryEntry:
    phi: str
    selector: str
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


@dataclass(frozen=True)
class BatteryReport:
    check: str
    battery_version: str
    entries: tuple[BatteryEntry, ...]
    tolerance: float

    @property
    def max_gap(self) -> float:
        return max((e.gap for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.tolerance

    @property
    def witnesses(self) -> tuple[str, ...]:
        return tuple(e.phi for e in self.entries if e.gap > self.tolerance)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "battery": self.battery_version,
            "passed": self.passed,
            "max_gap": self.max_gap,
            "tolerance": self.tolerance,
            "witnesses": list(self.witnesses),
            "entries": [{"phi": e.phi, "selector": e.selector,
                         "lhs": e.lhs, "rhs": e.rhs} for e in self.entries],
        }


def _product_check(model: CredalModel, s_values: np.ndarray, y: RandomVariable,
                   g: Callable) -> tuple[float, float]:
    """lhs = E[s * g(Y)] and rhs = E[phibar(s)] for phi(s, y) = s * g(y)."""
    gy = g(y.values)
    lhs = upper_expectation(model, RandomVariable(model.space, s_values * gy))
    phibar = {}
    for a in np.unique(s_values):
        phibar[a] = upper_expectation(model, RandomVariable(model.space, a * gy))
    rhs_vals = np.array([phibar[a] for a in s_values])
    rhs = upper_expectation(model, RandomVariable(model.space, rhs_vals))
    return lhs, rhs


def check_independence(model: CredalModel, xs, y: RandomVariable,
                       battery: TestFunctionBattery | None = None,
                       tol: float = DEFAULT_TOL) -> BatteryReport:
    """Certify that ``y`` is independent of ``xs`` against the battery's
    two-argument members.  ``xs`` may be one variable or a sequence (in which
    case every coordinate and the coordinate sum are tested)."""
    if isinstance(xs, RandomVariable):
        xs = [xs]
    xs = list(xs)
    if not xs:
        raise ValueError("need at least one conditioning variable")
    if battery is None:
        pool = np.concatenate([x.values for x in xs] + [y.values])
        battery = default_battery(pool)
    if not battery.pair_factors:
        raise ValueError("battery has no two-argument members")
    selectors = [("x", xs[0].values)] if len(xs) == 1 else (
        [(f"x{j + 1}", x.values) for j, x in enumerate(xs)]
        + [("sum(x)", np.sum([x.values for x in xs], axis=0))])
    entries = []
    for name, f, g in battery.two_arg():
        for sel_name, sel_vals in selectors:
            lhs, rhs = _product_check(model, f(sel_vals), y, g)
            entries.append(BatteryEntry(name, sel_name, lhs, rhs))
    return BatteryReport("independence", battery.version, tuple(entries), tol)


def check_identical(model_a: CredalModel, x: RandomVariable,
                    model_b: CredalModel, y: RandomVariable,
                    battery: TestFunctionBattery | None = None,
                    tol: float = DEFAULT_TOL) -> BatteryReport:
    """Compare E[phi(X)] on one model with E[phi(Y)] on another."""
    if battery is None:
        battery = default_battery(np.concatenate([x.values, y.values]))
    entries = []
    for name, f in battery.one_arg:
        lhs = upper_expectation(model_a, x.apply(f))
        rhs = upper_expectation(model_b, y.apply(f))
        entries.append(BatteryEntry(name, "x", lhs, rhs))
    return BatteryReport("identical", battery.version, tuple(entries), tol)


@dataclass(frozen=True)
class FiltrationIndependenceReport:
    """Two certificates that X does not see the first n steps: the battery
    check against indicator events, and constancy of the time-n conditional."""

    battery: BatteryReport
    conditional_values: tuple[float, ...]
    expectation: float
    max_conditional_gap: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.battery.passed and self.max_conditional_gap <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "battery": self.battery.to_dict(),
            "conditional_values": list(self.conditional_values),
            "expectation": self.expectation,
            "max_conditional_gap": self.max_conditional_gap,
            "tolerance": self.tolerance,
        }


def _atom_union_events(model: CredalModel, n: int, max_unions: int = 12):
    """The depth-n atoms plus windows of 2 and 3 consecutive atoms."""
    space = model.space
    a, b = space.atoms(n)
    events = []
    for v in range(a, b):
        lo, hi = space.leaf_span(v)
        mask = np.zeros(space.n_leaves, dtype=bool)
        mask[lo:hi] = True
        events.append(mask)
    singles = list(events)
    unions = []
    for width in (2, 3):
        for j in range(len(singles) - width + 1):
            unions.append(np.logical_or.reduce(singles[j: j + width]))
            if len(unions) >= max_unions:
                break
        if len(unions) >= max_unions:
            break
    return events + unions


def check_independent_of_filtration(model: CredalModel, x: RandomVariable, n: int,
                                    battery: TestFunctionBattery | None = None,
                                    tol: float = DEFAULT_TOL) -> FiltrationIndependenceReport:
    """Is ``x`` independent of the first n steps?  Tests the battery against
    indicators of depth-n atom unions, and checks that the time-n conditional
    is constant equal to the unconditional value on positive-capacity atoms."""
    if not 0 <= n < model.space.depth:
        raise ValueError("n must name a strict sub-filtration level")
    if battery is None:
        battery = default_battery(np.concatenate([x.values, [0.0, 1.0]]))
    entries = []
    for mask in _atom_union_events(model, n):
        ind = mask.astype(float)
        for name, f, g in battery.two_arg():
            lhs, rhs = _product_check(model, f(ind), x, g)
            entries.append(BatteryEntry(name, "1_A", lhs, rhs))
    brep = BatteryReport("independent-of-filtration", battery.version,
                         tuple(entries), tol)

    cond = conditional_expectation(model, x, n)
    e0 = upper_expectation(model, x)
    space = model.space
    sup = model.support_mask()
    a, b = space.atoms(n)
    gaps = []
    for v in range(a, b):
        lo, hi = space.leaf_span(v)
        if sup[lo:hi].any():
            gaps.append(abs(float(cond[v - a]) - e0))
    return FiltrationIndependenceReport(
        battery=brep,
        conditional_values=tuple(float(c) for c in cond),
        expectation=e0,
        max_conditional_gap=max(gaps, default=0.0),
        tolerance=tol,
    )


@dataclass(frozen=True)
class EventApproximation:
    """A depth-n approximation of an event, scored by the summed reference
    measure over the extreme strategies.  The capacity of the symmetric
    difference never exceeds the reference measure of it."""

    approximation: Event
    v_sym_diff: float
    mu_sym_diff: float
    n_measures: int
    subsampled: bool

    @property
    def bound_holds(self) -> bool:
        return self.v_sym_diff <= self.mu_sym_diff + 1e-12

    def to_dict(self) -> dict:
        return {
            "level": self.approximation.level,
            "size": self.approximation.size,
            "v_sym_diff": self.v_sym_diff,
            "mu_sym_diff": self.mu_sym_diff,
            "n_measures": self.n_measures,
            "subsampled": self.subsampled,
            "bound_holds": self.bound_holds,
        }


def approximate_event(model: CredalModel, b: Event, n: int,
                      max_measures: int = 100) -> EventApproximation:
    """Best depth-n approximation by majority vote of the reference measure
    mu = sum of extreme strategy measures (an unnormalized finite measure).

    When the strategy count exceeds ``max_measures``, mu sums a documented
    subsample: the first ``max_measures - 1`` strategies in lexicographic
    order plus the strategy maximizing the symmetric difference, so the
    capacity bound still holds by construction.
    """
    if b.space is not model.space:
        raise ValueError("event lives on a different space")
    space = model.space
    if not 0 <= n <= space.depth:
        raise ValueError(f"level {n} outside [0, {space.depth}]")

    total = model.n_strategies
    subsampled = total > max_measures
    if subsampled:
        import itertools
        ranges = [range(model.kernel.n_sets(v)) for v in model.internal_nodes()]
        measures = [StrategyMeasure(model, c)
                    for c in itertools.islice(itertools.product(*ranges), max_measures - 1)]
    else:
        measures = enumerate_measures(model)
    mu_leaf = np.sum([th.leaf_probabilities() for th in measures], axis=0)

    a0, a1 = space.atoms(n)
    approx = np.zeros(space.n_leaves, dtype=bool)
    for v in range(a0, a1):
        lo, hi = space.leaf_span(v)
        inside = float(mu_leaf[lo:hi][b.mask[lo:hi]].sum())
        outside = float(mu_leaf[lo:hi][~b.mask[lo:hi]].sum())
        if inside > outside:
            approx[lo:hi] = True
    b_n = Event(space, approx)
    delta = b_n.symmetric_difference(b)

    if subsampled:
        _, witness = maximizing_strategy(model, delta.indicator())
        mu_leaf = mu_leaf + witness.leaf_probabilities()
        n_measures = len(measures) + 1
    else:
        n_measures = len(measures)

    v_delta = upper_expectation(model, delta.indicator())
    mu_delta = float(mu_leaf[delta.mask].sum())
    return EventApproximation(b_n, v_delta, mu_delta, n_measures, subsampled)
