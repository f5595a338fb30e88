"""Maximal-inequality verification: the submartingale max/min chains, the
martingale corollaries, and the second-moment bound for centered sums of
steps independent of the past.

Each check evaluates every term of its chain independently and reports the
full chain, so equality cases stay visible and a verdict never hides the
numbers behind it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .credal import (CredalModel, conjugate_expectation, maximizing_strategy,
                     upper_expectation)
from .distribution import (TestFunctionBattery,
                           check_independent_of_filtration)
from .errors import ClassificationError, IndependenceError
from .martingale import ProcessClass, classify_process, partial_sum_process
from .tree import AdaptedProcess, Event, RandomVariable

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Term:
    name: str
    value: float


@dataclass(frozen=True)
class Comparison:
    lhs: str
    rhs: str
    slack: float
    holds: bool
    diagnostic: bool = False


@dataclass(frozen=True)
class InequalityReport:
    check: str
    terms: tuple[Term, ...]
    comparisons: tuple[Comparison, ...]
    witnesses: tuple[tuple[str, tuple[int, ...]], ...]
    fingerprint: str
    tolerance: float
    notes: tuple[str, ...] = ()

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.comparisons if not c.diagnostic)

    def term(self, name: str) -> float:
        for t in self.terms:
            if t.name == name:
                return t.value
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "holds": self.holds,
            "terms": {t.name: t.value for t in self.terms},
            "term_order": [t.name for t in self.terms],
            "comparisons": [
                {"lhs": c.lhs, "rhs": c.rhs, "slack": c.slack,
                 "holds": c.holds, "diagnostic": c.diagnostic}
                for c in self.comparisons
            ],
            "witnesses": {name: list(ch) for name, ch in self.witnesses},
            "model_fingerprint": self.fingerprint,
            "tolerance": self.tolerance,
            "notes": list(self.notes),
        }


def _require(kind_ok, cls: ProcessClass, what: str):
    if cls.kind not in kind_ok:
        raise ClassificationError(f"{what} needs one of {kind_ok}, got {cls.kind}",
                                  cls)


def _running(proc: AdaptedProcess, fn) -> tuple[list[int], np.ndarray]:
    """Leaf-indexed running reduction of fn(X_j) over times j >= 1."""
    times = [t for t in proc.times if t >= 1]
    if not times:
        raise ValueError("process has no times >= 1")
    mat = np.stack([fn(proc.leaf_view(t)) for t in times])
    return times, mat.max(axis=0)


def _chain(check: str, model: CredalModel, terms, comparisons, witnesses,
           tol: float, notes=()) -> InequalityReport:
    return InequalityReport(check, tuple(terms), tuple(comparisons),
                            tuple(witnesses), model.fingerprint(), tol,
                            tuple(notes))


def _cmp(terms: dict, lhs: str, rhs: str, tol: float, diagnostic=False) -> Comparison:
    slack = terms[rhs] - terms[lhs]
    return Comparison(lhs, rhs, slack, slack >= -tol, diagnostic)


def doob_submartingale_max(model: CredalModel, proc: AdaptedProcess, lam: float,
                           tol: float = DEFAULT_TOL) -> InequalityReport:
    """Four-term maximal chain for a submartingale X_1..X_n:

        lam * V(max_j X_j >= lam) <= E(1_A X_n) <= E(X_n+) <= E(|X_n|)
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    cls = classify_process(model, proc, tol)
    _require(("submartingale", "martingale"), cls, "doob-max")
    times, run_max = _running(proc, lambda v: v)
    a = Event(model.space, run_max >= lam)
    xn = RandomVariable(model.space, proc.leaf_view(times[-1]))
    ind = a.indicator()

    v_val, v_wit = maximizing_strategy(model, ind)
    t2, t2_wit = maximizing_strategy(model, ind * xn)
    t3, t3_wit = maximizing_strategy(model, xn.positive_part())
    t4, t4_wit = maximizing_strategy(model, abs(xn))

    terms = {"lam_V": lam * v_val, "ind_xn": t2, "pos_xn": t3, "abs_xn": t4}
    notes = []
    if proc.start == 0:
        notes.append("time 0 excluded from the running maximum")
    return _chain(
        "doob-max", model,
        [Term(k, v) for k, v in terms.items()],
        [_cmp(terms, "lam_V", "ind_xn", tol),
         _cmp(terms, "ind_xn", "pos_xn", tol),
         _cmp(terms, "pos_xn", "abs_xn", tol)],
        [("lam_V", v_wit.choices), ("ind_xn", t2_wit.choices),
         ("pos_xn", t3_wit.choices), ("abs_xn", t4_wit.choices)],
        tol, notes)


def doob_submartingale_min(model: CredalModel, proc: AdaptedProcess, lam: float,
                           tol: float = DEFAULT_TOL) -> InequalityReport:
    """Minimal chain for a submartingale:

        lam * v(min_j X_j <= -lam)
            <= E(X_n) - E(X_1) + E(-1_M X_n)
            <= E(X_n) - E(X_1) + E(X_n-)
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    cls = classify_process(model, proc, tol)
    _require(("submartingale", "martingale"), cls, "doob-min")
    times, run_neg_max = _running(proc, lambda v: -v)
    m = Event(model.space, run_neg_max >= lam)
    xn = RandomVariable(model.space, proc.leaf_view(times[-1]))
    x1 = RandomVariable(model.space, proc.leaf_view(times[0]))

    e_xn = upper_expectation(model, xn)
    e_x1 = upper_expectation(model, x1)
    low_v = conjugate_expectation(model, m.indicator())
    neg_term, neg_wit = maximizing_strategy(model, -(m.indicator() * xn))
    nparts, np_wit = maximizing_strategy(model, xn.negative_part())

    terms = {
        "lam_v": lam * low_v,
        "mid": e_xn - e_x1 + neg_term,
        "neg_bound": e_xn - e_x1 + nparts,
    }
    return _chain(
        "doob-min", model,
        [Term(k, v) for k, v in terms.items()],
        [_cmp(terms, "lam_v", "mid", tol),
         _cmp(terms, "mid", "neg_bound", tol)],
        [("mid", neg_wit.choices), ("neg_bound", np_wit.choices)],
        tol)


def doob_martingale(model: CredalModel, proc: AdaptedProcess, lam: float,
                    tol: float = DEFAULT_TOL) -> InequalityReport:
    """Martingale corollary, both chains:

        V(max_j |X_j| >= lam) <= E(1_A |X_n|) / lam <= E(|X_n|) / lam
        V(max_j |X_j| >= lam) <= E(X_n^2) / lam^2
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    cls = classify_process(model, proc, tol)
    _require(("martingale",), cls, "doob-mart")
    times, run_max = _running(proc, np.abs)
    a = Event(model.space, run_max >= lam)
    xn = RandomVariable(model.space, proc.leaf_view(times[-1]))

    v_val, v_wit = maximizing_strategy(model, a.indicator())
    ind_abs, ia_wit = maximizing_strategy(model, a.indicator() * abs(xn))
    e_abs, ab_wit = maximizing_strategy(model, abs(xn))
    e_sq, sq_wit = maximizing_strategy(model, xn ** 2)

    terms = {
        "V": v_val,
        "ind_abs_over_lam": ind_abs / lam,
        "abs_over_lam": e_abs / lam,
        "sq_over_lam_sq": e_sq / lam ** 2,
    }
    return _chain(
        "doob-mart", model,
        [Term(k, v) for k, v in terms.items()],
        [_cmp(terms, "V", "ind_abs_over_lam", tol),
         _cmp(terms, "ind_abs_over_lam", "abs_over_lam", tol),
         _cmp(terms, "V", "sq_over_lam_sq", tol)],
        [("V", v_wit.choices), ("ind_abs_over_lam", ia_wit.choices),
         ("abs_over_lam", ab_wit.choices), ("sq_over_lam_sq", sq_wit.choices)],
        tol)


def is_mean_certain_steps(model: CredalModel, steps, tol: float = 1e-12) -> bool:
    return all(abs(upper_expectation(model, x) + upper_expectation(model, -x)) <= tol
               for x in steps)


def centered_cross_terms(model: CredalModel, steps):
    """E(+/- Xbar_i Xbar_j) for all i < j, with steps centered at their upper
    expectation.  Both vanish exactly when the steps are mean certain."""
    centered = [x - upper_expectation(model, x) for x in steps]
    rows = []
    for i in range(len(centered)):
        for j in range(i + 1, len(centered)):
            prod = centered[i] * centered[j]
            rows.append((i + 1, j + 1,
                         upper_expectation(model, prod),
                         upper_expectation(model, -prod)))
    return rows


def kolmogorov_inequality(model: CredalModel, steps, eps: float,
                          battery: TestFunctionBattery | None = None,
                          tol: float = DEFAULT_TOL) -> InequalityReport:
    """Second-moment maximal bound for centered sums of steps independent of
    the past:

        V(max_j |S_j| >= eps) <= E(S_n^2) / eps^2 <= sum_i E(Xbar_i^2) / eps^2

    The first comparison is enforced.  The second is enforced only for mean
    certain steps; under mean uncertainty it is evaluated and labeled
    diagnostic, because the product-expectation step behind it needs the
    lower conditional mean to vanish as well.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    steps = list(steps)
    if not steps:
        raise ValueError("need at least one step")
    for i, x in enumerate(steps[1:], start=2):
        rep = check_independent_of_filtration(model, x, i - 1, battery=battery)
        if not rep.passed:
            raise IndependenceError(
                f"step {i} is not independent of the first {i - 1} steps", rep)

    proc = partial_sum_process(model, steps)
    times = [t for t in proc.times if t >= 1]
    run_max = np.stack([np.abs(proc.leaf_view(t)) for t in times]).max(axis=0)
    a = Event(model.space, run_max >= eps)
    sn = RandomVariable(model.space, proc.leaf_view(times[-1]))

    v_val, v_wit = maximizing_strategy(model, a.indicator())
    e_sq, sq_wit = maximizing_strategy(model, sn ** 2)
    mc = is_mean_certain_steps(model, steps)
    var_sum = 0.0
    for x in steps:
        centered = x - upper_expectation(model, x)
        var_sum += upper_expectation(model, centered ** 2)

    terms = {
        "V": v_val,
        "sq_over_eps_sq": e_sq / eps ** 2,
        "var_sum_over_eps_sq": var_sum / eps ** 2,
    }
    notes = [] if mc else ["steps are mean uncertain; the variance-sum bound "
                           "is reported as a diagnostic"]
    return _chain(
        "kolmogorov", model,
        [Term(k, v) for k, v in terms.items()],
        [_cmp(terms, "V", "sq_over_eps_sq", tol),
         _cmp(terms, "sq_over_eps_sq", "var_sum_over_eps_sq", tol,
              diagnostic=not mc)],
        [("V", v_wit.choices), ("sq_over_eps_sq", sq_wit.choices)],
        tol, notes)
