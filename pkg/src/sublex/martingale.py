"""Process classification, centered partial sums, optional sampling and
convex-transform checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .credal import (CredalModel, _backward, conditional_at_stopping,
                     upper_expectation)
from .errors import ClassificationError, NotStepError, PreconditionError
from .tree import AdaptedProcess, RandomVariable, StoppingTime

DEFAULT_TOL = 1e-9


def _exp_clipped(v, cap: float = 30.0):
    # exp with a linear extension past the cap: keeps convexity, avoids overflow
    v = np.asarray(v, dtype=float)
    return np.where(v <= cap, np.exp(np.minimum(v, cap)),
                    np.exp(cap) * (1.0 + (v - cap)))


CONVEX_BATTERY: dict = {
    "identity": lambda v: np.asarray(v, dtype=float),
    "square": lambda v: np.asarray(v) ** 2,
    "abs": np.abs,
    "pos": lambda v: np.maximum(v, 0.0),
    "neg": lambda v: np.maximum(-np.asarray(v), 0.0),
    "exp_clipped": _exp_clipped,
    "hinge": lambda v: np.maximum(v, 0.5),
}


@dataclass(frozen=True)
class ProcessClass:
    """Classification with the full defect matrices over time pairs s < t.

    ``super_defect[s][t]`` is the worst (largest) value of E_s(X_t) - X_s over
    the depth-s atoms; ``sub_defect`` is the worst of X_s - E_s(X_t).  A
    martingale keeps both within tolerance, a submartingale the sub side, a
    supermartingale the super side.
    """

    kind: str
    times: tuple[int, ...]
    super_defect: tuple[tuple[float, ...], ...]
    sub_defect: tuple[tuple[float, ...], ...]
    tolerance: float

    @property
    def max_super_defect(self) -> float:
        return max((v for row in self.super_defect for v in row), default=0.0)

    @property
    def max_sub_defect(self) -> float:
        return max((v for row in self.sub_defect for v in row), default=0.0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "times": list(self.times),
            "super_defect": [list(r) for r in self.super_defect],
            "sub_defect": [list(r) for r in self.sub_defect],
            "tolerance": self.tolerance,
        }


def classify_process(model: CredalModel, proc: AdaptedProcess,
                     tol: float = DEFAULT_TOL) -> ProcessClass:
    """Classify against the one-step (and, via the tower property, every
    multi-step) conditional comparison, reporting all pairwise defects."""
    if proc.space is not model.space:
        raise PreconditionError("process lives on a different space")
    times = list(proc.times)
    sup_rows, sub_rows = [], []
    for s in times[:-1]:
        xs = proc.value_at(s)
        sup_row, sub_row = [], []
        for t in times:
            if t <= s:
                continue
            levels = _backward(model, proc.leaf_view(t), down_to=s)
            diff = levels[s] - xs
            sup_row.append(float(diff.max()))
            sub_row.append(float((-diff).max()))
        sup_rows.append(tuple(sup_row))
        sub_rows.append(tuple(sub_row))
    max_sup = max((v for r in sup_rows for v in r), default=0.0)
    max_sub = max((v for r in sub_rows for v in r), default=0.0)
    if max_sup <= tol and max_sub <= tol:
        kind = "martingale"
    elif max_sub <= tol:
        kind = "submartingale"
    elif max_sup <= tol:
        kind = "supermartingale"
    else:
        kind = "none"
    return ProcessClass(kind, tuple(times), tuple(sup_rows), tuple(sub_rows), tol)


def partial_sum_process(model: CredalModel, steps) -> AdaptedProcess:
    """Cumulative centered sums S_j = sum_{i<=j} (X_i - E(X_i)), node indexed,
    with S_0 = 0.  Step i must be measurable at its own time."""
    space = model.space
    steps = list(steps)
    if len(steps) > space.depth:
        raise ValueError("more steps than filtration levels")
    levels = [np.zeros(1)]
    for i, x in enumerate(steps, start=1):
        if x.space is not space:
            raise NotStepError(f"step {i} lives on a different space")
        try:
            xi = space.project(i, x.values)
        except Exception as exc:
            raise NotStepError(f"step {i} is not measurable at time {i}") from exc
        center = upper_expectation(model, x)
        prev = levels[-1]
        parent_vals = np.repeat(prev, space.child_counts[slice(*space.atoms(i - 1))])
        levels.append(parent_vals + (xi - center))
    return AdaptedProcess(space, 0, levels)


@dataclass(frozen=True)
class OptionalSamplingReport:
    min_slack: float
    n_checked: int
    tolerance: float
    classification: ProcessClass

    @property
    def holds(self) -> bool:
        return self.min_slack >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "min_slack": self.min_slack,
            "n_checked": self.n_checked,
            "tolerance": self.tolerance,
            "classification": self.classification.to_dict(),
        }


def optional_sampling_check(model: CredalModel, proc: AdaptedProcess,
                            s: StoppingTime, t: StoppingTime,
                            tol: float = DEFAULT_TOL) -> OptionalSamplingReport:
    """Sampled submartingale comparison X_S <= E_S(X_T) on the quasi-sure
    support, for bounded stopping times S <= T."""
    if not s <= t:
        raise PreconditionError("need S <= T pointwise")
    cls = classify_process(model, proc, tol)
    if cls.kind not in ("martingale", "submartingale"):
        raise ClassificationError(
            f"optional sampling needs a submartingale, got {cls.kind}", cls)
    x_s = proc.at_stopping(s)
    x_t = proc.at_stopping(t)
    cond = conditional_at_stopping(model, x_t, s)
    sup = model.support_mask()
    slack = (cond.values - x_s.values)[sup]
    return OptionalSamplingReport(float(slack.min()), int(sup.sum()), tol, cls)


@dataclass(frozen=True)
class JensenReport:
    phi: str
    time: int
    min_slack: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.min_slack >= -self.tolerance

    def to_dict(self) -> dict:
        return {"phi": self.phi, "time": self.time, "holds": self.holds,
                "min_slack": self.min_slack, "tolerance": self.tolerance}


def jensen_transform_check(model: CredalModel, x: RandomVariable, t: int,
                           phi: str, tol: float = DEFAULT_TOL) -> JensenReport:
    """Atom-wise convexity comparison E_t(phi(X)) >= phi(E_t(X)) for a member
    of the registered convex battery."""
    if phi not in CONVEX_BATTERY:
        raise PreconditionError(
            f"{phi!r} is not in the registered convex battery "
            f"{sorted(CONVEX_BATTERY)}")
    f = CONVEX_BATTERY[phi]
    lhs = _backward(model, f(x.values), down_to=t)[t]
    rhs = f(_backward(model, x.values, down_to=t)[t])
    return JensenReport(phi, t, float((lhs - rhs).min()), tol)
