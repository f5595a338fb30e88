"""Seminorms, uniform integrability certificates, moment-tail profiles and
dominated-convergence verification.

On a fixed finite model every variable is integrable and every finite family
is uniformly integrable, so the point of this suite is the exposed profiles
and curves: growing-family analyses (deeper trees, scaled indicator families)
read genuine decay or non-decay off them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .credal import CredalModel, upper_expectation
from .errors import DominationError
from .tree import RandomVariable

DEFAULT_EPS_GRID = (0.1, 0.01)
UNION_EVENT_CAP = 30000


def seminorm(model: CredalModel, x: RandomVariable, p) -> float:
    """(E|X|^p)^(1/p); for p = inf, the essential sup over the quasi-sure
    support (capacity-null leaves do not count)."""
    if p == math.inf:
        sup = model.support_mask()
        return float(np.max(np.abs(x.values)[sup], initial=0.0))
    p = float(p)
    if p < 1.0:
        raise ValueError("p must be >= 1 or inf")
    return float(upper_expectation(model, abs(x) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class TailProfile:
    """E(|X|^p 1_{|X|>n}) on the integer grid up to max |X|."""

    p: float
    thresholds: tuple[int, ...]
    values: tuple[float, ...]

    @property
    def member(self) -> bool:
        return self.values[-1] == 0.0

    def to_dict(self) -> dict:
        return {"p": self.p, "thresholds": list(self.thresholds),
                "values": list(self.values), "member": self.member}


def lb_tail_test(model: CredalModel, x: RandomVariable, p: float = 1.0) -> TailProfile:
    """Moment-tail profile; on a finite model it always reaches zero, so the
    profile itself is the output of interest."""
    p = float(p)
    if p < 1.0:
        raise ValueError("p must be >= 1")
    top = int(math.ceil(x.max_abs())) + 1
    absx = np.abs(x.values)
    thresholds, vals = [], []
    for n in range(top + 1):
        tail = np.where(absx > n, absx ** p, 0.0)
        thresholds.append(n)
        vals.append(upper_expectation(model, RandomVariable(model.space, tail)))
    return TailProfile(p, tuple(thresholds), tuple(vals))


@dataclass(frozen=True)
class EpsDeltaRow:
    eps: float
    delta: float
    ok: bool


@dataclass(frozen=True)
class UIReport:
    """Cutoff curve sup_X E(|X| 1_{|X|>=c}) plus the two equivalence
    certificates: the sup of first moments and an eps-delta table over small
    atom-union events."""

    cutoffs: tuple[float, ...]
    sup_tail: tuple[float, ...]
    bound: float
    rows: tuple[EpsDeltaRow, ...]
    event_family: str

    @property
    def uniformly_integrable(self) -> bool:
        return self.sup_tail[-1] == 0.0

    @property
    def certificates_pass(self) -> bool:
        return math.isfinite(self.bound) and all(r.ok for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "uniformly_integrable": self.uniformly_integrable,
            "cutoffs": list(self.cutoffs),
            "sup_tail": list(self.sup_tail),
            "bound": self.bound,
            "eps_delta": [{"eps": r.eps, "delta": r.delta, "ok": r.ok}
                          for r in self.rows],
            "event_family": self.event_family,
        }


def _leaf_union_masks(n_leaves: int, max_size: int):
    """All leaf unions up to the largest size that stays under the event cap."""
    sizes = []
    total = 0
    for k in range(1, max_size + 1):
        total += math.comb(n_leaves, k)
        if total > UNION_EVENT_CAP:
            break
        sizes.append(k)
    masks = []
    for k in sizes:
        for combo in combinations(range(n_leaves), k):
            mask = np.zeros(n_leaves, dtype=bool)
            mask[list(combo)] = True
            masks.append(mask)
    label = (f"leaf unions up to size {sizes[-1]}" if sizes
             else "none (leaf count too large)")
    return masks, label


def ui_check(model: CredalModel, family, eps_grid=DEFAULT_EPS_GRID,
             max_union: int = 3) -> UIReport:
    """Exact uniform-integrability analysis of a finite family.

    Cutoffs are the attained |X| values across the family, plus one sentinel
    above the maximum (where the curve must sit at zero).  The eps-delta
    table enumerates unions of up to ``max_union`` leaves; the family size is
    capped for tractability and the report names what was used.
    """
    family = list(family)
    if not family:
        raise ValueError("family must be nonempty")
    for x in family:
        if x.space is not model.space:
            raise ValueError("family member lives on a different space")

    attained = np.unique(np.concatenate([np.abs(x.values) for x in family]))
    cutoffs = np.concatenate([[0.0], attained, [attained[-1] + 1.0]])
    cutoffs = np.unique(cutoffs)
    sup_tail = []
    for c in cutoffs:
        worst = 0.0
        for x in family:
            absx = np.abs(x.values)
            clipped = np.where(absx >= c, absx, 0.0)
            worst = max(worst, upper_expectation(
                model, RandomVariable(model.space, clipped)))
        sup_tail.append(worst)
    bound = max(upper_expectation(model, abs(x)) for x in family)

    # eps-delta certificate over small events
    masks, label = _leaf_union_masks(model.space.n_leaves, max_union)
    pairs = []
    for mask in masks:
        ind = RandomVariable(model.space, mask.astype(float))
        v = upper_expectation(model, ind)
        worst = max(upper_expectation(
            model, RandomVariable(model.space, mask * np.abs(x.values)))
            for x in family)
        pairs.append((v, worst))
    rows = []
    for eps in eps_grid:
        violating = sorted(v for v, m in pairs if m >= eps)
        if not violating:
            delta = max((v for v, _ in pairs), default=1.0)
            rows.append(EpsDeltaRow(eps, float(delta), True))
            continue
        v0 = violating[0]
        below = [v for v, _ in pairs if v < v0]
        prev = max(below, default=0.0)
        delta = (prev + v0) / 2.0
        rows.append(EpsDeltaRow(eps, float(delta), delta > 0.0))
    return UIReport(tuple(float(c) for c in cutoffs), tuple(sup_tail),
                    float(bound), tuple(rows), label)


@dataclass(frozen=True)
class DominatedConvergenceReport:
    errors: tuple[float, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        tail = self.errors[len(self.errors) // 2:]
        monotone = all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))
        return monotone and self.errors[-1] <= self.tolerance

    def to_dict(self) -> dict:
        return {"errors": list(self.errors), "passed": self.passed,
                "tolerance": self.tolerance}


def dominated_convergence_check(model: CredalModel, sequence, x: RandomVariable,
                                bound: RandomVariable,
                                tol: float = 1e-6) -> DominatedConvergenceReport:
    """Report E|X_n - X| along the sequence.  Refuses (naming a witness leaf)
    if some |X_n| exceeds the dominating variable on the q.s. support."""
    sequence = list(sequence)
    if not sequence:
        raise ValueError("sequence must be nonempty")
    sup = model.support_mask()
    for i, xn in enumerate(sequence):
        bad = (np.abs(xn.values) > bound.values + 1e-12) & sup
        if bad.any():
            leaf = int(np.nonzero(bad)[0][0])
            raise DominationError(
                f"|X_{i + 1}| exceeds the dominating bound at leaf {leaf}",
                witness_leaf=leaf, index=i + 1)
    errs = tuple(upper_expectation(model, abs(xn - x)) for xn in sequence)
    return DominatedConvergenceReport(errs, tol)
