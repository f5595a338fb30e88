"""Rectangular credal models and the backward-induction upper expectation.

A model pairs a tree space with a per-node family of one-step transition
kernels.  Selecting one kernel at every internal node yields a pasted product
measure; the upper expectation maximizes over all such selections, which the
backward induction computes one level at a time:

    value(node) = max over kernels k of  sum_c k[c] * value(child c)

Ties in the maximization are broken toward the lowest kernel index so that
recorded maximizing strategies are reproducible.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import SizeGuardError
from .tree import Event, RandomVariable, StoppingTime, TreeSpace, AdaptedProcess

KERNEL_SUM_TOL = 1e-12
ENUMERATION_GUARD = 1_000_000


def _validate_kernel_vector(vec: np.ndarray, arity: int, where: str):
    if vec.shape != (arity,):
        raise ValueError(f"{where}: kernel vector has arity {vec.shape}, need {arity}")
    if np.any(vec < 0.0):
        raise ValueError(f"{where}: negative transition probability")
    if abs(float(vec.sum()) - 1.0) > KERNEL_SUM_TOL:
        raise ValueError(f"{where}: kernel entries sum to {float(vec.sum())!r}, not 1")


class CredalKernel:
    """One nonempty finite set of child distributions per internal node.

    Uniform construction (the common case) shares a single tuple of vectors
    across every internal node; ``with_overrides`` swaps in per-node sets.
    """

    def __init__(self, space: TreeSpace, shared=None, overrides=None):
        self.space = space
        self._shared = None
        self._overrides = {}
        if shared is not None:
            vecs = tuple(np.ascontiguousarray(v, dtype=np.float64) for v in shared)
            if not vecs:
                raise ValueError("kernel set must be nonempty")
            if space.depth > 0:
                arities = np.unique(space.child_counts[: space.leaf_offset])
                if arities.size > 1:
                    raise ValueError("uniform kernel needs uniform branching")
                for i, v in enumerate(vecs):
                    _validate_kernel_vector(v, int(arities[0]), f"kernel[{i}]")
            for v in vecs:
                v.setflags(write=False)
            self._shared = vecs
        if overrides:
            for node, sets in overrides.items():
                node = int(node)
                if not 0 <= node < space.leaf_offset:
                    raise ValueError(f"node {node} is not an internal node")
                arity = int(space.child_counts[node])
                vecs = tuple(np.ascontiguousarray(v, dtype=np.float64) for v in sets)
                if not vecs:
                    raise ValueError(f"node {node}: kernel set must be nonempty")
                for i, v in enumerate(vecs):
                    _validate_kernel_vector(v, arity, f"node {node} kernel[{i}]")
                    v.setflags(write=False)
                self._overrides[node] = vecs
        if self._shared is None:
            missing = set(range(space.leaf_offset)) - set(self._overrides)
            if missing:
                raise ValueError(f"no kernel set at internal node(s) {sorted(missing)[:5]}")

    @classmethod
    def uniform(cls, space: TreeSpace, vectors) -> "CredalKernel":
        return cls(space, shared=vectors)

    @classmethod
    def from_sets(cls, space: TreeSpace, per_node) -> "CredalKernel":
        return cls(space, shared=None, overrides=per_node)

    def with_overrides(self, per_node) -> "CredalKernel":
        merged = dict(self._overrides)
        merged.update(per_node)
        return CredalKernel(self.space, shared=self._shared, overrides=merged)

    @property
    def shared(self):
        return self._shared

    @property
    def overrides(self):
        return dict(self._overrides)

    def at(self, node: int):
        got = self._overrides.get(int(node))
        if got is not None:
            return got
        if self._shared is None:
            raise KeyError(f"no kernel at node {node}")
        return self._shared

    def n_sets(self, node: int) -> int:
        return len(self.at(node))

    def level_is_shared(self, t: int) -> bool:
        a, b = self.space.atoms(t)
        if self._shared is None:
            return False
        return not any(a <= v < b for v in self._overrides)


class CredalModel:
    """A tree space together with its credal kernel."""

    def __init__(self, space: TreeSpace, kernel: CredalKernel):
        if kernel.space is not space:
            raise ValueError("kernel was built for a different space")
        self.space = space
        self.kernel = kernel
        self._support = None

    @property
    def n_strategies(self) -> int:
        n = 1
        for v in range(self.space.leaf_offset):
            n *= self.kernel.n_sets(v)
        return n

    def internal_nodes(self) -> range:
        return range(self.space.leaf_offset)

    def fingerprint(self) -> str:
        """Content hash over the tree layout, edge outcomes and kernels."""
        h = hashlib.sha256()
        h.update(b"sublex-model/1")
        h.update(self.space.child_counts.tobytes())
        if self.space.edge_outcome is not None:
            h.update(self.space.edge_outcome[1:].tobytes())
        if self.kernel.shared is not None:
            h.update(b"U%d" % len(self.kernel.shared))
            for v in self.kernel.shared:
                h.update(v.tobytes())
        for node in sorted(self.kernel.overrides):
            h.update(b"N%d" % node)
            for v in self.kernel.at(node):
                h.update(v.tobytes())
        return h.hexdigest()

    def support_mask(self) -> np.ndarray:
        """Leaves with positive probability under at least one strategy."""
        if self._support is not None:
            return self._support
        space = self.space
        reach = np.zeros(space.n_nodes, dtype=bool)
        reach[0] = True
        for t in range(space.depth):
            a, b = space.atoms(t)
            if space.is_uniform_level(t) and self.kernel.level_is_shared(t):
                maxvec = np.maximum.reduce(self.kernel.at(a))
                blk = reach[a:b, None] & (maxvec > 0.0)[None, :]
                reach[space.depth_start[t + 1]: space.depth_start[t + 2]] = blk.ravel()
            else:
                for v in range(a, b):
                    if not reach[v]:
                        continue
                    maxvec = np.maximum.reduce(self.kernel.at(v))
                    fc = space.first_child[v]
                    reach[fc: fc + space.child_counts[v]] = maxvec > 0.0
        self._support = reach[space.leaf_offset:]
        self._support.setflags(write=False)
        return self._support

    def __repr__(self):
        return f"CredalModel(depth={self.space.depth}, leaves={self.space.n_leaves})"


@dataclass(frozen=True)
class StrategyMeasure:
    """A pure kernel selection: one index per internal node, in node order."""

    model: CredalModel
    choices: tuple[int, ...]

    def __post_init__(self):
        if len(self.choices) != self.model.space.leaf_offset:
            raise ValueError("need one kernel choice per internal node")

    def leaf_probabilities(self) -> np.ndarray:
        space = self.model.space
        prob = np.zeros(space.n_nodes)
        prob[0] = 1.0
        for v in range(space.leaf_offset):
            fc = space.first_child[v]
            c = space.child_counts[v]
            prob[fc: fc + c] = prob[v] * self.model.kernel.at(v)[self.choices[v]]
        return prob[space.leaf_offset:]

    def __repr__(self):
        return f"StrategyMeasure(choices={self.choices})"


def _check_variable(model: CredalModel, x: RandomVariable):
    if x.space is not model.space:
        raise ValueError("variable lives on a different space")


def _reduce_level(model: CredalModel, t: int, child_vals: np.ndarray,
                  record: np.ndarray | None = None) -> np.ndarray:
    space = model.space
    a, b = space.atoms(t)
    fast = space.is_uniform_level(t) and model.kernel.level_is_shared(t)
    if fast:
        kset = model.kernel.at(a)
        m = b - a
        mat = child_vals.reshape(m, -1)
        cand = mat @ np.stack(kset).T
        if record is not None:
            record[a:b] = cand.argmax(axis=1)
        return cand.max(axis=1)
    out = np.empty(b - a)
    base = space.depth_start[t + 1]
    for v in range(a, b):
        lo = space.first_child[v] - base
        seg = child_vals[lo: lo + space.child_counts[v]]
        best = -np.inf
        arg = 0
        for j, vec in enumerate(model.kernel.at(v)):
            val = float(vec @ seg)
            if val > best:
                best, arg = val, j
        out[v - a] = best
        if record is not None:
            record[v] = arg
    return out


def _backward(model: CredalModel, leaf_values: np.ndarray, down_to: int = 0,
              record: np.ndarray | None = None) -> list[np.ndarray]:
    """Per-depth value arrays from the bottom level down to ``down_to``."""
    levels = [None] * (model.space.depth + 1)
    levels[model.space.depth] = np.asarray(leaf_values, dtype=np.float64)
    for t in range(model.space.depth - 1, down_to - 1, -1):
        levels[t] = _reduce_level(model, t, levels[t + 1], record)
    return levels


def upper_expectation(model: CredalModel, x: RandomVariable) -> float:
    """Max over all pasted strategy measures of the linear expectation."""
    _check_variable(model, x)
    return float(_backward(model, x.values)[0][0])


def upper_expectation_exact(model: CredalModel, x: RandomVariable) -> Fraction:
    """Exact-rational backward induction over the binary values of the float
    inputs; useful to bound the rounding of the default float mode."""
    _check_variable(model, x)
    space = model.space
    vals = [Fraction(float(v)) for v in x.values]
    for t in range(space.depth - 1, -1, -1):
        a, b = space.atoms(t)
        base = space.depth_start[t + 1]
        nxt = []
        for v in range(a, b):
            lo = space.first_child[v] - base
            seg = vals[lo: lo + int(space.child_counts[v])]
            nxt.append(max(sum(Fraction(float(p)) * s for p, s in zip(vec, seg))
                           for vec in model.kernel.at(v)))
        vals = nxt
    return vals[0]


def conjugate_expectation(model: CredalModel, x: RandomVariable) -> float:
    """Lower counterpart: minus the upper expectation of the negated variable."""
    return -upper_expectation(model, -x)


def capacity_pair(model: CredalModel, event: Event) -> tuple[float, float]:
    """(upper, lower) probability of the event."""
    ind = event.indicator()
    return upper_expectation(model, ind), conjugate_expectation(model, ind)


def conditional_expectation(model: CredalModel, x: RandomVariable, t: int) -> np.ndarray:
    """Upper expectation given the time-t atom, one value per depth-t node."""
    _check_variable(model, x)
    if not 0 <= t <= model.space.depth:
        raise ValueError(f"time {t} outside [0, {model.space.depth}]")
    return _backward(model, x.values, down_to=t)[t].copy()

def conditional_process(model: CredalModel, x: RandomVariable) -> AdaptedProcess:
    """All conditioning levels at once (a martingale, by the tower property)."""
    _check_variable(model, x)
    return AdaptedProcess(model.space, 0, _backward(model, x.values))


def conditional_at_stopping(model: CredalModel, x: RandomVariable,
                            stopping: StoppingTime) -> RandomVariable:
    """Condition at a stopping time: on each leaf, evaluate the conditional
    expectation at the leaf's stopping depth and stopping atom."""
    _check_variable(model, x)
    if stopping.space is not model.space:
        raise ValueError("stopping time lives on a different space")
    levels = _backward(model, x.values)
    space = model.space
    out = np.empty(space.n_leaves)
    for node in stopping.nodes:
        d = int(space.node_depth[node])
        lo, hi = space.leaf_span(node)
        out[lo:hi] = levels[d][node - space.depth_start[d]]
    return RandomVariable(space, out)


def maximizing_strategy(model: CredalModel, x: RandomVariable):
    """The backward-induction value together with a strategy attaining it
    (lowest kernel index on ties)."""
    _check_variable(model, x)
    record = np.zeros(model.space.n_nodes, dtype=np.int64)
    value = float(_backward(model, x.values, record=record)[0][0])
    return value, StrategyMeasure(model, tuple(int(k) for k in record[: model.space.leaf_offset]))


def enumerate_measures(model: CredalModel, guard: int = ENUMERATION_GUARD):
    """All pure kernel selections, lexicographic in node order."""
    total = model.n_strategies
    if total > guard:
        raise SizeGuardError(f"{total} strategies exceeds the enumeration guard {guard}")
    ranges = [range(model.kernel.n_sets(v)) for v in model.internal_nodes()]
    return [StrategyMeasure(model, choices) for choices in itertools.product(*ranges)]


def expectation_under(theta: StrategyMeasure, x: RandomVariable) -> float:
    """Plain linear expectation under one strategy measure."""
    _check_variable(theta.model, x)
    return float(theta.leaf_probabilities() @ x.values)


def sup_over_leaf_measures(probabilities, x: RandomVariable) -> float:
    """Upper expectation over an explicit finite measure family.

    This is the oracle path for NON-rectangular sets: it carries no
    conditional structure, and composing it level by level generally
    overshoots it (the tower property needs closure under pasting, which the
    per-node kernel construction provides and an arbitrary family does not).
    """
    best = -np.inf
    for p in probabilities:
        vec = np.asarray(p, dtype=np.float64)
        if vec.shape != (x.space.n_leaves,) or np.any(vec < 0) \
                or abs(float(vec.sum()) - 1.0) > 1e-9:
            raise ValueError("each entry must be a leaf probability vector")
        best = max(best, float(vec @ x.values))
    if best == -np.inf:
        raise ValueError("need at least one measure")
    return best


def quasi_surely_equal(model: CredalModel, x: RandomVariable, y: RandomVariable,
                       tol: float = 1e-9) -> bool:
    """Equality off the capacity-null set (i.e. on the q.s. support)."""
    _check_variable(model, x)
    _check_variable(model, y)
    sup = model.support_mask()
    return bool(np.max(np.abs(x.values - y.values)[sup], initial=0.0) <= tol)
