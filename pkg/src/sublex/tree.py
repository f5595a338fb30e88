"""Finite filtered sample spaces encoded as leveled rooted trees.

Nodes are stored in breadth-first order, so the depth-t nodes occupy a
contiguous id range and are exactly the atoms of the time-t field.  The root
is the single (trivial) time-0 atom and the nodes at the bottom depth are the
leaves, i.e. the sample space itself.  Everything is immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NotAdaptedError, SizeGuardError

MAX_LEAVES = 10_000_000


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class TreeSpace:
    """A leveled rooted tree: sample space, filtration and path outcomes.

    ``child_counts`` lists, in breadth-first order, how many children each
    node has (0 marks a leaf).  All leaves must sit at the same depth so that
    the bottom level separates every outcome.  ``edge_outcomes`` optionally
    attaches a real number to the edge entering each non-root node (the step
    outcome observed when moving to that node).
    """

    def __init__(self, child_counts: Sequence[int], edge_outcomes=None):
        counts = np.ascontiguousarray(child_counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("child_counts must be a nonempty 1-d sequence")
        if np.any(counts < 0):
            raise ValueError("child counts must be nonnegative")
        n = int(counts.size)
        if 1 + int(counts.sum()) != n:
            raise ValueError("child_counts do not describe a single rooted tree")

        first_child = np.empty(n, dtype=np.int64)
        first_child[0] = 1
        if n > 1:
            np.cumsum(counts[:-1], out=first_child[1:])
            first_child[1:] += 1

        parent = np.full(n, -1, dtype=np.int64)
        internal = counts > 0
        if n > 1:
            parent[1:] = np.repeat(np.nonzero(internal)[0], counts[internal])

        # level layout: breadth-first ids make each depth a contiguous block
        starts = [0]
        pos = 0
        size = 1
        while True:
            nxt = int(counts[pos : pos + size].sum())
            pos += size
            starts.append(pos)
            if nxt == 0:
                break
            size = nxt
        if pos != n:
            raise ValueError("nodes are not in breadth-first level order")
        depth = len(starts) - 2

        node_depth = np.empty(n, dtype=np.int64)
        for t in range(depth + 1):
            node_depth[starts[t] : starts[t + 1]] = t

        if np.any(counts[: starts[depth]] == 0):
            raise ValueError("every non-leaf node needs at least one child "
                             "(all leaves must share the bottom depth)")

        n_leaves = starts[depth + 1] - starts[depth]
        if n_leaves > MAX_LEAVES:
            raise SizeGuardError(f"{n_leaves} leaves exceeds the {MAX_LEAVES} guard")

        # contiguous leaf span under each node, computed bottom-up per level
        leaf_lo = np.empty(n, dtype=np.int64)
        leaf_hi = np.empty(n, dtype=np.int64)
        lo = starts[depth]
        leaf_lo[lo:] = np.arange(n_leaves)
        leaf_hi[lo:] = leaf_lo[lo:] + 1
        for t in range(depth - 1, -1, -1):
            ids = np.arange(starts[t], starts[t + 1])
            leaf_lo[ids] = leaf_lo[first_child[ids]]
            leaf_hi[ids] = leaf_hi[first_child[ids] + counts[ids] - 1]

        if edge_outcomes is not None:
            eo = np.ascontiguousarray(edge_outcomes, dtype=np.float64)
            if eo.shape != (n,):
                raise ValueError("edge_outcomes must have one entry per node")
            if n > 1 and not np.all(np.isfinite(eo[1:])):
                raise ValueError("edge outcomes must be finite")
            eo = eo.copy()
            eo[0] = np.nan
            self.edge_outcome = _readonly(eo)
        else:
            self.edge_outcome = None

        self.child_counts = _readonly(counts)
        self.first_child = _readonly(first_child)
        self.parent = _readonly(parent)
        self.node_depth = _readonly(node_depth)
        self.depth_start = tuple(starts)
        self.depth = depth
        self.n_nodes = n
        self.n_leaves = int(n_leaves)
        self._leaf_lo = _readonly(leaf_lo)
        self._leaf_hi = _readonly(leaf_hi)

    # -- layout helpers ----------------------------------------------------

    @property
    def leaf_offset(self) -> int:
        return self.depth_start[self.depth]

    def atoms(self, t: int) -> tuple[int, int]:
        """Id range (start, stop) of the depth-t nodes."""
        if not 0 <= t <= self.depth:
            raise ValueError(f"time {t} outside [0, {self.depth}]")
        return self.depth_start[t], self.depth_start[t + 1]

    def n_atoms(self, t: int) -> int:
        a, b = self.atoms(t)
        return b - a

    def leaf_span(self, node: int) -> tuple[int, int]:
        """Contiguous range of leaf positions below ``node``."""
        return int(self._leaf_lo[node]), int(self._leaf_hi[node])

    def atom_leaf_counts(self, t: int) -> np.ndarray:
        a, b = self.atoms(t)
        return self._leaf_hi[a:b] - self._leaf_lo[a:b]

    def leaf_ancestors(self, t: int) -> np.ndarray:
        """Node id of each leaf's depth-t ancestor."""
        a, b = self.atoms(t)
        anc = np.arange(self.leaf_offset, self.n_nodes, dtype=np.int64)
        for _ in range(self.depth - t):
            anc = self.parent[anc]
        return anc

    def lift(self, t: int, atom_values) -> np.ndarray:
        """Expand per-atom values at depth t to a leaf-indexed vector."""
        vals = np.asarray(atom_values, dtype=np.float64)
        if vals.shape != (self.n_atoms(t),):
            raise ValueError("value count does not match the depth-%d atoms" % t)
        return np.repeat(vals, self.atom_leaf_counts(t))

    def project(self, t: int, leaf_values, atol: float = 1e-12) -> np.ndarray:
        """Collapse leaf values to depth-t atoms, checking constancy."""
        vals = np.asarray(leaf_values, dtype=np.float64)
        if vals.shape != (self.n_leaves,):
            raise ValueError("leaf value count mismatch")
        a, b = self.atoms(t)
        out = vals[self._leaf_lo[a:b]]
        if np.max(np.abs(self.lift(t, out) - vals), initial=0.0) > atol:
            raise NotAdaptedError(f"values are not constant on the depth-{t} atoms")
        return out

    def step_outcomes(self, i: int) -> np.ndarray:
        """Leaf-indexed outcome of step i (the edge taken between depths i-1 and i)."""
        if self.edge_outcome is None:
            raise ValueError("this space carries no edge outcomes")
        if not 1 <= i <= self.depth:
            raise ValueError(f"step {i} outside [1, {self.depth}]")
        a, b = self.atoms(i)
        return np.repeat(self.edge_outcome[a:b], self._leaf_hi[a:b] - self._leaf_lo[a:b])

    def path_matrix(self) -> np.ndarray:
        """(depth, n_leaves) matrix of step outcomes along each leaf's path."""
        if self.depth == 0:
            return np.zeros((0, self.n_leaves))
        return np.stack([self.step_outcomes(i) for i in range(1, self.depth + 1)])

    def is_uniform_level(self, t: int) -> bool:
        a, b = self.atoms(t)
        c = self.child_counts[a:b]
        return bool(c.size) and bool(np.all(c == c[0]))

    def __repr__(self):
        return f"TreeSpace(depth={self.depth}, leaves={self.n_leaves})"

    @classmethod
    def uniform(cls, depth: int, branching: int, outcomes=None) -> "TreeSpace":
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if branching < 1:
            raise ValueError("branching must be >= 1")
        if branching ** depth > MAX_LEAVES:
            raise SizeGuardError(
                f"{branching}^{depth} leaves exceeds the {MAX_LEAVES} guard")
        sizes = [branching ** t for t in range(depth + 1)]
        counts = np.concatenate(
            [np.full(sum(sizes[:-1]), branching, dtype=np.int64),
             np.zeros(sizes[-1], dtype=np.int64)]
        ) if depth > 0 else np.zeros(1, dtype=np.int64)
        eo = None
        if outcomes is not None:
            out = np.asarray(outcomes, dtype=np.float64)
            if out.shape != (branching,):
                raise ValueError("need exactly one outcome per branch")
            eo = np.concatenate([[np.nan]] + [np.tile(out, sizes[t - 1])
                                              for t in range(1, depth + 1)])
        return cls(counts, eo)


def build_product_space(depth: int, branching: int, outcomes) -> TreeSpace:
    """Uniform product space: every node branches the same way and edge k
    carries ``outcomes[k]``."""
    out = np.asarray(outcomes, dtype=np.float64)
    if out.shape != (branching,):
        raise ValueError("len(outcomes) must equal branching")
    if not np.all(np.isfinite(out)):
        raise ValueError("outcomes must be finite")
    return TreeSpace.uniform(depth, branching, out)


class RandomVariable:
    """A finite real function of the outcome, stored leaf-indexed."""

    __slots__ = ("space", "values")

    def __init__(self, space: TreeSpace, values):
        vals = np.ascontiguousarray(values, dtype=np.float64)
        if vals.shape != (space.n_leaves,):
            raise ValueError("need one value per leaf")
        if not np.all(np.isfinite(vals)):
            raise ValueError("random variables must be finite-valued")
        self.space = space
        self.values = _readonly(vals.copy())

    @classmethod
    def constant(cls, space: TreeSpace, c: float) -> "RandomVariable":
        return cls(space, np.full(space.n_leaves, float(c)))

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> "RandomVariable":
        return RandomVariable(self.space, fn(self.values))

    def _coerce(self, other):
        if isinstance(other, RandomVariable):
            if other.space is not self.space:
                raise ValueError("operands live on different spaces")
            return other.values
        return float(other)

    def __add__(self, other):
        return RandomVariable(self.space, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RandomVariable(self.space, self.values - self._coerce(other))

    def __rsub__(self, other):
        return RandomVariable(self.space, self._coerce(other) - self.values)

    def __mul__(self, other):
        return RandomVariable(self.space, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RandomVariable(self.space, -self.values)

    def __abs__(self):
        return RandomVariable(self.space, np.abs(self.values))

    def __pow__(self, k):
        return RandomVariable(self.space, self.values ** k)

    def positive_part(self) -> "RandomVariable":
        return RandomVariable(self.space, np.maximum(self.values, 0.0))

    def negative_part(self) -> "RandomVariable":
        return RandomVariable(self.space, np.maximum(-self.values, 0.0))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def __repr__(self):
        return f"RandomVariable({np.array2string(self.values, threshold=8)})"


def _measurability_level(space: TreeSpace, mask: np.ndarray) -> int:
    """Smallest t such that the leaf set is a union of depth-t subtrees."""
    levels_all = [None] * (space.depth + 1)
    levels_any = [None] * (space.depth + 1)
    levels_all[space.depth] = mask.copy()
    levels_any[space.depth] = mask.copy()
    for t in range(space.depth - 1, -1, -1):
        a, b = space.atoms(t)
        cnt = space.child_counts[a:b]
        if space.is_uniform_level(t):
            k = int(cnt[0])
            levels_all[t] = levels_all[t + 1].reshape(-1, k).all(axis=1)
            levels_any[t] = levels_any[t + 1].reshape(-1, k).any(axis=1)
        else:
            fc = space.first_child[a:b] - space.depth_start[t + 1]
            la = np.empty(b - a, dtype=bool)
            ln = np.empty(b - a, dtype=bool)
            for j in range(b - a):
                sl = slice(fc[j], fc[j] + cnt[j])
                la[j] = levels_all[t + 1][sl].all()
                ln[j] = levels_any[t + 1][sl].any()
            levels_all[t] = la
            levels_any[t] = ln
    for t in range(space.depth + 1):
        if np.array_equal(levels_all[t], levels_any[t]):
            return t
    return space.depth


class Event:
    """A measurable set of outcomes plus its computed measurability level."""

    __slots__ = ("space", "mask", "level")

    def __init__(self, space: TreeSpace, mask):
        m = np.ascontiguousarray(mask, dtype=bool)
        if m.shape != (space.n_leaves,):
            raise ValueError("need one flag per leaf")
        self.space = space
        self.mask = _readonly(m.copy())
        self.level = _measurability_level(space, self.mask)

    def complement(self) -> "Event":
        return Event(self.space, ~self.mask)

    def indicator(self) -> RandomVariable:
        return RandomVariable(self.space, self.mask.astype(np.float64))

    def __or__(self, other: "Event") -> "Event":
        if other.space is not self.space:
            raise ValueError("events live on different spaces")
        return Event(self.space, self.mask | other.mask)

    def __and__(self, other: "Event") -> "Event":
        if other.space is not self.space:
            raise ValueError("events live on different spaces")
        return Event(self.space, self.mask & other.mask)

    def symmetric_difference(self, other: "Event") -> "Event":
        if other.space is not self.space:
            raise ValueError("events live on different spaces")
        return Event(self.space, self.mask ^ other.mask)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def __repr__(self):
        return f"Event(level={self.level}, size={self.size})"


def event_from_predicate(space: TreeSpace, predicate) -> Event:
    """Build an event by evaluating ``predicate(leaf_index, path_outcomes)``
    on every leaf.  ``path_outcomes`` is the tuple of step outcomes along the
    leaf's path (empty when the space carries none)."""
    if space.edge_outcome is not None and space.depth > 0:
        paths = space.path_matrix().T
        mask = np.fromiter(
            (bool(predicate(i, tuple(paths[i]))) for i in range(space.n_leaves)),
            dtype=bool, count=space.n_leaves)
    else:
        mask = np.fromiter(
            (bool(predicate(i, ())) for i in range(space.n_leaves)),
            dtype=bool, count=space.n_leaves)
    return Event(space, mask)


class AdaptedProcess:
    """Node-indexed values per time level, adapted by construction."""

    __slots__ = ("space", "start", "levels")

    def __init__(self, space: TreeSpace, start: int, levels):
        if not 0 <= start <= space.depth:
            raise ValueError("start time outside the filtration range")
        lv = []
        for i, arr in enumerate(levels):
            a = np.ascontiguousarray(arr, dtype=np.float64)
            t = start + i
            if t > space.depth:
                raise ValueError("process runs past the bottom depth")
            if a.shape != (space.n_atoms(t),):
                raise ValueError(f"level {t} has the wrong number of atoms")
            if not np.all(np.isfinite(a)):
                raise ValueError("process values must be finite")
            lv.append(_readonly(a.copy()))
        if not lv:
            raise ValueError("a process needs at least one level")
        self.space = space
        self.start = start
        self.levels = tuple(lv)

    @classmethod
    def from_leaf_rows(cls, space: TreeSpace, rows, start: int = 0,
                       atol: float = 1e-12) -> "AdaptedProcess":
        """Project leaf-valued rows onto their atoms (raises if not adapted)."""
        return cls(space, start,
                   [space.project(start + i, r, atol=atol) for i, r in enumerate(rows)])

    @property
    def times(self) -> range:
        return range(self.start, self.start + len(self.levels))

    @property
    def end(self) -> int:
        return self.start + len(self.levels) - 1

    def value_at(self, t: int) -> np.ndarray:
        if t not in self.times:
            raise ValueError(f"time {t} not in {self.times}")
        return self.levels[t - self.start]

    def leaf_view(self, t: int) -> np.ndarray:
        return self.space.lift(t, self.value_at(t))

    def apply(self, fn) -> "AdaptedProcess":
        return AdaptedProcess(self.space, self.start, [fn(v) for v in self.levels])

    def at_stopping(self, stopping: "StoppingTime") -> RandomVariable:
        """The sampled variable, leaf by leaf, at the stopping depth."""
        if stopping.space is not self.space:
            raise ValueError("stopping time lives on a different space")
        if stopping.min_depth < self.start or stopping.max_depth > self.end:
            raise ValueError("stopping time leaves the process time range")
        out = np.empty(self.space.n_leaves)
        for node in stopping.nodes:
            d = int(self.space.node_depth[node])
            lo, hi = self.space.leaf_span(node)
            out[lo:hi] = self.value_at(d)[node - self.space.depth_start[d]]
        return RandomVariable(self.space, out)

    def __repr__(self):
        return f"AdaptedProcess(times={list(self.times)})"


class StoppingTime:
    """An antichain of nodes covering every leaf; equivalently a measurable
    rule leaf -> stopping depth."""

    __slots__ = ("space", "nodes")

    def __init__(self, space: TreeSpace, nodes):
        ids = [int(v) for v in nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate stopping nodes")
        for v in ids:
            if not 0 <= v < space.n_nodes:
                raise ValueError(f"node {v} outside the tree")
        ids.sort(key=lambda v: space.leaf_span(v)[0])
        covered = 0
        for v in ids:
            lo, hi = space.leaf_span(v)
            if lo != covered:
                raise ValueError("stopping nodes do not partition the leaves")
            covered = hi
        if covered != space.n_leaves:
            raise ValueError("stopping nodes do not cover every leaf")
        self.space = space
        self.nodes = tuple(ids)

    @classmethod
    def constant(cls, space: TreeSpace, t: int) -> "StoppingTime":
        a, b = space.atoms(t)
        return cls(space, range(a, b))

    @classmethod
    def from_leaf_depths(cls, space: TreeSpace, taus) -> "StoppingTime":
        """Validate {tau <= t} measurability for every t and build the antichain."""
        tau = np.asarray(taus, dtype=np.int64)
        if tau.shape != (space.n_leaves,):
            raise ValueError("need one stopping depth per leaf")
        if tau.min(initial=0) < 0 or tau.max(initial=0) > space.depth:
            raise ValueError(f"stopping depths must lie in [0, {space.depth}]")
        for t in range(space.depth + 1):
            space.project(t, (tau <= t).astype(np.float64))
        anc = np.arange(space.leaf_offset, space.n_nodes, dtype=np.int64)
        for _ in range(space.depth):
            up = space.parent[anc]
            anc = np.where(space.node_depth[anc] > tau, up, anc)
        return cls(space, np.unique(anc))

    @classmethod
    def first_hitting(cls, process: AdaptedProcess, threshold: float,
                      op: str = ">=", cap: int | None = None) -> "StoppingTime":
        """inf{t >= max(start, 1): X_t meets the threshold}, capped at ``cap``
        (default: the last process time)."""
        space = process.space
        cmp = {">=": np.greater_equal, "<=": np.less_equal,
               ">": np.greater, "<": np.less}[op]
        last = process.end if cap is None else int(cap)
        if last not in process.times:
            raise ValueError("cap outside the process time range")
        tau = np.full(space.n_leaves, last, dtype=np.int64)
        unhit = np.ones(space.n_leaves, dtype=bool)
        for t in process.times:
            if t < 1 or t > last:
                continue
            hit = cmp(process.leaf_view(t), threshold) & unhit
            tau[hit] = t
            unhit &= ~hit
        return cls.from_leaf_depths(space, tau)

    def leaf_depths(self) -> np.ndarray:
        out = np.empty(self.space.n_leaves, dtype=np.int64)
        for v in self.nodes:
            lo, hi = self.space.leaf_span(v)
            out[lo:hi] = self.space.node_depth[v]
        return out

    @property
    def min_depth(self) -> int:
        return int(min(self.space.node_depth[v] for v in self.nodes))

    @property
    def max_depth(self) -> int:
        return int(max(self.space.node_depth[v] for v in self.nodes))

    def __le__(self, other: "StoppingTime") -> bool:
        return bool(np.all(self.leaf_depths() <= other.leaf_depths()))

    def __repr__(self):
        return f"StoppingTime(nodes={self.nodes})"


def is_stopping_time(space: TreeSpace, taus):
    """Check {tau <= t} in F_t for all t.  Returns (ok, antichain or None)."""
    tau = np.asarray(taus, dtype=np.int64)
    if tau.shape != (space.n_leaves,):
        raise ValueError("need one stopping depth per leaf")
    if tau.min(initial=0) < 0 or tau.max(initial=0) > space.depth:
        raise ValueError(f"stopping depths must lie in [0, {space.depth}]")
    try:
        st = StoppingTime.from_leaf_depths(space, tau)
    except NotAdaptedError:
        return False, None
    return True, st
