"""Seeded generators for the verification corpora.

The property suites run over random models, variables, processes and
stopping-time pairs; keeping the generators here (rather than inside the
tests) makes the corpora reproducible from a seed and reusable by both the
unit tests and the acceptance gate.

Submartingales come from the two documented recipes: a conditional-tower
process plus a nonnegative adapted cumulative drift, or a convex image of a
tower martingale.
"""

from __future__ import annotations

import numpy as np

from .credal import CredalKernel, CredalModel, conditional_process
from .martingale import CONVEX_BATTERY
from .tree import AdaptedProcess, Event, RandomVariable, StoppingTime, TreeSpace


def random_kernel_set(rng: np.random.Generator, arity: int, max_kernels: int = 3,
                      allow_degenerate: bool = True) -> list[np.ndarray]:
    count = int(rng.integers(1, max_kernels + 1))
    out = []
    for _ in range(count):
        vec = rng.dirichlet(np.full(arity, 0.8))
        if allow_degenerate and arity > 1 and rng.random() < 0.1:
            kill = int(rng.integers(0, arity))
            vec[kill] = 0.0
        vec = vec / vec.sum()
        out.append(vec)
    return out


def random_model(rng: np.random.Generator, max_depth: int = 4,
                 max_branching: int = 3, max_kernels: int = 3,
                 max_strategies: int = 500, value_span: float = 5.0,
                 with_outcomes: bool = True) -> CredalModel:
    """A uniform-shape tree with independent per-node kernel sets, trimmed so
    the pure-strategy count stays brute-forceable."""
    depth = int(rng.integers(1, max_depth + 1))
    branching = int(rng.integers(2, max_branching + 1))
    outcomes = (np.sort(rng.uniform(-value_span, value_span, branching))
                if with_outcomes else None)
    space = TreeSpace.uniform(depth, branching, outcomes)
    sets = {v: random_kernel_set(rng, branching, max_kernels)
            for v in range(space.leaf_offset)}
    internal = list(sets)
    count = 1
    for v in internal:
        count *= len(sets[v])
    order = rng.permutation(internal)
    i = 0
    while count > max_strategies and i < len(order):
        v = int(order[i])
        if len(sets[v]) > 1:
            count //= len(sets[v])
            sets[v] = sets[v][:1]
        i += 1
    return CredalModel(space, CredalKernel.from_sets(space, sets))


def random_variable(rng: np.random.Generator, space: TreeSpace,
                    span: float = 5.0) -> RandomVariable:
    return RandomVariable(space, rng.uniform(-span, span, space.n_leaves))


def random_template(rng: np.random.Generator, max_arity: int = 3,
                    max_kernels: int = 3, span: float = 3.0):
    from .distribution import StepTemplate
    arity = int(rng.integers(2, max_arity + 1))
    outcomes = np.sort(rng.uniform(-span, span, arity))
    kernels = [rng.dirichlet(np.ones(arity)) for _ in
               range(int(rng.integers(1, max_kernels + 1)))]
    return StepTemplate(tuple(outcomes),
                        tuple(tuple(k / k.sum()) for k in kernels))


def random_mean_certain_template(rng: np.random.Generator, max_arity: int = 3,
                                 max_kernels: int = 3, span: float = 3.0):
    """All kernels share one mean: extra kernels are resampled and then
    shifted along a zero-sum direction until their mean matches the first."""
    from .distribution import StepTemplate
    arity = int(rng.integers(2, max_arity + 1))
    outcomes = np.sort(rng.uniform(-span, span, arity))
    while outcomes[-1] - outcomes[0] < 0.5:
        outcomes = np.sort(rng.uniform(-span, span, arity))
    base = rng.dirichlet(np.ones(arity))
    base = base / base.sum()
    target = float(np.dot(base, outcomes))
    kernels = [base]
    want = int(rng.integers(1, max_kernels + 1))
    i, j = 0, arity - 1
    attempts = 0
    while len(kernels) < want:
        attempts += 1
        if attempts > 200:
            kernels.append(base)  # duplicate kernels are legal
            continue
        q = rng.dirichlet(np.ones(arity))
        t = (target - float(np.dot(q, outcomes))) / (outcomes[i] - outcomes[j])
        q = q.copy()
        q[i] += t
        q[j] -= t
        if q.min() >= 0.0:
            kernels.append(q / q.sum())
    return StepTemplate(tuple(outcomes), tuple(tuple(k) for k in kernels))


def random_event(rng: np.random.Generator, space: TreeSpace) -> Event:
    mask = rng.random(space.n_leaves) < rng.uniform(0.15, 0.85)
    return Event(space, mask)


def random_martingale(rng: np.random.Generator, model: CredalModel,
                      span: float = 5.0) -> AdaptedProcess:
    """Tower process of a random terminal variable."""
    return conditional_process(model, random_variable(rng, model.space, span))


def random_submartingale(rng: np.random.Generator, model: CredalModel,
                         span: float = 5.0) -> AdaptedProcess:
    space = model.space
    if rng.random() < 0.5:
        # tower martingale plus a nonnegative adapted cumulative drift
        base = random_martingale(rng, model, span)
        drift = rng.uniform(0.0, span / 4, 1)
        levels = [base.value_at(0) + drift]
        for t in range(1, space.depth + 1):
            carried = np.repeat(drift, space.child_counts[slice(*space.atoms(t - 1))])
            drift = carried + rng.uniform(0.0, span / 4, space.n_atoms(t))
            levels.append(base.value_at(t) + drift)
        return AdaptedProcess(space, 0, levels)
    name = ("square", "abs", "pos", "hinge")[int(rng.integers(0, 4))]
    return random_martingale(rng, model, span).apply(CONVEX_BATTERY[name])


def random_stopping_time(rng: np.random.Generator, space: TreeSpace,
                         stop_prob: float = 0.35) -> StoppingTime:
    """Recursive antichain: stop at a node or descend into all children."""
    nodes = []
    stack = [0]
    while stack:
        v = stack.pop()
        d = int(space.node_depth[v])
        if d == space.depth or rng.random() < stop_prob:
            nodes.append(v)
        else:
            fc = int(space.first_child[v])
            stack.extend(range(fc, fc + int(space.child_counts[v])))
    return StoppingTime(space, nodes)


def refine_stopping_time(rng: np.random.Generator, st: StoppingTime,
                         max_extra: int = 1) -> StoppingTime:
    """A later stopping time T >= S obtained by descending below some
    stopping nodes of S (at most ``max_extra`` levels)."""
    space = st.space
    nodes = []
    for v in st.nodes:
        stack = [(v, 0)]
        while stack:
            u, extra = stack.pop()
            d = int(space.node_depth[u])
            if d == space.depth or extra >= max_extra or rng.random() < 0.5:
                nodes.append(u)
            else:
                fc = int(space.first_child[u])
                stack.extend((c, extra + 1)
                             for c in range(fc, fc + int(space.child_counts[u])))
    return StoppingTime(space, nodes)
