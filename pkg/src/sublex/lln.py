"""Seeded simulation harness for the limit theorems.

Quasi-sure statements are exercised against a fixed battery of kernel
selection strategies: constants on each kernel, a few periodic switchers,
seeded random mixers and two greedy adversaries.  Each strategy runs R
replications; the per-strategy statistic is computed on the replication-mean
trajectory (strategy-wise means are also what the small-horizon consistency
check compares against the exact engine), while per-replication extremes are
reported as diagnostics.

Everything is deterministic given the master seed: each strategy draws from
its own spawned generator, so results do not depend on the thread schedule.
The ``SUBLEX_THREADS`` environment variable caps worker count.
"""

from __future__ import annotations

import bisect
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .credal import CredalModel, upper_expectation
from .distribution import StepTemplate
from .errors import DivergenceError, MeanUncertainError, PreconditionError
from .tree import Event

CSV_HEADER = "strategy,replication,n,S,S_over_b"


def thread_budget() -> int:
    cap = os.environ.get("SUBLEX_THREADS")
    workers = min(os.cpu_count() or 1, 4)
    if cap:
        workers = max(1, min(workers, int(cap)))
    return workers


@dataclass(frozen=True)
class ScenarioStrategy:
    """A deterministic rule for picking a kernel at every step."""

    name: str
    kind: str          # constant | periodic | random | adaptive
    param: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "periodic", "random", "adaptive"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")


def default_battery(n_kernels: int) -> tuple[ScenarioStrategy, ...]:
    """Constants on each kernel, 3 periodic switchers, 8 seeded mixers and
    2 greedy adversaries (one chasing |S|, one chasing drift)."""
    strats = [ScenarioStrategy(f"const{k}", "constant", (k,))
              for k in range(n_kernels)]
    patterns = [(0, 1), (0, 0, 1), tuple([0] * 50 + [1] * 50)]
    for i, pat in enumerate(patterns):
        strats.append(ScenarioStrategy(
            f"periodic{i}", "periodic", tuple(p % n_kernels for p in pat)))
    strats.extend(ScenarioStrategy(f"rand{i}", "random", (i,)) for i in range(8))
    strats.append(ScenarioStrategy("adv-abs", "adaptive", ("abs",)))
    strats.append(ScenarioStrategy("adv-drift", "adaptive", ("drift",)))
    return tuple(strats)


def strategies_from_names(names, n_kernels: int) -> tuple[ScenarioStrategy, ...]:
    by_name = {s.name: s for s in default_battery(n_kernels)}
    out = []
    for raw in names:
        nm = raw.strip()
        if nm not in by_name:
            raise ValueError(f"unknown strategy {nm!r}; know {sorted(by_name)}")
        out.append(by_name[nm])
    if not out:
        raise ValueError("empty strategy list")
    return tuple(out)


@dataclass(frozen=True)
class SimulationConfig:
    steps: int = 100_000
    reps: int = 32
    seed: int = 0
    burn_in: int = 10_000
    tolerance: float = 0.02
    strategies: tuple[ScenarioStrategy, ...] | None = None
    checkpoints: int = 200

    def __post_init__(self):
        if self.steps < 1 or self.reps < 1:
            raise ValueError("steps and reps must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    def effective_burn_in(self) -> int:
        return min(self.burn_in, self.steps - 1)

    def battery(self, n_kernels: int) -> tuple[ScenarioStrategy, ...]:
        return self.strategies if self.strategies else default_battery(n_kernels)


@dataclass(frozen=True)
class StrategyRun:
    strategy: ScenarioStrategy
    mean_s: np.ndarray          # replication-mean cumulative sum, length N
    rep_final: np.ndarray       # S_N per replication
    rep_tail_absmax: np.ndarray  # per rep: max_{n>=N0} |S_n|/b_n
    rep_tail_range: np.ndarray   # per rep: max-min of S_n over the tail
    checkpoint_s: np.ndarray     # (reps, n_checkpoints)


@dataclass(frozen=True)
class SimulationResult:
    template: StepTemplate
    config: SimulationConfig
    bn: np.ndarray
    checkpoints: np.ndarray
    runs: tuple[StrategyRun, ...]

    def write_csv(self, fh) -> None:
        fh.write(CSV_HEADER + "\n")
        for run in self.runs:
            for r in range(run.checkpoint_s.shape[0]):
                for j, n in enumerate(self.checkpoints):
                    s = float(run.checkpoint_s[r, j])
                    fh.write(f"{run.strategy.name},{r},{int(n)},{s!r},"
                             f"{float(s / self.bn[int(n) - 1])!r}\n")

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _bn_array(spec, n: int) -> np.ndarray:
    idx = np.arange(1, n + 1, dtype=np.float64)
    if isinstance(spec, str):
        if spec == "n":
            b = idx
        elif spec == "sqrt":
            b = np.sqrt(idx)
        elif spec == "log":
            b = np.log(idx + 1.0)
        elif spec == "1":
            b = np.ones(n)
        elif spec == "1/i":
            b = 1.0 / idx
        else:
            raise ValueError(f"unknown weight/denominator spec {spec!r}")
    elif callable(spec):
        b = np.asarray([float(spec(int(i))) for i in idx])
    else:
        b = np.asarray(spec, dtype=np.float64)
        if b.size < n:
            raise ValueError("sequence shorter than the step count")
        b = b[:n]
    return b


def _validate_bn(b: np.ndarray):
    if np.any(b <= 0.0):
        raise PreconditionError("b_n must be positive")
    if np.any(np.diff(b) < 0.0):
        raise PreconditionError("b_n must be nondecreasing")


def dyadic_series_trend(terms: np.ndarray):
    """Crude convergence classifier for a nonnegative series, from the decay
    of dyadic block sums.  Returns (verdict, partial_sum, tail_estimate);
    verdict is one of convergent / divergent / inconclusive."""
    terms = np.asarray(terms, dtype=np.float64)
    if np.any(terms < -1e-15):
        raise ValueError("series terms must be nonnegative")
    total = float(terms.sum())
    if total == 0.0:
        return "convergent", 0.0, 0.0
    blocks = []
    j = 1
    while 2 * j - 1 <= terms.size:  # complete dyadic blocks only
        blocks.append(float(terms[j - 1: 2 * j - 1].sum()))
        j *= 2
    tail_blocks = [b for b in blocks[-4:] if b > 0]
    if len(tail_blocks) < 2:
        return "convergent", total, 0.0
    ratios = [b2 / b1 for b1, b2 in zip(tail_blocks, tail_blocks[1:])]
    worst = max(ratios)
    if worst <= 0.85:
        q = worst
        tail = tail_blocks[-1] * q / (1.0 - q)
        return "convergent", total, float(tail)
    if min(ratios) >= 0.95:
        return "divergent", total, math.inf
    return "inconclusive", total, math.inf


def _kernel_cdfs(template: StepTemplate):
    return [np.cumsum(k) for k in template.kernels]


def _sample_outcomes(u: np.ndarray, idx: np.ndarray, template: StepTemplate) -> np.ndarray:
    """Inverse-CDF sampling; idx broadcasts against u's (reps, steps) shape."""
    out = np.empty_like(u)
    outcomes = np.asarray(template.outcomes)
    idx = np.broadcast_to(idx, u.shape)
    for k, cdf in enumerate(_kernel_cdfs(template)):
        mask = idx == k
        if mask.any():
            out[mask] = outcomes[np.searchsorted(cdf, u[mask], side="right")
                                 .clip(max=len(outcomes) - 1)]
    return out


def _adaptive_paths(template: StepTemplate, target: str, u: np.ndarray,
                    w: np.ndarray, center: float) -> np.ndarray:
    """Greedy one-step kernel choice per replication; heuristic adversary."""
    means = template.kernel_means()
    outcomes = list(template.outcomes)
    cdfs = [list(np.cumsum(k)) for k in template.kernels]
    n_out = len(outcomes)
    reps, steps = u.shape
    inc = np.empty_like(u)
    hi = int(np.argmax(means))
    lo = int(np.argmin(means))
    for r in range(reps):
        s = 0.0
        urow = u[r]
        row = inc[r]
        for i in range(steps):
            wi = w[i]
            if target == "drift":
                k = hi
            else:
                up = abs(s + wi * (means[hi] - center))
                dn = abs(s + wi * (means[lo] - center))
                k = hi if up >= dn else lo
            pos = bisect.bisect_right(cdfs[k], urow[i])
            if pos >= n_out:
                pos = n_out - 1
            x = wi * (outcomes[pos] - center)
            row[i] = x
            s += x
    return inc


def simulate_paths(template: StepTemplate, config: SimulationConfig,
                   weights=None, center: float = 0.0,
                   bn="n") -> SimulationResult:
    """Simulate S_n = sum_i w_i (X_i - center) under every battery strategy.

    Deterministic given (config, seed); replications of one strategy share a
    spawned generator, so thread scheduling cannot change any number.
    """
    n = config.steps
    w = np.ones(n) if weights is None else _bn_array(weights, n)
    b = _bn_array(bn, n)
    strategies = config.battery(len(template.kernels))
    n0 = config.effective_burn_in()
    cps = np.unique(np.linspace(1, n, min(config.checkpoints, n)).astype(np.int64))

    def run_one(args) -> StrategyRun:
        sidx, strat = args
        rng_out = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(sidx, 0)))
        u = rng_out.random((config.reps, n))
        means = template.kernel_means()
        degenerate_greedy = np.ptp(means) == 0.0
        if strat.kind == "adaptive" and strat.param[0] == "abs" and not degenerate_greedy:
            inc = _adaptive_paths(template, "abs", u, w, center)
        else:
            if strat.kind == "adaptive":
                # drift chaser (or a greedy tie) is just a constant choice
                idx = np.full(n, int(np.argmax(means)), dtype=np.int64)
            elif strat.kind == "constant":
                idx = np.full(n, strat.param[0] % len(template.kernels),
                              dtype=np.int64)
            elif strat.kind == "periodic":
                pat = np.asarray(strat.param, dtype=np.int64)
                idx = pat[np.arange(n) % pat.size]
            else:
                rng_k = np.random.default_rng(
                    np.random.SeedSequence(config.seed, spawn_key=(sidx, 1)))
                idx = rng_k.integers(0, len(template.kernels),
                                     size=(config.reps, n))
            inc = w * (_sample_outcomes(u, idx, template) - center)
        s = np.cumsum(inc, axis=1)
        tail = s[:, n0:]
        tail_b = b[n0:]
        return StrategyRun(
            strategy=strat,
            mean_s=s.mean(axis=0),
            rep_final=s[:, -1].copy(),
            rep_tail_absmax=np.max(np.abs(tail) / tail_b, axis=1),
            rep_tail_range=tail.max(axis=1) - tail.min(axis=1),
            checkpoint_s=s[:, cps - 1].copy(),
        )

    jobs = list(enumerate(strategies))
    workers = thread_budget()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run_one, jobs))
    else:
        runs = [run_one(j) for j in jobs]
    return SimulationResult(template, config, b, cps, tuple(runs))


@dataclass(frozen=True)
class StrategyOutcome:
    name: str
    statistic: float
    rep_worst: float
    limit: float


@dataclass(frozen=True)
class ConvergenceVerdict:
    check: str
    outcomes: tuple[StrategyOutcome, ...]
    tolerance: float
    steps: int
    reps: int
    burn_in: int
    seed: int
    descriptive: bool = False
    details: tuple[tuple[str, object], ...] = ()
    result: SimulationResult | None = field(default=None, compare=False, repr=False)

    @property
    def passed(self) -> bool:
        if self.descriptive:
            return True
        return all(o.statistic <= self.tolerance for o in self.outcomes)

    @property
    def pass_fraction(self) -> float:
        ok = sum(1 for o in self.outcomes if o.statistic <= self.tolerance)
        return ok / len(self.outcomes)

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "passed": self.passed,
            "pass_fraction": self.pass_fraction,
            "descriptive": self.descriptive,
            "tolerance": self.tolerance,
            "steps": self.steps,
            "reps": self.reps,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "strategies": [
                {"name": o.name, "statistic": o.statistic,
                 "rep_worst": o.rep_worst, "limit": o.limit}
                for o in self.outcomes
            ],
            "details": {k: v for k, v in self.details},
        }


def _verdict(check, result, stats, tol, descriptive=False, details=()):
    cfg = result.config
    return ConvergenceVerdict(
        check=check, outcomes=tuple(stats), tolerance=tol,
        steps=cfg.steps, reps=cfg.reps, burn_in=cfg.effective_burn_in(),
        seed=cfg.seed, descriptive=descriptive, details=tuple(details),
        result=result)


def series_convergence_check(template: StepTemplate, weights,
                             config: SimulationConfig) -> ConvergenceVerdict:
    """Scaled-step series sum_i w_i (X_i - E X_i): verified summable variances,
    then a Cauchy statistic (tail range of S) per strategy."""
    n = config.steps
    w = _bn_array(weights, n)
    m2 = template.centered_second_moment()
    verdict, partial, tail = dyadic_series_trend(w * w * m2)
    if verdict != "convergent":
        raise DivergenceError(
            f"sum of w_i^2 E(Xbar^2) looks {verdict} "
            f"(partial sum {partial:.4g}); the series check requires it finite")
    descriptive = not template.is_mean_certain()
    result = simulate_paths(template, config, weights=w,
                            center=template.upper_mean(), bn=np.ones(n))
    n0 = config.effective_burn_in()
    stats = []
    for run in result.runs:
        tail_s = run.mean_s[n0:]
        stats.append(StrategyOutcome(
            run.strategy.name,
            float(tail_s.max() - tail_s.min()),
            float(run.rep_tail_range.max()),
            float(run.mean_s[-1])))
    details = [("variance_series_partial_sum", partial),
               ("variance_series_tail_estimate", tail)]
    if descriptive:
        details.append(("note", "mean-uncertain template: reported "
                                "descriptively only"))
    return _verdict("series", result, stats, config.tolerance,
                    descriptive, details)


def weighted_slln_check(template: StepTemplate, bn,
                        config: SimulationConfig) -> ConvergenceVerdict:
    """Centered sums against an increasing divisor: statistic
    max_{n >= N0} |mean_S_n| / b_n per strategy."""
    n = config.steps
    b = _bn_array(bn, n)
    _validate_bn(b)
    m2 = template.centered_second_moment()
    verdict, partial, tail = dyadic_series_trend(m2 / (b * b))
    if verdict != "convergent":
        raise DivergenceError(
            f"sum of E(Xbar^2)/b_n^2 looks {verdict} "
            f"(partial sum {partial:.4g}); the weighted check requires it finite")
    descriptive = not template.is_mean_certain()
    result = simulate_paths(template, config, weights=None,
                            center=template.upper_mean(), bn=b)
    n0 = config.effective_burn_in()
    stats = []
    for run in result.runs:
        stat = float(np.max(np.abs(run.mean_s[n0:]) / b[n0:]))
        stats.append(StrategyOutcome(
            run.strategy.name, stat,
            float(run.rep_tail_absmax.max()),
            float(run.mean_s[-1] / b[-1])))
    details = [("condition_partial_sum", partial),
               ("condition_tail_estimate", tail)]
    if descriptive:
        details.append(("note", "mean-uncertain template: reported "
                                "descriptively only"))
    return _verdict("weighted", result, stats, config.tolerance,
                    descriptive, details)


def truncation_condition_check(source, horizon: int = 50):
    """Band sums sum_m E(|X| 1_{m-1 < |X| <= m}).  For a bounded template the
    bands vanish past max |X| and the sum is exactly finite; synthetic band
    sequences (for unbounded profiles) are classified by trend only.  Also
    checks the tail consequence E(|X| 1_{|X|>n}) <= sum_{m>n} band_m when the
    bands come from a template."""
    if isinstance(source, StepTemplate):
        top = int(math.ceil(source.max_abs()))
        bands = [source.abs_moment_band(m) for m in range(1, max(top, 1) + 1)]
        verdict = "finite"
        tail_rows = []
        for thr in range(0, top + 1):
            x = np.asarray(source.outcomes)
            lhs = float(max(np.dot(k, np.where(np.abs(x) > thr, np.abs(x), 0.0))
                            for k in source.kernels))
            rhs = float(sum(bands[thr:]))
            tail_rows.append((thr, lhs, rhs, lhs <= rhs + 1e-12))
    else:
        if callable(source):
            bands = [float(source(m)) for m in range(1, horizon + 1)]
        else:
            bands = [float(v) for v in source]
        if any(v < 0 for v in bands):
            raise ValueError("band values must be nonnegative")
        trend, _, _ = dyadic_series_trend(np.asarray(bands))
        verdict = {"convergent": "finite-trend",
                   "divergent": "divergent-trend"}.get(trend, "inconclusive")
        tail_rows = [(n, None, float(sum(bands[n:])), True)
                     for n in range(0, min(len(bands), 8))]
    partial = [float(v) for v in np.cumsum(bands)]
    return TruncationReport(tuple(bands), tuple(partial), verdict,
                            tuple(tail_rows))


@dataclass(frozen=True)
class TruncationReport:
    bands: tuple[float, ...]
    partial_sums: tuple[float, ...]
    verdict: str
    tail_rows: tuple

    @property
    def finite(self) -> bool:
        return self.verdict in ("finite", "finite-trend")

    @property
    def tail_bound_holds(self) -> bool:
        return all(row[3] for row in self.tail_rows)

    def to_dict(self) -> dict:
        return {
            "bands": list(self.bands),
            "partial_sums": list(self.partial_sums),
            "verdict": self.verdict,
            "tail_rows": [list(r) for r in self.tail_rows],
        }


def mean_certain_slln(template: StepTemplate,
                      config: SimulationConfig) -> ConvergenceVerdict:
    """Strong-law check for mean-certain steps: every battery strategy's
    replication-mean S_N / N must land within tolerance of the (single)
    mean.  Mean-uncertain templates are refused and belong to the cluster
    diagnostic."""
    if not template.is_mean_certain():
        raise MeanUncertainError(
            f"upper mean {template.upper_mean():g} != lower mean "
            f"{template.lower_mean():g}; run the cluster diagnostic instead")
    trunc = truncation_condition_check(template)
    if not trunc.finite:
        raise PreconditionError("truncation band sum is not finite")
    mu = template.upper_mean()
    result = simulate_paths(template, config, bn="n")
    n = config.steps
    stats = []
    for run in result.runs:
        limit = float(run.mean_s[-1] / n)
        stats.append(StrategyOutcome(
            run.strategy.name, abs(limit - mu),
            float(np.max(np.abs(run.rep_final / n - mu))),
            limit))
    details = [("mean", mu),
               ("truncation_verdict", trunc.verdict),
               ("truncation_band_sum", float(sum(trunc.bands)))]
    return _verdict("slln", result, stats, config.tolerance, False, details)


def cluster_diagnostic(template: StepTemplate,
                       config: SimulationConfig) -> ConvergenceVerdict:
    """Mean-uncertain limit picture: per-strategy limit points of S_n/n must
    stay inside [lower mean, upper mean]; distinct strategy limits exhibit the
    quasi-sure non-convergence."""
    lo, hi = template.lower_mean(), template.upper_mean()
    result = simulate_paths(template, config, bn="n")
    n = config.steps
    snap_idx = sorted({n // 2, (3 * n) // 4, n})
    stats = []
    limits = []
    for run in result.runs:
        pts = [float(run.mean_s[j - 1] / j) for j in snap_idx]
        worst = max(max(p - hi, lo - p, 0.0) for p in pts)
        limit = pts[-1]
        limits.append(limit)
        stats.append(StrategyOutcome(
            run.strategy.name, worst,
            float(np.max(np.abs(run.rep_final / n - limit))),
            limit))
    gap = max(limits) - min(limits)
    details = [("interval_lower", lo), ("interval_upper", hi),
               ("max_limit_gap", float(gap)),
               ("non_convergence_exhibited", bool(gap > 4 * config.tolerance))]
    if template.is_mean_certain():
        details.append(("note", "interval degenerate, converges"))
    return _verdict("cluster", result, stats, config.tolerance, False, details)


@dataclass(frozen=True)
class BorelCantelliReport:
    union_value: float
    sum_value: float
    tail_rows: tuple  # (start index j, V(union_{k>=j}), sum_{k>=j} V(A_k), ok)
    tolerance: float

    @property
    def holds(self) -> bool:
        return (self.union_value <= self.sum_value + self.tolerance
                and all(r[3] for r in self.tail_rows))

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "union_value": self.union_value,
            "sum_value": self.sum_value,
            "tail_rows": [list(r) for r in self.tail_rows],
            "tolerance": self.tolerance,
        }


def borel_cantelli_bound(model: CredalModel, events,
                         tol: float = 1e-9) -> BorelCantelliReport:
    """Exact sub-additivity bound V(union A_k) <= sum V(A_k), with every tail
    version V(union_{k>=j}) <= sum_{k>=j} V(A_k)."""
    events = list(events)
    if not events:
        raise ValueError("need at least one event")
    for e in events:
        if e.space is not model.space:
            raise ValueError("event lives on a different space")
    caps = [upper_expectation(model, e.indicator()) for e in events]
    mask = np.zeros(model.space.n_leaves, dtype=bool)
    tail_caps = 0.0
    tail = []
    for j in range(len(events) - 1, -1, -1):
        mask = mask | events[j].mask
        tail_caps += caps[j]
        v = upper_expectation(model, Event(model.space, mask).indicator())
        tail.append((j + 1, v, tail_caps, v <= tail_caps + tol))
    tail.reverse()
    union_v = tail[0][1]
    return BorelCantelliReport(union_v, float(sum(caps)), tuple(tail), tol)
