"""Resampling engines and convergence analytics.

Two bootstrap schemes over a results matrix: column-wise redraws trial
indices (the same indices for every question) and row-wise redraws cell
indices independently per question. Each (replicate, model) pair owns a
counter-based random stream, so outputs are bit-identical regardless of
chunking or worker count, and ``resample`` reproduces exactly what the
batched engines consumed.

Rankings inside replicates are point-estimate rankings; the gold standard
is the posterior-mean ranking of the unresampled matrices at the full
trial budget.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from ._rng import DOMAIN_COLUMN, DOMAIN_ROW, stream_rng
from .errors import AllTiedError, InputError
from .methods import Method, parse_method
from .model import ResultsMatrix, WeightVector
from .ranking import RankTable, ScoredModel, rank_with_ci, rank_without_ci

__all__ = [
    "ResampleScheme",
    "ResamplePlan",
    "TauPoint",
    "TauCurve",
    "ConvergenceDistribution",
    "WorstCaseTrajectory",
    "resample",
    "tau_curve",
    "tau_curves",
    "convergence_at_n",
    "convergence_distributions",
    "worst_case_trajectory",
]

_CHUNK_TARGET_BYTES = 64 << 20


def _chunk_size(n_models: int, m: int, c: int, n_max: int) -> int:
    """Replicates per work chunk.

    A pure function of the problem shape (never of the machine), so
    aggregation grouping and therefore float rounding are reproducible.
    """
    per_rep = n_models * m * c * n_max * 2
    return int(min(1024, max(16, _CHUNK_TARGET_BYTES // max(per_rep, 1))))


class ResampleScheme(str, Enum):
    COLUMN = "column"
    ROW = "row"

    @property
    def domain(self) -> int:
        return DOMAIN_COLUMN if self is ResampleScheme.COLUMN else DOMAIN_ROW


@dataclass(frozen=True)
class ResamplePlan:
    """Bootstrap configuration: scheme, replicate count, seed, trial budget."""

    scheme: ResampleScheme
    replicates: int = 10_000
    seed: int = 0
    n_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", ResampleScheme(self.scheme))
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")

    def budget(self, matrix_trials: int) -> int:
        n = self.n_max if self.n_max is not None else matrix_trials
        if not 1 <= n <= matrix_trials:
            raise InputError(f"n_max={n} outside [1, {matrix_trials}]")
        return n


def _draw_indices(
    scheme: ResampleScheme, rng: np.random.Generator, m: int, n_src: int, n_max: int
) -> np.ndarray:
    if scheme is ResampleScheme.COLUMN:
        return rng.integers(0, n_src, size=n_max)
    return rng.integers(0, n_src, size=(m, n_max))


def resample(
    matrix: ResultsMatrix, plan: ResamplePlan, replicate_index: int, stream: int = 0
) -> ResultsMatrix:
    """One bootstrap replicate of ``matrix``; deterministic in all arguments.

    Column-wise applies one drawn index set to every row; row-wise draws
    independently per row. ``stream`` distinguishes models inside
    multi-model runs, so ``resample(matrix_i, plan, r, stream=i)`` is the
    exact input the batched engines scored.
    """
    n_max = plan.budget(matrix.trials)
    rng = stream_rng(plan.seed, plan.scheme.domain, replicate_index, stream)
    idx = _draw_indices(plan.scheme, rng, matrix.questions, matrix.trials, n_max)
    if plan.scheme is ResampleScheme.COLUMN:
        cells = matrix.cells[:, idx]
    else:
        cells = np.take_along_axis(matrix.cells, idx, axis=1)
    return ResultsMatrix(cells, matrix.num_categories, matrix.question_ids)


# -- shared multi-model machinery --------------------------------------------

def _model_items(matrices) -> list[tuple[str, ResultsMatrix]]:
    if isinstance(matrices, Mapping):
        items = list(matrices.items())
    else:
        items = [(m.model_id, m.matrix) if hasattr(m, "matrix") else m for m in matrices]
    if len(items) < 2:
        raise InputError("need at least two models to rank")
    shapes = {(mx.questions, mx.trials, mx.num_categories) for _, mx in items}
    if len(shapes) > 1:
        raise InputError(f"matrices disagree on shape/categories: {sorted(shapes)}")
    return items


def gold_table(
    matrices, n_max: int | None = None, weights: WeightVector | None = None
) -> RankTable:
    """Posterior-mean ranking of the unresampled matrices at the trial budget."""
    from .bayes import evaluate_performance

    items = _model_items(matrices)
    n = n_max if n_max is not None else items[0][1].trials
    scored = []
    for model_id, mx in items:
        summ = evaluate_performance(mx.prefix(n), weights=weights)
        scored.append(ScoredModel(model_id, summ.mu, summ.sigma))
    return rank_without_ci(scored)


def _pair_structure(gold: RankTable, model_ids: Sequence[str]):
    """Pair indices, gold pair signs, and gold tie-pair count for tau-b."""
    ranks = gold.ranks()
    g = np.array([-ranks[m] for m in model_ids], dtype=float)  # higher = better
    n = len(model_ids)
    iu, ju = np.triu_indices(n, k=1)
    sg = np.sign(g[iu] - g[ju])
    n0 = n * (n - 1) // 2
    n2 = int((sg == 0).sum())
    if n2 == n0:
        raise AllTiedError("gold ranking entirely tied; tau-b undefined")
    return iu, ju, sg, n0, n2


def _gold_order(gold: RankTable, model_ids: Sequence[str]):
    """Model positions sorted by gold rank and the strictness of each step."""
    ranks = gold.ranks()
    perm = sorted(range(len(model_ids)), key=lambda i: (ranks[model_ids[i]], i))
    rank_seq = [ranks[model_ids[i]] for i in perm]
    strict = np.array(
        [rank_seq[p + 1] > rank_seq[p] for p in range(len(perm) - 1)], dtype=bool
    )
    return np.asarray(perm), strict


def _tau_against_gold(scores: np.ndarray, iu, ju, sg, n0, n2):
    """Vectorized tau-b of each replicate's scores against the gold ranking."""
    diff = scores[:, iu] - scores[:, ju]
    ss = np.sign(diff)
    ncd = ss @ sg
    n1 = (ss == 0.0).sum(axis=1)
    denom_sq = (n0 - n1) * (n0 - n2)
    valid = denom_sq > 0
    tau = np.zeros(scores.shape[0])
    np.divide(ncd, np.sqrt(np.where(valid, denom_sq, 1.0)), out=tau, where=valid)
    return tau, valid


def _match_gold(scores: np.ndarray, perm: np.ndarray, strict: np.ndarray) -> np.ndarray:
    """True where a replicate's dense ranking equals the gold ranking.

    Walking models in gold order, the score sequence must fall strictly
    where gold falls strictly and tie exactly where gold ties; that pins
    both the order and the tie structure.
    """
    s = scores[:, perm]
    d = s[:, :-1] - s[:, 1:]
    ok = np.where(strict[None, :], d > 0, d == 0)
    return ok.all(axis=1)


def _chunk_counts(
    cells_list: list[np.ndarray],
    num_categories: int,
    plan: ResamplePlan,
    n_max: int,
    rep_start: int,
    rep_stop: int,
) -> np.ndarray:
    """Cumulative per-category counts of resampled prefixes.

    Returns int16 array (n_models, reps, M, C, n_max): counts of
    categories 1..C among the first n resampled trials (category 0 is
    implicit). Uses the same streams as ``resample``.
    """
    n_models = len(cells_list)
    m, n_src = cells_list[0].shape
    c = num_categories - 1
    reps = rep_stop - rep_start
    out = np.empty((n_models, reps, m, c, n_max), dtype=np.int16)
    for s, cells in enumerate(cells_list):
        for r in range(rep_start, rep_stop):
            rng = stream_rng(plan.seed, plan.scheme.domain, r, s)
            idx = _draw_indices(plan.scheme, rng, m, n_src, n_max)
            res = cells[:, idx] if plan.scheme is ResampleScheme.COLUMN else np.take_along_axis(cells, idx, axis=1)
            for k in range(1, num_categories):
                out[s, r - rep_start, :, k - 1, :] = (res == k).cumsum(axis=1, dtype=np.int16)
    return out


def _run_chunks(
    plan: ResamplePlan,
    chunk: int,
    worker: Callable[[int, int], object],
    threads: int = 1,
) -> list[object]:
    """Apply ``worker`` to fixed replicate chunks; partials in chunk order."""
    spans = [
        (start, min(start + chunk, plan.replicates))
        for start in range(0, plan.replicates, chunk)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(lambda sp: worker(*sp), spans))
    return [worker(*span) for span in spans]


def _onset_flag(method: Method, n: int) -> bool:
    """True at the single-subset onset point of subset estimators."""
    return method.k is not None and method.kind != "naive_pass_hat_k" and n == method.k


def _as_methods(method_specs, weights: WeightVector | None = None) -> list[Method]:
    if isinstance(method_specs, (str, Method)):
        method_specs = [method_specs]
    methods = [m if isinstance(m, Method) else parse_method(m) for m in method_specs]
    if weights is not None:
        methods = [
            dataclasses.replace(m, weights=m.weights or weights) for m in methods
        ]
    return methods


# -- tau curves ---------------------------------------------------------------

@dataclass(frozen=True)
class TauPoint:
    n: int
    mean_tau: float
    stderr: float
    valid_replicates: int
    # subset estimators at n == k rank from a single subset; flagged so
    # report consumers can discount the onset point
    high_variance: bool = False


@dataclass(frozen=True)
class TauCurve:
    """Mean rank correlation against the gold standard per trial count."""

    method: str
    scheme: str
    points: tuple[TauPoint, ...]

    def at(self, n: int) -> TauPoint:
        for p in self.points:
            if p.n == n:
                return p
        raise KeyError(n)

    def to_report(self) -> dict:
        return {
            "method": self.method,
            "scheme": self.scheme,
            "points": [
                {
                    "N": p.n,
                    "value": p.mean_tau,
                    "stderr": p.stderr,
                    "replicates": p.valid_replicates,
                    "high_variance": p.high_variance,
                }
                for p in self.points
            ],
        }


def tau_curves(
    matrices,
    methods: Sequence[Method | str] | str,
    plan: ResamplePlan,
    weights: WeightVector | None = None,
    threads: int = 1,
    gold: RankTable | None = None,
) -> dict[str, TauCurve]:
    """Mean tau-b curves of one or more methods over shared replicates.

    The reference ranking defaults to the posterior-mean ranking of the
    unresampled matrices at the trial budget; pass ``gold`` to compare
    against a known ground-truth ranking instead. Replicates where a
    method scores every model identically have no defined correlation
    and are excluded from that point's mean (their count shows up in
    ``valid_replicates``).
    """
    items = _model_items(matrices)
    methods = _as_methods(methods, weights)
    model_ids = [mid for mid, _ in items]
    num_categories = items[0][1].num_categories
    n_max = plan.budget(items[0][1].trials)
    if gold is None:
        gold = gold_table(dict(items), n_max, weights)
    iu, ju, sg, n0, n2 = _pair_structure(gold, model_ids)
    cells_list = [mx.cells for _, mx in items]
    n_lo = {m.name: max(1, m.min_trials) for m in methods}
    for m in methods:
        m.check_defined(n_max, num_categories)
    chunk = _chunk_size(len(items), items[0][1].questions, num_categories - 1, n_max)

    def worker(rep_start: int, rep_stop: int):
        counts = _chunk_counts(cells_list, num_categories, plan, n_max, rep_start, rep_stop)
        partial = {m.name: np.zeros((3, n_max + 1)) for m in methods}  # sum, sumsq, count
        for n in range(1, n_max + 1):
            at_n = counts[..., n - 1]
            for m in methods:
                if n < n_lo[m.name]:
                    continue
                scores = m.scores_from_counts(at_n, n, num_categories).T
                tau, valid = _tau_against_gold(scores, iu, ju, sg, n0, n2)
                acc = partial[m.name]
                acc[0, n] = tau[valid].sum()
                acc[1, n] = (tau[valid] ** 2).sum()
                acc[2, n] = valid.sum()
        return partial

    partials = _run_chunks(plan, chunk, worker, threads)
    curves: dict[str, TauCurve] = {}
    for m in methods:
        total = np.zeros((3, n_max + 1))
        for p in partials:
            total += p[m.name]
        points = []
        for n in range(n_lo[m.name], n_max + 1):
            s, ss, cnt = total[0, n], total[1, n], total[2, n]
            if cnt == 0:
                continue
            mean = s / cnt
            var = max(ss / cnt - mean * mean, 0.0)
            stderr = math.sqrt(var / cnt) if cnt > 1 else 0.0
            points.append(TauPoint(n, mean, stderr, int(cnt), _onset_flag(m, n)))
        curves[m.name] = TauCurve(m.name, plan.scheme.value, tuple(points))
    return curves


def tau_curve(
    matrices,
    method: Method | str,
    plan: ResamplePlan,
    weights: WeightVector | None = None,
    threads: int = 1,
    gold: RankTable | None = None,
) -> TauCurve:
    """Single-method convenience wrapper around ``tau_curves``."""
    (m,) = _as_methods(method)
    return tau_curves(matrices, [m], plan, weights, threads, gold)[m.name]


# -- convergence@n ------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceDistribution:
    """Distribution of the smallest trial count after which a method's
    ranking equals the gold ranking for every larger prefix.

    Counts are integers so mass conservation is exact:
    ``counts.sum() + censored_count == replicates``.
    """

    method: str
    scheme: str
    n_max: int
    counts: np.ndarray          # index n = 1..n_max; counts[0] unused
    censored_count: int
    replicates: int

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def pmf(self) -> np.ndarray:
        """P(convergence at n), n = 1..n_max (index 0 is zero)."""
        return self.counts / self.replicates

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    @property
    def censored_mass(self) -> float:
        return self.censored_count / self.replicates

    @property
    def mean_converged(self) -> float | None:
        converged = int(self.counts.sum())
        if converged == 0:
            return None
        return float(np.arange(self.n_max + 1) @ self.counts) / converged

    def to_report(self) -> dict:
        return {
            "method": self.method,
            "scheme": self.scheme,
            "n_max": self.n_max,
            "replicates": self.replicates,
            "mean_converged": self.mean_converged,
            "censored_mass": self.censored_mass,
            "pmf": [
                {"n": n, "pmf": float(self.pmf[n]), "cdf": float(self.cdf[n])}
                for n in range(1, self.n_max + 1)
            ],
        }


def _convergence_from_match(match: np.ndarray, n_lo: int, n_max: int):
    """Per-replicate convergence point from match booleans at n_lo..n_max.

    Returns (conv_n, censored): conv_n valid where not censored.
    """
    rev = ~match[:, ::-1]
    any_mm = rev.any(axis=1)
    # first mismatch scanning backwards = last mismatching prefix length
    last_mm = n_max - np.argmax(rev, axis=1)
    conv = np.where(any_mm, last_mm + 1, n_lo)
    censored = any_mm & (last_mm == n_max)
    return conv, censored


def convergence_distributions(
    matrices,
    methods: Sequence[Method | str] | str,
    plan: ResamplePlan,
    weights: WeightVector | None = None,
    threads: int = 1,
    gold: RankTable | None = None,
    ci_z: float | None = None,
) -> dict[str, ConvergenceDistribution]:
    """Convergence@n PMFs for one or more methods over shared replicates.

    By default replicate rankings are point-estimate rankings compared to
    the gold point ranking. ``ci_z`` switches the replicate side to
    CI-tied rankings at that z threshold (a slower per-replicate path;
    posterior-based methods use their closed-form sigma).
    """
    items = _model_items(matrices)
    methods = _as_methods(methods, weights)
    model_ids = [mid for mid, _ in items]
    num_categories = items[0][1].num_categories
    n_max = plan.budget(items[0][1].trials)
    if gold is None:
        gold = gold_table(dict(items), n_max, weights)
    if ci_z is not None:
        return _convergence_ci(items, methods, plan, gold, ci_z, n_max)
    perm, strict = _gold_order(gold, model_ids)
    cells_list = [mx.cells for _, mx in items]
    n_lo = {m.name: max(1, m.min_trials) for m in methods}
    for m in methods:
        m.check_defined(n_max, num_categories)
    chunk = _chunk_size(len(items), items[0][1].questions, num_categories - 1, n_max)

    def worker(rep_start: int, rep_stop: int):
        counts = _chunk_counts(cells_list, num_categories, plan, n_max, rep_start, rep_stop)
        reps = rep_stop - rep_start
        partial = {}
        for m in methods:
            lo = n_lo[m.name]
            match = np.empty((reps, n_max - lo + 1), dtype=bool)
            for n in range(lo, n_max + 1):
                scores = m.scores_from_counts(counts[..., n - 1], n, num_categories).T
                match[:, n - lo] = _match_gold(scores, perm, strict)
            conv, censored = _convergence_from_match(match, lo, n_max)
            hist = np.bincount(conv[~censored], minlength=n_max + 2)[: n_max + 1]
            partial[m.name] = (hist.astype(np.int64), int(censored.sum()))
        return partial

    partials = _run_chunks(plan, chunk, worker, threads)
    out = {}
    for m in methods:
        hist = np.zeros(n_max + 1, dtype=np.int64)
        censored = 0
        for p in partials:
            h, c = p[m.name]
            hist += h
            censored += c
        out[m.name] = ConvergenceDistribution(
            m.name, plan.scheme.value, n_max, hist, censored, plan.replicates
        )
    return out


def convergence_at_n(
    matrices,
    method: Method | str,
    plan: ResamplePlan,
    weights: WeightVector | None = None,
    threads: int = 1,
    gold: RankTable | None = None,
    ci_z: float | None = None,
) -> ConvergenceDistribution:
    """Single-method convenience wrapper around ``convergence_distributions``."""
    (m,) = _as_methods(method)
    return convergence_distributions(
        matrices, [m], plan, weights, threads, gold, ci_z
    )[m.name]


def _convergence_ci(items, methods, plan, gold, ci_z, n_max):
    """CI-tied replicate rankings against the gold point ranking.

    Per-replicate Python path: exact but much slower than the point
    engine; meant for moderate replicate counts.
    """
    model_ids = [mid for mid, _ in items]
    gold_vec = gold.rank_vector(model_ids)
    out = {}
    for m in methods:
        lo = max(1, m.min_trials)
        hist = np.zeros(n_max + 1, dtype=np.int64)
        censored = 0
        for r in range(plan.replicates):
            resampled = [
                resample(mx, plan, r, stream=s) for s, (_, mx) in enumerate(items)
            ]
            last_mismatch = 0
            for n in range(lo, n_max + 1):
                scored = [
                    ScoredModel(mid, *m.score_with_sigma(rx.prefix(n)))
                    for (mid, _), rx in zip(items, resampled)
                ]
                table = rank_with_ci(scored, ci_z)
                if table.rank_vector(model_ids) != gold_vec:
                    last_mismatch = n
            if last_mismatch == n_max:
                censored += 1
            else:
                hist[max(lo, last_mismatch + 1)] += 1
        out[m.name] = ConvergenceDistribution(
            m.name, plan.scheme.value, n_max, hist, censored, plan.replicates
        )
    return out


# -- worst-case trajectory ----------------------------------------------------

@dataclass(frozen=True)
class WorstCaseTrajectory:
    """Full rank-table sequence of the slowest-converging replicate."""

    method: str
    scheme: str
    replicate_index: int
    n_start: int
    convergence_n: int | None       # None means censored at n_max
    tables: tuple[RankTable, ...]   # one per n in n_start..n_max

    @property
    def censored(self) -> bool:
        return self.convergence_n is None

    def to_report(self) -> dict:
        return {
            "method": self.method,
            "scheme": self.scheme,
            "replicate_index": self.replicate_index,
            "convergence_n": self.convergence_n,
            "censored": self.censored,
            "trajectory": [
                {"N": self.n_start + i, **t.to_report()} for i, t in enumerate(self.tables)
            ],
        }


def worst_case_trajectory(
    matrices,
    method: Method | str,
    plan: ResamplePlan,
    weights: WeightVector | None = None,
    threads: int = 1,
    gold: RankTable | None = None,
) -> WorstCaseTrajectory:
    """Rank tables per trial count for the replicate slowest to converge.

    Censored replicates rank worse than any converged one; ties break
    toward the lowest replicate index.
    """
    (m,) = _as_methods(method, weights)
    items = _model_items(matrices)
    model_ids = [mid for mid, _ in items]
    num_categories = items[0][1].num_categories
    n_max = plan.budget(items[0][1].trials)
    if gold is None:
        gold = gold_table(dict(items), n_max, weights)
    perm, strict = _gold_order(gold, model_ids)
    cells_list = [mx.cells for _, mx in items]
    lo = max(1, m.min_trials)
    m.check_defined(n_max, num_categories)
    chunk = _chunk_size(len(items), items[0][1].questions, num_categories - 1, n_max)

    def worker(rep_start: int, rep_stop: int):
        counts = _chunk_counts(cells_list, num_categories, plan, n_max, rep_start, rep_stop)
        reps = rep_stop - rep_start
        match = np.empty((reps, n_max - lo + 1), dtype=bool)
        for n in range(lo, n_max + 1):
            scores = m.scores_from_counts(counts[..., n - 1], n, num_categories).T
            match[:, n - lo] = _match_gold(scores, perm, strict)
        conv, censored = _convergence_from_match(match, lo, n_max)
        key = np.where(censored, n_max + 1, conv)
        best = int(np.argmax(key))  # first occurrence wins inside the chunk
        return int(key[best]), rep_start + best

    partials = _run_chunks(plan, chunk, worker, threads)
    worst_key, worst_rep = -1, -1
    for key, rep in partials:
        if key > worst_key:
            worst_key, worst_rep = key, rep

    tables = []
    resampled = [
        resample(mx, plan, worst_rep, stream=s) for s, (_, mx) in enumerate(items)
    ]
    for n in range(lo, n_max + 1):
        scored = [
            ScoredModel(mid, m.score(rx.prefix(n)), 0.0)
            for (mid, _), rx in zip(items, resampled)
        ]
        tables.append(rank_without_ci(scored))
    conv_n = None if worst_key > n_max else int(worst_key)
    return WorstCaseTrajectory(
        m.name, plan.scheme.value, worst_rep, lo, conv_n, tuple(tables)
    )
