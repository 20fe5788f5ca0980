"""Metric specs shared by the CLI and the resampling engines.

A method wraps two evaluation surfaces: whole-matrix scoring (used by the
``eval``/``rank`` commands) and vectorized scoring from per-category
count tensors (used by the bootstrap engines, where thousands of
replicate prefixes are scored at once).

Method spec grammar: ``bayes``, ``avg``, ``pass@K``, ``pass^K``,
``naive^K``, ``gpass@K:TAU``, ``mgpass@K``. TAU parses as a decimal or a
fraction such as ``1/2``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import passk
from .bayes import evaluate_performance, naive_weighted_average
from .errors import InputError, MethodUndefinedError
from .model import UNIFORM, ResultsMatrix, WeightVector

__all__ = ["Method", "parse_method", "parse_methods"]


@dataclass(frozen=True)
class Method:
    """A named scoring rule with its minimum defined trial count."""

    name: str
    kind: str                    # bayes | avg | pass_at_k | pass_hat_k | naive_pass_hat_k | g_pass_at_k_tau | mg_pass_at_k
    k: int | None = None
    tau: Fraction | None = None
    weights: WeightVector | None = None

    @property
    def min_trials(self) -> int:
        if self.kind == "bayes":
            return 0
        if self.kind in ("avg", "naive_pass_hat_k"):
            return 1
        return self.k  # subset estimators need n >= k

    @property
    def needs_binary(self) -> bool:
        return self.kind not in ("bayes", "avg")

    def check_defined(self, trials: int, num_categories: int) -> None:
        if trials < self.min_trials:
            raise MethodUndefinedError(
                f"{self.name} undefined at N={trials} (needs N >= {self.min_trials})"
            )
        if self.needs_binary and num_categories != 2:
            raise MethodUndefinedError(f"{self.name} requires binary outcomes (C = 1)")

    def score(self, matrix: ResultsMatrix) -> float:
        """Point score of one model's full matrix."""
        self.check_defined(matrix.trials, matrix.num_categories)
        if self.kind == "bayes":
            return evaluate_performance(matrix, UNIFORM, self._weights_for(matrix)).mu
        if self.kind == "avg":
            return naive_weighted_average(matrix, self._weights_for(matrix))
        tally = passk.BinaryTally.from_matrix(matrix)
        if self.kind == "pass_at_k":
            return passk.pass_at_k(tally, self.k)
        if self.kind == "pass_hat_k":
            return passk.pass_hat_k(tally, self.k)
        if self.kind == "naive_pass_hat_k":
            return passk.naive_pass_hat_k(tally, self.k)
        if self.kind == "g_pass_at_k_tau":
            return passk.g_pass_at_k_tau(tally, self.k, self.tau)
        if self.kind == "mg_pass_at_k":
            return passk.mg_pass_at_k(tally, self.k)
        raise AssertionError(self.kind)

    def _weights_for(self, matrix: ResultsMatrix) -> WeightVector:
        return self.weights or WeightVector.identity(matrix.num_categories)

    def score_with_sigma(self, matrix: ResultsMatrix) -> tuple[float, float]:
        """Point score plus posterior uncertainty where the method has one.

        Posterior-based methods carry their closed-form sigma (the naive
        average inherits it through the exact scale factor); subset
        estimators report zero.
        """
        self.check_defined(matrix.trials, matrix.num_categories)
        if self.kind == "bayes":
            s = evaluate_performance(matrix, UNIFORM, self._weights_for(matrix))
            return s.mu, s.sigma
        if self.kind == "avg":
            from .bayes import avg_sigma_from_bayes

            s = evaluate_performance(matrix, UNIFORM, self._weights_for(matrix))
            return (
                naive_weighted_average(matrix, self._weights_for(matrix)),
                avg_sigma_from_bayes(s.sigma, matrix.trials, matrix.num_categories),
            )
        return self.score(matrix), 0.0

    # -- vectorized scoring over count tensors -------------------------------

    def scores_from_counts(
        self, counts: np.ndarray, trials: int, num_categories: int
    ) -> np.ndarray:
        """Scores from per-category counts of categories 1..C.

        ``counts`` has shape (..., M, C); the trailing axes are question
        and category (category 0 is implicit as ``trials - sum``).
        Returns an array of shape (...) of per-model scores.
        """
        self.check_defined(trials, num_categories)
        if self.kind in ("bayes", "avg"):
            w = np.asarray(
                (self.weights or WeightVector.identity(num_categories)).weights
            )
            if w.shape[0] != num_categories:
                raise InputError(
                    f"{w.shape[0]} weights for {num_categories} categories"
                )
            if self.kind == "bayes":
                # mu = w0 + (mean_alpha sum_j nu_j (w_j - w0)) / T, nu = counts + 1
                dw = w[1:] - w[0]
                t = num_categories + trials  # 1 + C + N, uniform prior
                per_q = counts @ dw + dw.sum()
                return w[0] + per_q.mean(axis=-1) / t
            # avg: (1/N) mean_alpha [ w0 n0 + sum_{j>=1} w_j n_j ]
            per_q = counts @ (w[1:] - w[0]) + w[0] * trials
            return per_q.mean(axis=-1) / trials
        table = self._score_table(trials)
        per_q = table[counts[..., 0]]
        return per_q.mean(axis=-1)

    @lru_cache(maxsize=None)
    def _score_table(self, trials: int) -> np.ndarray:
        return passk._score_table(self.kind, trials, self.k, self.tau)


_PATTERNS = (
    (re.compile(r"^bayes$"), "bayes"),
    (re.compile(r"^avg$"), "avg"),
    (re.compile(r"^pass@(\d+)$"), "pass_at_k"),
    (re.compile(r"^pass\^(\d+)$"), "pass_hat_k"),
    (re.compile(r"^naive\^(\d+)$"), "naive_pass_hat_k"),
    (re.compile(r"^gpass@(\d+):([0-9./]+)$"), "g_pass_at_k_tau"),
    (re.compile(r"^mgpass@(\d+)$"), "mg_pass_at_k"),
)


def _parse_tau(text: str) -> Fraction:
    try:
        tau = Fraction(text) if "/" in text else Fraction(str(float(text)))
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse tolerance {text!r}") from exc
    if not 0 < tau <= 1:
        raise InputError(f"tolerance must be in (0, 1], got {text}")
    return tau


def parse_method(spec: str, weights: WeightVector | None = None) -> Method:
    """Parse a method spec string.

    Raises:
        InputError: unparseable spec or invalid parameters.
    """
    spec = spec.strip()
    for pattern, kind in _PATTERNS:
        m = pattern.match(spec)
        if not m:
            continue
        if kind in ("bayes", "avg"):
            return Method(spec, kind, weights=weights)
        k = int(m.group(1))
        if k < 1:
            raise InputError(f"k must be >= 1 in {spec!r}")
        if kind == "mg_pass_at_k" and k < 2:
            raise InputError(f"mgpass needs k >= 2, got {spec!r}")
        tau = _parse_tau(m.group(2)) if kind == "g_pass_at_k_tau" else None
        canonical = f"gpass@{k}:{tau}" if tau is not None else spec
        return Method(canonical, kind, k=k, tau=tau)
    raise InputError(
        f"cannot parse method {spec!r}; expected bayes, avg, pass@K, pass^K, "
        f"naive^K, gpass@K:TAU, or mgpass@K"
    )


def parse_methods(specs: str | list[str], weights: WeightVector | None = None) -> list[Method]:
    if isinstance(specs, str):
        specs = [s for s in specs.split(",") if s.strip()]
    return [parse_method(s, weights) for s in specs]
