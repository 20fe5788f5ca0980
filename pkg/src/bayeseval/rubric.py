"""Categorical scoring of raw attempt signals through named schemata.

Each attempt carries low-level signals (correctness, formatting, token
budget use, prompt/completion bits-per-token, verifier label
probabilities). Dataset-level thresholds turn those into boolean rubric
variables, and a schema maps every variable combination to exactly one
category. Category 0 is always reserved for invalid attempts (degenerate
repetition or a high off-task verifier probability), which dominates all
other rules.

Percentile thresholds use linear interpolation between closest ranks
(the numpy default), fixed here so threshold values are stable across
implementations and runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    IncompleteGridError,
    InputError,
    NoCorrectItemsError,
    NoWrongItemsError,
    UncoveredCaseError,
)
from .model import ResultsMatrix, WeightVector

__all__ = [
    "AttemptSignals",
    "ThresholdSet",
    "RubricVariables",
    "Schema",
    "SCHEMATA",
    "schema_by_name",
    "schema_names",
    "compute_thresholds",
    "derive_variables",
    "categorize",
    "build_matrix",
]


@dataclass(frozen=True)
class AttemptSignals:
    """Raw per-attempt signals.

    ``has_box`` and ``is_correct`` are accepted as reals in [0, 1] and
    thresholded at 0.5 where the rubric needs booleans. ``token_ratio``
    is completion tokens over the 32,768 budget. ``verifier_*`` are the
    calibrated label probabilities for correct / wrong / off-task.
    """

    has_box: float
    is_correct: float
    token_ratio: float
    repeated_pattern: int
    prompt_bpt: float
    completion_bpt: float
    verifier_correct: float = 0.0   # A
    verifier_wrong: float = 0.0     # B
    verifier_offtask: float = 0.0   # C

    def __post_init__(self):
        for name in ("has_box", "is_correct", "verifier_correct", "verifier_wrong", "verifier_offtask"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{name}={v} outside [0, 1]")
        for name in ("token_ratio", "prompt_bpt", "completion_bpt"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0.0:
                raise InputError(f"{name}={v} must be finite and >= 0")
        if self.repeated_pattern not in (0, 1):
            raise InputError(f"repeated_pattern must be 0 or 1, got {self.repeated_pattern}")


@dataclass(frozen=True)
class ThresholdSet:
    """Dataset-level cutoffs for the confidence / length / OOD variables."""

    tau_high: float        # 40th pct of completion_bpt
    tau_low_wrong: float   # 60th pct of completion_bpt among wrong items
    tau_prompt: float      # 90th pct of prompt_bpt
    len_p33: float         # 33rd pct of token_ratio
    len_p66: float         # 66th pct of token_ratio
    corr_p33: float        # 33rd pct of completion_bpt among correct items
    corr_p66: float        # 66th pct of completion_bpt among correct items

    def __post_init__(self):
        if self.len_p33 > self.len_p66:
            raise InputError("len_p33 must not exceed len_p66")
        if self.corr_p33 > self.corr_p66:
            raise InputError("corr_p33 must not exceed corr_p66")

    def to_report(self) -> dict:
        return {
            "tau_high": self.tau_high,
            "tau_low_wrong": self.tau_low_wrong,
            "tau_prompt": self.tau_prompt,
            "len_p33": self.len_p33,
            "len_p66": self.len_p66,
            "corr_p33": self.corr_p33,
            "corr_p66": self.corr_p66,
        }


def compute_thresholds(signals: Iterable[AttemptSignals]) -> ThresholdSet:
    """Percentile thresholds over a signal collection (order-invariant).

    Raises:
        EmptyInputError: no signals.
        NoWrongItemsError / NoCorrectItemsError: a conditional percentile
            has no supporting items.
    """
    sigs = list(signals)
    if not sigs:
        raise EmptyInputError("cannot compute thresholds without signals")
    completion = np.array([s.completion_bpt for s in sigs])
    prompt = np.array([s.prompt_bpt for s in sigs])
    ratio = np.array([s.token_ratio for s in sigs])
    correct_mask = np.array([s.is_correct >= 0.5 for s in sigs])
    wrong_bpt = completion[~correct_mask]
    correct_bpt = completion[correct_mask]
    if wrong_bpt.size == 0:
        raise NoWrongItemsError("no wrong attempts: 60th-percentile cutoff undefined")
    if correct_bpt.size == 0:
        raise NoCorrectItemsError("no correct attempts: confidence terciles undefined")
    pct = lambda a, q: float(np.percentile(a, q, method="linear"))
    return ThresholdSet(
        tau_high=pct(completion, 40),
        tau_low_wrong=pct(wrong_bpt, 60),
        tau_prompt=pct(prompt, 90),
        len_p33=pct(ratio, 33),
        len_p66=pct(ratio, 66),
        corr_p33=pct(correct_bpt, 33),
        corr_p66=pct(correct_bpt, 66),
    )


@dataclass(frozen=True)
class RubricVariables:
    """Boolean rubric variables derived from one attempt's signals."""

    invalid: bool
    correct: bool
    wrong: bool
    high_conf: bool
    low_conf: bool
    wrong_high_conf: bool
    ood: bool
    ind: bool
    economical: bool
    moderate: bool
    verbose: bool
    boxed: bool
    unboxed: bool
    a_high: bool
    conf_top: bool        # completion_bpt <= corr_p33 (most confident tercile)
    conf_mid: bool        # corr_p33 < completion_bpt <= corr_p66
    conf_low: bool        # completion_bpt > corr_p66
    top_offtask: bool     # argmax of verifier probabilities, ties prefer off-task
    top_wrong: bool
    top_correct: bool

    def flags(self) -> dict[str, bool]:
        return dict(self.__dict__)


def _verifier_argmax(a: float, b: float, c: float) -> str:
    # ties resolve pessimistically: off-task, then wrong, then correct
    best = max(a, b, c)
    if c == best:
        return "offtask"
    if b == best:
        return "wrong"
    return "correct"


def derive_variables(s: AttemptSignals, t: ThresholdSet) -> RubricVariables:
    """Map signals to rubric variables using the dataset thresholds.

    Boundary conventions are fixed: invalid when the off-task probability
    reaches 0.50; confident when ``completion_bpt`` does not exceed the
    cutoff; economical when ``token_ratio`` does not exceed the tercile.
    """
    correct = s.is_correct >= 0.5
    top = _verifier_argmax(s.verifier_correct, s.verifier_wrong, s.verifier_offtask)
    return RubricVariables(
        invalid=(s.repeated_pattern == 1) or (s.verifier_offtask >= 0.50),
        correct=correct,
        wrong=not correct,
        high_conf=s.completion_bpt <= t.tau_high,
        low_conf=s.completion_bpt > t.tau_high,
        wrong_high_conf=(not correct) and s.completion_bpt <= t.tau_low_wrong,
        ood=s.prompt_bpt >= t.tau_prompt,
        ind=s.prompt_bpt < t.tau_prompt,
        economical=s.token_ratio <= t.len_p33,
        moderate=t.len_p33 < s.token_ratio <= t.len_p66,
        verbose=s.token_ratio > t.len_p66,
        boxed=s.has_box >= 0.5,
        unboxed=s.has_box < 0.5,
        a_high=s.verifier_correct >= 0.6,
        conf_top=s.completion_bpt <= t.corr_p33,
        conf_mid=t.corr_p33 < s.completion_bpt <= t.corr_p66,
        conf_low=s.completion_bpt > t.corr_p66,
        top_offtask=top == "offtask",
        top_wrong=top == "wrong",
        top_correct=top == "correct",
    )


@dataclass(frozen=True)
class Schema:
    """A total mapping from rubric variables to categories 1..C.

    Each rule is a conjunction of literals (``"var"`` or ``"~var"``);
    rules must be pairwise disjoint across categories and jointly cover
    every non-invalid attempt. Category 0 (invalid) is implicit and
    dominates everything.
    """

    name: str
    num_categories: int
    rules: tuple[tuple[int, tuple[str, ...]], ...]
    default_weights: WeightVector = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.default_weights is None:
            object.__setattr__(
                self, "default_weights", WeightVector.identity(self.num_categories)
            )
        if len(self.default_weights) != self.num_categories:
            raise InputError(
                f"schema {self.name}: {len(self.default_weights)} weights for "
                f"{self.num_categories} categories"
            )
        for cat, lits in self.rules:
            if not 1 <= cat < self.num_categories:
                raise InputError(f"schema {self.name}: rule category {cat} out of range")
            for lit in lits:
                if lit.lstrip("~") not in RubricVariables.__dataclass_fields__:
                    raise InputError(f"schema {self.name}: unknown variable {lit!r}")

    @classmethod
    def from_config(cls, config: Mapping) -> "Schema":
        """Build a schema from a declarative mapping.

        Expected keys: ``name``, ``num_categories``, ``rules`` (mapping of
        category -> list of conjunction strings like ``"wrong & ~boxed"``),
        optional ``weights``.
        """
        rules = []
        for cat, conjs in config["rules"].items():
            if isinstance(conjs, str):
                conjs = [conjs]
            for conj in conjs:
                lits = tuple(p.strip() for p in conj.split("&") if p.strip())
                rules.append((int(cat), lits))
        weights = config.get("weights")
        return cls(
            name=str(config["name"]),
            num_categories=int(config["num_categories"]),
            rules=tuple(rules),
            default_weights=WeightVector(tuple(weights)) if weights else None,
        )


def _rule_matches(lits: tuple[str, ...], flags: dict[str, bool]) -> bool:
    for lit in lits:
        if lit.startswith("~"):
            if flags[lit[1:]]:
                return False
        elif not flags[lit]:
            return False
    return True


def categorize(s: AttemptSignals, schema: Schema, t: ThresholdSet) -> int:
    """Category of one attempt under a schema; invalid always maps to 0.

    Raises:
        UncoveredCaseError: the schema's rules leave the attempt unmapped
            or map it to more than one category.
    """
    variables = derive_variables(s, t)
    if variables.invalid:
        return 0
    flags = variables.flags()
    hits = {cat for cat, lits in schema.rules if _rule_matches(lits, flags)}
    if len(hits) != 1:
        state = ", ".join(k for k, v in sorted(flags.items()) if v)
        what = "no rule covers" if not hits else f"rules {sorted(hits)} overlap on"
        raise UncoveredCaseError(f"schema {schema.name}: {what} [{state}]")
    return hits.pop()


def build_matrix(
    records: Mapping[tuple[str, int], AttemptSignals],
    schema: Schema,
    thresholds: ThresholdSet | None = None,
) -> ResultsMatrix:
    """Categorical results matrix from a complete (question, trial) grid.

    Thresholds default to percentiles of the very records being mapped.
    Question rows are ordered by first appearance; trials sort ascending.

    Raises:
        IncompleteGridError: some (question, trial) pair is missing.
    """
    if not records:
        raise EmptyInputError("no signal records")
    if thresholds is None:
        thresholds = compute_thresholds(records.values())
    questions: list[str] = []
    seen = set()
    for q, _ in records:
        if q not in seen:
            seen.add(q)
            questions.append(q)
    trials = sorted({t for _, t in records})
    missing = [
        (q, t) for q in questions for t in trials if (q, t) not in records
    ]
    if missing:
        raise IncompleteGridError(
            f"{len(missing)} missing (question, trial) cells, first: {missing[0]}"
        )
    cells = np.empty((len(questions), len(trials)), dtype=np.int64)
    for qi, q in enumerate(questions):
        for ti, t in enumerate(trials):
            cells[qi, ti] = categorize(records[(q, t)], schema, thresholds)
    return ResultsMatrix(cells, schema.num_categories, tuple(questions))


def _schema(name, num_categories, rules, weights=None):
    return Schema(
        name,
        num_categories,
        tuple(rules),
        WeightVector(tuple(weights)) if weights else None,
    )


SCHEMATA: tuple[Schema, ...] = (
    _schema("exact-match", 3, [
        (1, ("wrong",)),
        (2, ("correct",)),
    ]),
    _schema("format-aware", 5, [
        (1, ("wrong", "unboxed")),
        (2, ("wrong", "boxed")),
        (3, ("correct", "unboxed")),
        (4, ("correct", "boxed")),
    ], weights=(0, 0, 1, 2, 3)),
    _schema("conf-calibrated", 6, [
        (1, ("wrong", "~wrong_high_conf")),
        (2, ("wrong_high_conf",)),
        (3, ("correct", "conf_low")),
        (4, ("correct", "conf_mid")),
        (5, ("correct", "conf_top")),
    ]),
    _schema("ood-robustness", 5, [
        (1, ("ood", "wrong")),
        (2, ("ind", "wrong")),
        (3, ("ood", "correct")),
        (4, ("ind", "correct")),
    ]),
    _schema("strict-compliance", 3, [
        (1, ("wrong",)),
        (1, ("correct", "unboxed")),
        (2, ("correct", "boxed")),
    ]),
    _schema("conf-wrong-penalty", 4, [
        (1, ("wrong_high_conf",)),
        (2, ("wrong", "~wrong_high_conf")),
        (3, ("correct",)),
    ]),
    _schema("verifier-only", 4, [
        (1, ("~a_high", "top_offtask")),
        (2, ("~a_high", "top_wrong")),
        (3, ("a_high",)),
        (3, ("~a_high", "top_correct")),
    ]),
    _schema("format-confidence", 8, [
        (1, ("wrong", "unboxed")),
        (2, ("wrong", "boxed", "low_conf")),
        (3, ("wrong", "boxed", "high_conf")),
        (4, ("correct", "unboxed", "low_conf")),
        (5, ("correct", "unboxed", "high_conf")),
        (6, ("correct", "boxed", "low_conf")),
        (7, ("correct", "boxed", "high_conf")),
    ]),
    _schema("length-robust", 3, [
        (1, ("wrong",)),
        (2, ("correct",)),
    ]),
    _schema("verifier-probe", 5, [
        (1, ("wrong", "a_high")),
        (2, ("wrong", "~a_high")),
        (3, ("correct", "~a_high")),
        (4, ("correct", "a_high")),
    ]),
    _schema("efficiency-adjusted", 7, [
        (1, ("wrong", "economical")),
        (2, ("wrong", "moderate")),
        (3, ("wrong", "verbose")),
        (4, ("correct", "economical")),
        (5, ("correct", "moderate")),
        (6, ("correct", "verbose")),
    ]),
    _schema("concise-high-conf", 6, [
        (1, ("wrong",)),
        (2, ("correct", "verbose")),
        (3, ("correct", "moderate")),
        (4, ("correct", "economical", "~high_conf")),
        (5, ("correct", "economical", "high_conf")),
    ]),
)

_BY_NAME = {s.name: s for s in SCHEMATA}


def schema_names() -> list[str]:
    return [s.name for s in SCHEMATA]


def schema_by_name(name: str) -> Schema:
    """Look up a shipped schema.

    Raises:
        InputError: unknown name; the message lists all schemata.
    """
    try:
        return _BY_NAME[name]
    except KeyError:
        raise InputError(
            f"unknown schema {name!r}; available: {', '.join(schema_names())}"
        ) from None
