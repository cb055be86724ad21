"""Per-turn candidate selection for multi-turn Best-of-N search.

Four strategies: uniform random, learned-verifier argmax, public-test-first,
and the hierarchical public-test-then-verifier. Selection is a pure function
of (strategy, candidates, verifier, problem): the random strategy derives its
draw from a stable hash of the seed, problem id and candidate codes, so
parallel and serial runs pick identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import Problem
from .sandbox import ExecutionResult
from .seeding import stable_hash
from .verifier import VerifierParams, score

STRATEGY_RANDOM = "random"
STRATEGY_VERIFIER = "verifier"
STRATEGY_PUBLIC_TESTS = "public-tests"
STRATEGY_PUBLIC_TESTS_THEN_VERIFIER = "public-tests-then-verifier"

ALL_STRATEGIES = (
    STRATEGY_RANDOM,
    STRATEGY_VERIFIER,
    STRATEGY_PUBLIC_TESTS,
    STRATEGY_PUBLIC_TESTS_THEN_VERIFIER,
)

_NEEDS_VERIFIER = (STRATEGY_VERIFIER, STRATEGY_PUBLIC_TESTS_THEN_VERIFIER)


class SelectionConfigError(ValueError):
    """Strategy requires a verifier but none was provided."""


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = STRATEGY_PUBLIC_TESTS_THEN_VERIFIER
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ALL_STRATEGIES:
            raise ValueError(f"unknown selection strategy {self.kind!r}")

    @property
    def needs_verifier(self) -> bool:
        return self.kind in _NEEDS_VERIFIER


def _verifier_scores(
    verifier: VerifierParams, problem: Problem, candidates
) -> list[float]:
    # A candidate with no extractable code can never win a verifier argmax
    # unless every candidate is code-free.
    return [
        score(verifier, problem, code) if code is not None else float("-inf")
        for code, _ in candidates
    ]


def select_candidate(
    strategy: SelectionStrategy,
    candidates: list[tuple[str | None, ExecutionResult]],
    verifier: VerifierParams | None,
    problem: Problem,
) -> int:
    """Pick the index of the candidate to execute this turn.

    ``candidates`` pairs each extracted code (None when extraction failed)
    with its public-test result. Ties in verifier argmaxes break toward the
    lowest sample index (stable order).
    """
    if not candidates:
        raise ValueError("cannot select from an empty candidate list")
    if strategy.needs_verifier and verifier is None:
        raise SelectionConfigError(f"strategy {strategy.kind!r} requires a verifier")

    if strategy.kind == STRATEGY_RANDOM:
        key = stable_hash(strategy.seed, problem.id, *(code or "" for code, _ in candidates))
        rng = np.random.default_rng(key % (2**32))
        return int(rng.integers(len(candidates)))

    if strategy.kind == STRATEGY_VERIFIER:
        scores = _verifier_scores(verifier, problem, candidates)
        return int(np.argmax(scores))

    passing = [i for i, (_, result) in enumerate(candidates) if result.all_passed]

    if strategy.kind == STRATEGY_PUBLIC_TESTS:
        return passing[0] if passing else 0

    # public-tests-then-verifier
    scores = _verifier_scores(verifier, problem, candidates)
    if passing:
        return max(passing, key=lambda i: (scores[i], -i))
    return int(np.argmax(scores))
