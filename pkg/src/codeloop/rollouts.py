"""Rollout collection, dataset aggregation, expert relabeling, FT emission.

The aggregated dataset keeps every candidate ever generated (selected or
not) with its oracle label; the candidate index per prompt feeds verifier
training and the local-search expert. Relabeling rewrites every visited
state of a prompt to the same per-prompt best candidate, scored by a
weighted blend of the oracle label and the squashed verifier score.

File formats:
  rollout store ("rollouts-v1"): header line then one JSON RolloutRecord per line.
  FT dataset ("ftdata-v1"): header line then one JSON chat record per line,
  ``{"problem_id": ..., "messages": [{"role","content"}...], "target_oracle":
  0|1, "target_score": float}`` where the last message is the training target.
"""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .env import EnvConfig, EnvState, oracle_reward, reset, run_public_tests, step
from .generate import (
    BackendError,
    GeneratorConfig,
    extract_code,
    generate_candidates,
    state_to_transcript,
    transcript_to_wire,
)
from .problems import Problem
from .sandbox import ExecutionResult, SandboxExecutor, render_feedback
from .selection import SelectionConfigError, SelectionStrategy, select_candidate
from .verifier import VerifierParams, score, sigmoid

logger = logging.getLogger(__name__)

ROLLOUTS_FORMAT = "rollouts-v1"
FTDATA_FORMAT = "ftdata-v1"


class SelectionError(ValueError):
    """Expert selection over an empty candidate set."""


@dataclass(frozen=True)
class RelabelWeights:
    """Blend weights for the oracle label and the squashed verifier score."""

    oracle_weight: float = 1.0
    learned_weight: float = 0.1

    def __post_init__(self):
        if self.oracle_weight < 0 or self.learned_weight < 0:
            raise ValueError("relabel weights must be non-negative")


@dataclass(frozen=True)
class RolloutRecord:
    """One generated candidate: its state, code, oracle label, and provenance."""

    problem_id: str
    iteration: int
    turn: int
    sample_index: int
    history: tuple[tuple[str, str], ...]
    code: str  # "" when no code block was extracted
    oracle: int
    selected: bool
    feedback: str  # rendered feedback the selected candidate produced, else ""
    generator_tag: str = ""

    def key(self) -> tuple:
        return (self.problem_id, self.iteration, self.turn, self.sample_index)

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "iteration": self.iteration,
            "turn": self.turn,
            "sample_index": self.sample_index,
            "history": [[c, f] for c, f in self.history],
            "code": self.code,
            "oracle": self.oracle,
            "selected": self.selected,
            "feedback": self.feedback,
            "generator_tag": self.generator_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RolloutRecord":
        return cls(
            problem_id=d["problem_id"],
            iteration=d["iteration"],
            turn=d["turn"],
            sample_index=d["sample_index"],
            history=tuple((c, f) for c, f in d["history"]),
            code=d["code"],
            oracle=d["oracle"],
            selected=d["selected"],
            feedback=d["feedback"],
            generator_tag=d.get("generator_tag", ""),
        )


@dataclass(frozen=True)
class CandidateInfo:
    """A distinct code string for a prompt, with first-seen provenance."""

    code: str
    oracle: int
    iteration: int
    turn: int


@dataclass(frozen=True)
class ExpertRecord:
    """A (state, target) pair for fine-tuning, with target provenance."""

    problem_id: str
    history: tuple[tuple[str, str], ...]
    target: str
    target_oracle: int
    target_score: float


@dataclass
class AggDataset:
    """Aggregated rollouts plus the per-prompt candidate index D(x)."""

    problems: dict[str, Problem] = field(default_factory=dict)
    records: list[RolloutRecord] = field(default_factory=list)
    index: dict[str, dict[str, CandidateInfo]] = field(default_factory=dict)

    def candidates(self, problem_id: str) -> list[CandidateInfo]:
        return list(self.index.get(problem_id, {}).values())

    def by_problem(self) -> dict[str, tuple[Problem, list[tuple[str, int]]]]:
        """View for verifier training: pid -> (Problem, [(code, oracle)])."""
        return {
            pid: (self.problems[pid], [(c.code, c.oracle) for c in cands.values()])
            for pid, cands in self.index.items()
        }


def aggregate(
    dataset: AggDataset, new_records: list[RolloutRecord], problems: list[Problem]
) -> AggDataset:
    """Union new rollouts into the dataset; idempotent, order-insensitive index.

    Records are deduplicated on (problem, iteration, turn, sample index); the
    candidate index on (problem, code string), keeping first-seen provenance.
    Candidates with no extracted code are not indexed (nothing to imitate or
    score) but their records are kept.
    """
    merged = AggDataset(
        problems=dict(dataset.problems),
        records=list(dataset.records),
        index={pid: dict(cands) for pid, cands in dataset.index.items()},
    )
    for p in problems:
        merged.problems.setdefault(p.id, p)
    seen = {r.key() for r in merged.records}
    for record in new_records:
        if record.key() in seen:
            continue
        seen.add(record.key())
        merged.records.append(record)
        if not record.code:
            continue
        bucket = merged.index.setdefault(record.problem_id, {})
        if record.code not in bucket:
            bucket[record.code] = CandidateInfo(
                code=record.code,
                oracle=record.oracle,
                iteration=record.iteration,
                turn=record.turn,
            )
    return merged


# ---------------------------------------------------------------------------
# execution caching (pure speed; the sandbox is deterministic for
# deterministic code, which the engine's contracts already assume)


class ExecutionCache:
    """Thread-safe memo of public-test results and oracle labels per (pid, code)."""

    def __init__(self):
        self._public: dict[tuple[str, str], ExecutionResult] = {}
        self._oracle: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def public_result(self, problem, code, cfg, executor) -> ExecutionResult:
        if code is None:
            return run_public_tests(problem, None, cfg, executor)
        key = (problem.id, code)
        with self._lock:
            hit = self._public.get(key)
        if hit is not None:
            return hit
        result = run_public_tests(problem, code, cfg, executor)
        with self._lock:
            self._public[key] = result
        return result

    def oracle(self, problem, code, cfg, executor) -> int:
        if code is None or not code.strip():
            return 0
        key = (problem.id, code)
        with self._lock:
            hit = self._oracle.get(key)
        if hit is not None:
            return hit
        public = self.public_result(problem, code, cfg, executor)
        if not public.all_passed:
            r = 0
        elif not problem.private_tests:
            r = 1
        else:
            private = executor.execute(code, list(problem.private_tests), cfg.limits)
            r = 1 if private.all_passed else 0
        with self._lock:
            self._oracle[key] = r
        return r


# ---------------------------------------------------------------------------
# rollout collection


def collect_rollouts(
    problems: list[Problem],
    gen_cfg: GeneratorConfig,
    env_cfg: EnvConfig,
    strategy: SelectionStrategy,
    num_candidates: int,
    verifier: VerifierParams | None = None,
    iteration: int = 0,
    executor: SandboxExecutor | None = None,
    cache: ExecutionCache | None = None,
    workers: int = 1,
) -> list[RolloutRecord]:
    """Run the multi-turn loop per problem, recording every generated candidate.

    All candidates of every executed turn are recorded with oracle labels;
    the one the strategy picked is additionally marked selected and carries
    the feedback its execution produced. Backend or sandbox failures skip the
    problem (logged), never abort the collection.
    """
    if strategy.needs_verifier and verifier is None:
        raise SelectionConfigError("collection strategy requires a verifier")
    executor = executor or SandboxExecutor()
    cache = cache or ExecutionCache()
    tag = f"{gen_cfg.model_id}@stage{gen_cfg.stage}" if gen_cfg.backend == "scripted-mock" else gen_cfg.model_id

    ordered = sorted(problems, key=lambda p: p.id)

    def one_problem(problem: Problem) -> list[RolloutRecord]:
        out: list[RolloutRecord] = []
        try:
            state = reset(problem)
            for _ in range(env_cfg.max_turns):
                completions = generate_candidates(state, num_candidates, gen_cfg)
                codes = [extract_code(c) for c in completions]
                results = [
                    cache.public_result(problem, code, env_cfg, executor) for code in codes
                ]
                oracles = [cache.oracle(problem, code, env_cfg, executor) for code in codes]
                picked = select_candidate(
                    strategy, list(zip(codes, results)), verifier, problem
                )
                outcome = step(
                    state, codes[picked], env_cfg, executor, public_result=results[picked]
                )
                for k, code in enumerate(codes):
                    selected = k == picked
                    feedback = ""
                    if selected and not results[picked].all_passed:
                        feedback = render_feedback(results[picked], env_cfg.limits)
                    out.append(
                        RolloutRecord(
                            problem_id=problem.id,
                            iteration=iteration,
                            turn=state.turn,
                            sample_index=k,
                            history=state.history,
                            code=code or "",
                            oracle=oracles[k],
                            selected=selected,
                            feedback=feedback,
                            generator_tag=tag,
                        )
                    )
                if outcome.terminated:
                    break
                state = outcome.next_state
        except (BackendError, OSError) as e:
            logger.warning("skipping problem %s during collection: %s", problem.id, e)
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one_problem, ordered))
    else:
        chunks = [one_problem(p) for p in ordered]
    return [record for chunk in chunks for record in chunk]


# ---------------------------------------------------------------------------
# expert relabeling (local search over the candidate index)


def combined_score(oracle: int, verifier_score: float, weights: RelabelWeights) -> float:
    """Oracle label and squashed verifier score, blended.

    The sigmoid squash bounds the learned term to (0, 1) so that with the
    default weights any oracle-correct candidate beats any incorrect one.
    """
    return weights.oracle_weight * oracle + weights.learned_weight * float(
        sigmoid(verifier_score)
    )


@dataclass(frozen=True)
class ScoredCandidate:
    code: str
    oracle: int
    verifier_score: float
    iteration: int
    turn: int


def select_expert(candidates: list[ScoredCandidate], weights: RelabelWeights) -> ScoredCandidate:
    """Argmax of the blended score; deterministic tie-breaking.

    Ties break toward the earliest iteration, then earliest turn, then the
    lexicographically smaller code.
    """
    if not candidates:
        raise SelectionError("cannot select an expert from an empty candidate set")
    return min(
        candidates,
        key=lambda c: (
            -combined_score(c.oracle, c.verifier_score, weights),
            c.iteration,
            c.turn,
            c.code,
        ),
    )


def _scored_candidates(
    dataset: AggDataset, pid: str, verifier: VerifierParams | None
) -> list[ScoredCandidate]:
    problem = dataset.problems[pid]
    out = []
    for info in dataset.candidates(pid):
        v = score(verifier, problem, info.code) if verifier is not None else 0.0
        out.append(
            ScoredCandidate(
                code=info.code,
                oracle=info.oracle,
                verifier_score=v,
                iteration=info.iteration,
                turn=info.turn,
            )
        )
    return out


def relabel(
    dataset: AggDataset,
    weights: RelabelWeights,
    verifier: VerifierParams | None = None,
) -> list[ExpertRecord]:
    """One record per distinct (problem, state) in the dataset, all sharing
    the per-prompt expert target."""
    if weights.learned_weight > 0 and verifier is None:
        raise ValueError("relabeling with learned_weight > 0 requires a verifier")
    out: list[ExpertRecord] = []
    by_pid: dict[str, list[RolloutRecord]] = {}
    for record in dataset.records:
        by_pid.setdefault(record.problem_id, []).append(record)
    for pid in sorted(by_pid):
        candidates = _scored_candidates(dataset, pid, verifier)
        if not candidates:
            continue  # every response for this prompt failed extraction
        best = select_expert(candidates, weights)
        seen_states: set[tuple] = set()
        for record in by_pid[pid]:
            if record.history in seen_states:
                continue
            seen_states.add(record.history)
            out.append(
                ExpertRecord(
                    problem_id=pid,
                    history=record.history,
                    target=best.code,
                    target_oracle=best.oracle,
                    target_score=best.verifier_score,
                )
            )
    return out


# ---------------------------------------------------------------------------
# rejection-finetuning baselines


def _trajectories(dataset: AggDataset) -> dict[str, list[list[RolloutRecord]]]:
    """Selected records grouped into per-(problem, iteration) turn sequences."""
    grouped: dict[tuple[str, int], list[RolloutRecord]] = {}
    for record in dataset.records:
        if record.selected:
            grouped.setdefault((record.problem_id, record.iteration), []).append(record)
    out: dict[str, list[list[RolloutRecord]]] = {}
    for (pid, _), records in sorted(grouped.items()):
        out.setdefault(pid, []).append(sorted(records, key=lambda r: r.turn))
    return out


def _expand(trajectory: list[RolloutRecord]) -> list[ExpertRecord]:
    """Each visited state paired with the trajectory's own next action."""
    return [
        ExpertRecord(
            problem_id=r.problem_id,
            history=r.history,
            target=r.code,
            target_oracle=r.oracle,
            target_score=0.0,
        )
        for r in trajectory
    ]


def build_rft_dataset(dataset: AggDataset) -> list[ExpertRecord]:
    """Keep trajectories whose final solution is oracle-correct; expand each
    into all (state, next code) sub-trajectory pairs."""
    out: list[ExpertRecord] = []
    for pid, trajectories in _trajectories(dataset).items():
        for trajectory in trajectories:
            if trajectory and trajectory[-1].oracle == 1:
                out.extend(_expand(trajectory))
    return out


def build_rft_lv_dataset(
    dataset: AggDataset, verifier: VerifierParams, top_k: int = 3
) -> list[ExpertRecord]:
    """Keep the top-k trajectories per prompt ranked by the verifier's score
    of the final solution; expand like the oracle-filtered variant."""
    out: list[ExpertRecord] = []
    for pid, trajectories in _trajectories(dataset).items():
        problem = dataset.problems[pid]

        def final_score(trajectory: list[RolloutRecord]) -> float:
            final = trajectory[-1].code
            return score(verifier, problem, final) if final else float("-inf")

        ranked = sorted(
            enumerate(trajectories), key=lambda it: (-final_score(it[1]), it[0])
        )
        for _, trajectory in ranked[:top_k]:
            out.extend(_expand(trajectory))
    return out


# ---------------------------------------------------------------------------
# serialization


def save_rollouts(records: list[RolloutRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": ROLLOUTS_FORMAT}) + "\n")
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


def load_rollouts(path) -> list[RolloutRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != ROLLOUTS_FORMAT:
            raise ValueError(f"{path}: not a {ROLLOUTS_FORMAT} file")
        for line in fh:
            if line.strip():
                records.append(RolloutRecord.from_dict(json.loads(line)))
    return records


def emit_ft_dataset(
    records: list[ExpertRecord], problems: dict[str, Problem], path
) -> int:
    """Write fine-tuning data as chat transcripts; returns the record count.

    Each line renders the record's state as a transcript and appends the
    target as the final assistant message.
    """
    if not records:
        raise ValueError("refusing to emit an empty fine-tuning dataset")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": FTDATA_FORMAT}) + "\n")
        for record in records:
            problem = problems[record.problem_id]
            state = EnvState(problem=problem, history=record.history)
            messages = transcript_to_wire(state_to_transcript(state))
            messages.append({"role": "assistant", "content": record.target})
            fh.write(
                json.dumps(
                    {
                        "problem_id": record.problem_id,
                        "messages": messages,
                        "target_oracle": record.target_oracle,
                        "target_score": record.target_score,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(records)


def load_ft_dataset(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != FTDATA_FORMAT:
            raise ValueError(f"{path}: not a {FTDATA_FORMAT} file")
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out
