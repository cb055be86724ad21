"""Training-loop driver, multi-turn Best-of-N inference, and evaluation.

The training loop alternates rollout collection, verifier training, expert
relabeling, fine-tuning dataset emission, an optional generator-training
hook, and validation, returning the iteration whose validation accuracy is
best. Inference runs the per-turn sample/select/execute loop with a
configurable selection strategy; evaluation sweeps strategies and candidate
counts and reports accuracies plus per-turn solve curves.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .env import EnvConfig, reset, step
from .generate import (
    BACKEND_MOCK,
    BackendError,
    GeneratorConfig,
    advance_stage,
    extract_code,
    generate_candidates,
)
from .problems import Problem
from .rollouts import (
    AggDataset,
    ExecutionCache,
    RelabelWeights,
    aggregate,
    collect_rollouts,
    emit_ft_dataset,
    relabel,
    save_rollouts,
)
from .sandbox import SandboxExecutor
from .selection import (
    STRATEGY_PUBLIC_TESTS,
    STRATEGY_PUBLIC_TESTS_THEN_VERIFIER,
    SelectionStrategy,
    select_candidate,
)
from .verifier import TrainConfig, VerifierParams, train_verifier

logger = logging.getLogger(__name__)

REPORT_FORMAT = "report-v1"

HOOK_NONE = "none"
HOOK_MOCK_STAGE = "mock-stage"
HOOK_COMMAND = "command"


# ---------------------------------------------------------------------------
# multi-turn Best-of-N inference


@dataclass(frozen=True)
class TurnTrace:
    turn: int
    selected_code: str
    selected_index: int
    public_passed: bool
    candidate_count: int


@dataclass(frozen=True)
class EpisodeResult:
    problem_id: str
    final_code: str
    reason: str
    oracle: int
    generator_calls: int
    turns: tuple[TurnTrace, ...]

    @property
    def solved_at_turn(self) -> int | None:
        """Turn index at which the episode ended public-pass AND oracle-correct."""
        if self.reason == "public-pass" and self.oracle == 1:
            return len(self.turns)
        return None


def multi_turn_bon(
    problem: Problem,
    gen_cfg: GeneratorConfig,
    verifier: VerifierParams | None,
    num_candidates: int,
    env_cfg: EnvConfig,
    strategy: SelectionStrategy,
    executor: SandboxExecutor | None = None,
    cache: ExecutionCache | None = None,
) -> EpisodeResult:
    """Run one problem's inference episode.

    Per turn: sample ``num_candidates`` completions, execute each on the
    public tests, select one by the strategy, and feed its feedback forward.
    Stops on a public pass or at the turn limit; the returned final code is
    what the oracle should judge. A turn whose generation fails entirely is
    consumed as an extraction failure (no-code feedback).
    """
    if num_candidates < 1:
        raise ValueError("num_candidates must be >= 1")
    executor = executor or SandboxExecutor()
    cache = cache or ExecutionCache()
    state = reset(problem)
    traces: list[TurnTrace] = []
    calls = 0
    final_code: str | None = None
    reason = "turn-limit"
    for _ in range(env_cfg.max_turns):
        try:
            completions = generate_candidates(state, num_candidates, gen_cfg)
            calls += num_candidates
            codes = [extract_code(c) for c in completions]
        except BackendError as e:
            logger.warning("generation failed on %s turn %d: %s", problem.id, state.turn, e)
            codes = [None]
        results = [cache.public_result(problem, code, env_cfg, executor) for code in codes]
        picked = select_candidate(strategy, list(zip(codes, results)), verifier, problem)
        outcome = step(state, codes[picked], env_cfg, executor, public_result=results[picked])
        final_code = codes[picked]
        traces.append(
            TurnTrace(
                turn=state.turn,
                selected_code=final_code or "",
                selected_index=picked,
                public_passed=results[picked].all_passed,
                candidate_count=len(codes),
            )
        )
        if outcome.terminated:
            reason = outcome.reason
            break
        state = outcome.next_state
    oracle = cache.oracle(problem, final_code, env_cfg, executor)
    return EpisodeResult(
        problem_id=problem.id,
        final_code=final_code or "",
        reason=reason,
        oracle=oracle,
        generator_calls=calls,
        turns=tuple(traces),
    )


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalGrid:
    strategies: tuple[SelectionStrategy, ...] = (
        SelectionStrategy(STRATEGY_PUBLIC_TESTS_THEN_VERIFIER),
    )
    n_values: tuple[int, ...] = (1, 5)
    pomdp: bool = False
    max_turns: int = 3
    sampling_temperature: float = 0.7


@dataclass
class RunReport:
    """Accuracies per (strategy, N): overall, per turn, and per problem."""

    cells: list[dict] = field(default_factory=list)

    def cell(self, strategy_kind: str, n: int) -> dict:
        for c in self.cells:
            if c["strategy"] == strategy_kind and c["n"] == n:
                return c
        raise KeyError(f"no cell for strategy={strategy_kind!r}, n={n}")

    def accuracy(self, strategy_kind: str, n: int) -> float:
        return self.cell(strategy_kind, n)["accuracy"]

    def per_turn(self, strategy_kind: str, n: int) -> list[float]:
        return self.cell(strategy_kind, n)["per_turn_accuracy"]

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "cells": self.cells}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "RunReport":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError(f"{path}: not a {REPORT_FORMAT} file")
        return cls(cells=doc["cells"])


def _episode_summary(episode: EpisodeResult) -> dict:
    return {
        "problem_id": episode.problem_id,
        "oracle": episode.oracle,
        "reason": episode.reason,
        "generator_calls": episode.generator_calls,
        "solved_at_turn": episode.solved_at_turn,
        "turns": [
            {
                "turn": t.turn,
                "selected_index": t.selected_index,
                "public_passed": t.public_passed,
                "candidates": t.candidate_count,
            }
            for t in episode.turns
        ],
    }


def evaluate(
    problems: list[Problem],
    gen_cfg: GeneratorConfig,
    verifier: VerifierParams | None,
    grid: EvalGrid,
    env_cfg: EnvConfig | None = None,
    executor: SandboxExecutor | None = None,
    cache: ExecutionCache | None = None,
    workers: int = 1,
) -> RunReport:
    """Run the BoN loop over every (problem x strategy x N) grid cell.

    N=1 cells run greedy (temperature 0); N>1 cells use the grid's sampling
    temperature. Per-problem failures are scored 0, never fatal. Report
    assembly is ordered by problem id, so a fixed seed reproduces the
    serialized report bit for bit.
    """
    env_cfg = env_cfg or EnvConfig()
    if grid.max_turns != env_cfg.max_turns:
        env_cfg = replace(env_cfg, max_turns=grid.max_turns)
    executor = executor or SandboxExecutor()
    cache = cache or ExecutionCache()
    ordered = sorted(problems, key=lambda p: p.id)
    if grid.pomdp:
        from .problems import make_pomdp_variant

        ordered = [make_pomdp_variant(p) for p in ordered]

    report = RunReport()
    for strategy in grid.strategies:
        for n in grid.n_values:
            temperature = 0.0 if n == 1 else grid.sampling_temperature
            cfg = replace(gen_cfg, temperature=temperature)

            def run_one(problem: Problem) -> EpisodeResult:
                try:
                    return multi_turn_bon(
                        problem, cfg, verifier, n, env_cfg, strategy, executor, cache
                    )
                except Exception as e:  # scored 0, logged, never fatal
                    logger.warning("evaluation failed on %s: %s", problem.id, e)
                    return EpisodeResult(
                        problem_id=problem.id,
                        final_code="",
                        reason="error",
                        oracle=0,
                        generator_calls=0,
                        turns=(),
                    )

            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    episodes = list(pool.map(run_one, ordered))
            else:
                episodes = [run_one(p) for p in ordered]

            total = len(episodes) or 1
            per_turn = []
            for t in range(1, grid.max_turns + 1):
                solved = sum(
                    1
                    for e in episodes
                    if e.solved_at_turn is not None and e.solved_at_turn <= t
                )
                per_turn.append(solved / total)
            report.cells.append(
                {
                    "strategy": strategy.kind,
                    "n": n,
                    "pomdp": grid.pomdp,
                    "accuracy": sum(e.oracle for e in episodes) / total,
                    "per_turn_accuracy": per_turn,
                    # every candidate runs on the public tests each turn (the
                    # per-turn curves need it); strategies only read what
                    # their definition allows
                    "all_candidates_executed": True,
                    "problems": [_episode_summary(e) for e in episodes],
                }
            )
    return report


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class TrainingHook:
    """How Alg.-style generator training is realized after each iteration.

    ``mock-stage`` advances the scripted-mock stage (the mock's notion of a
    fine-tuned generator) provided a non-empty dataset was emitted.
    ``command`` runs an external template with {dataset} and {iteration}
    substituted; its last stdout line becomes the new model id (or endpoint,
    if it looks like a URL).
    """

    kind: str = HOOK_NONE
    command_template: str = ""


@dataclass(frozen=True)
class IterationConfig:
    iterations: int = 2
    candidates_per_turn: int = 5
    collect_temperature: float = 0.7
    relabel_weights: RelabelWeights = field(default_factory=RelabelWeights)
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    hook: TrainingHook = field(default_factory=TrainingHook)
    validation_grid: EvalGrid = field(
        default_factory=lambda: EvalGrid(n_values=(1,))
    )
    selection_seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class IterationArtifacts:
    iteration: int
    verifier: VerifierParams
    expert_record_count: int
    ft_dataset_path: str
    rollouts_path: str
    validation_report: RunReport
    validation_accuracy: float
    generator_cfg: GeneratorConfig


def _apply_hook(
    hook: TrainingHook, gen_cfg: GeneratorConfig, dataset_path: str, record_count: int, iteration: int
) -> GeneratorConfig:
    if hook.kind == HOOK_NONE:
        return gen_cfg
    if hook.kind == HOOK_MOCK_STAGE:
        if gen_cfg.backend != BACKEND_MOCK:
            raise ValueError("mock-stage hook needs the scripted-mock backend")
        if record_count < 1:
            logger.warning("iteration %d emitted no records; generator stage unchanged", iteration)
            return gen_cfg
        return advance_stage(gen_cfg)
    if hook.kind == HOOK_COMMAND:
        cmd = hook.command_template.format(dataset=dataset_path, iteration=iteration)
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True, check=True)
        lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
        if not lines:
            raise RuntimeError("training hook produced no output")
        handle = lines[-1]
        if handle.startswith("http://") or handle.startswith("https://"):
            return replace(gen_cfg, endpoint=handle)
        return replace(gen_cfg, model_id=handle)
    raise ValueError(f"unknown hook kind {hook.kind!r}")


def run_expert_iteration(
    train_problems: list[Problem],
    validation_problems: list[Problem],
    gen_cfg: GeneratorConfig,
    env_cfg: EnvConfig,
    cfg: IterationConfig,
    output_dir: str,
    executor: SandboxExecutor | None = None,
    workers: int = 1,
) -> tuple[list[IterationArtifacts], int]:
    """Run the full iterative training loop; returns per-iteration artifacts
    and the index of the iteration with the best validation accuracy.

    Iteration 1 collects with public-test selection (no verifier exists yet);
    later iterations select with public-tests-then-verifier using the previous
    iteration's verifier. Each iteration writes its artifacts into
    ``output_dir/iteration-XX/``; a stage failure aborts that iteration with
    a diagnostic but artifacts of earlier iterations are kept.
    """
    import os

    executor = executor or SandboxExecutor()
    cache = ExecutionCache()
    dataset = AggDataset()
    artifacts: list[IterationArtifacts] = []
    current_gen = gen_cfg
    previous_verifier: VerifierParams | None = None

    for iteration in range(1, cfg.iterations + 1):
        it_dir = os.path.join(output_dir, f"iteration-{iteration:02d}")
        os.makedirs(it_dir, exist_ok=True)
        if previous_verifier is None:
            strategy = SelectionStrategy(STRATEGY_PUBLIC_TESTS, seed=cfg.selection_seed)
        else:
            strategy = SelectionStrategy(
                STRATEGY_PUBLIC_TESTS_THEN_VERIFIER, seed=cfg.selection_seed
            )
        collect_cfg = replace(current_gen, temperature=cfg.collect_temperature)
        logger.info(
            "iteration %d: collecting rollouts (%d problems, %d candidates/turn)",
            iteration,
            len(train_problems),
            cfg.candidates_per_turn,
        )
        rollout_records = collect_rollouts(
            train_problems,
            collect_cfg,
            env_cfg,
            strategy,
            cfg.candidates_per_turn,
            verifier=previous_verifier,
            iteration=iteration,
            executor=executor,
            cache=cache,
            workers=workers,
        )
        rollouts_path = os.path.join(it_dir, "rollouts.jsonl")
        save_rollouts(rollout_records, rollouts_path)

        dataset = aggregate(dataset, rollout_records, train_problems)
        verifier = train_verifier(dataset, cfg.train_cfg, iteration=iteration)
        verifier.save(os.path.join(it_dir, "verifier.json"))

        expert_records = relabel(dataset, cfg.relabel_weights, verifier)
        ft_path = os.path.join(it_dir, "ft_dataset.jsonl")
        count = emit_ft_dataset(expert_records, dataset.problems, ft_path) if expert_records else 0

        current_gen = _apply_hook(cfg.hook, current_gen, ft_path, count, iteration)

        report = evaluate(
            validation_problems,
            current_gen,
            verifier,
            cfg.validation_grid,
            env_cfg,
            executor,
            cache,
            workers=workers,
        )
        report.save(os.path.join(it_dir, "validation_report.json"))
        accuracy = report.cells[0]["accuracy"] if report.cells else 0.0
        logger.info("iteration %d: validation accuracy %.3f", iteration, accuracy)
        artifacts.append(
            IterationArtifacts(
                iteration=iteration,
                verifier=verifier,
                expert_record_count=count,
                ft_dataset_path=ft_path,
                rollouts_path=rollouts_path,
                validation_report=report,
                validation_accuracy=accuracy,
                generator_cfg=current_gen,
            )
        )
        previous_verifier = verifier

    best = max(range(len(artifacts)), key=lambda i: (artifacts[i].validation_accuracy, -i))
    return artifacts, best
