"""Multi-turn code environment: states, transitions, termination, oracle reward.

A state is the interaction history — the problem plus the ordered
(code, feedback) pairs executed so far. Stepping runs the candidate on the
PUBLIC tests only; the episode ends on an all-pass or when the turn limit is
hit. The oracle reward is a pure function of (problem, code): 1 iff the code
passes every public AND private test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .problems import Problem
from .sandbox import (
    STATUS_ALL_PASS,
    ExecLimits,
    ExecutionResult,
    SandboxExecutor,
    no_code_result,
    render_feedback,
)

REASON_RUNNING = "running"
REASON_PUBLIC_PASS = "public-pass"
REASON_TURN_LIMIT = "turn-limit"


@dataclass(frozen=True)
class EnvConfig:
    """Environment knobs.

    ``discount`` is recorded for bookkeeping only; neither the training loop
    nor the inference search discounts anything, so no computation reads it.
    """

    max_turns: int = 3
    limits: ExecLimits = field(default_factory=ExecLimits)
    discount: float = 0.99

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if not (0.0 <= self.discount < 1.0):
            raise ValueError("discount must be in [0, 1)")


@dataclass(frozen=True)
class EnvState:
    """Immutable interaction history. turn = len(history) + 1."""

    problem: Problem
    history: tuple[tuple[str, str], ...] = ()

    @property
    def turn(self) -> int:
        return len(self.history) + 1


@dataclass(frozen=True)
class StepOutcome:
    next_state: EnvState
    terminated: bool
    reason: str
    public_result: ExecutionResult

    def __post_init__(self):
        assert self.terminated == (self.reason != REASON_RUNNING)


def reset(problem: Problem) -> EnvState:
    """Fresh episode: empty history, turn 1."""
    return EnvState(problem=problem)


def run_public_tests(
    problem: Problem,
    code: str | None,
    cfg: EnvConfig,
    executor: SandboxExecutor | None = None,
) -> ExecutionResult:
    """Execute a candidate on the problem's public tests only.

    A problem with no public tests (everything held out) vacuously passes;
    termination then rests entirely on the oracle's private run.
    """
    if code is None:
        return no_code_result()
    executor = executor or SandboxExecutor()
    if not problem.public_tests:
        return ExecutionResult(status=STATUS_ALL_PASS, per_test=(), feedback="", wall_time=0.0)
    return executor.execute(code, list(problem.public_tests), cfg.limits)


def step(
    state: EnvState,
    code: str | None,
    cfg: EnvConfig,
    executor: SandboxExecutor | None = None,
    public_result: ExecutionResult | None = None,
) -> StepOutcome:
    """Execute one turn's candidate on the public tests and advance the state.

    ``code=None`` marks a response with no extractable code block; it burns
    the turn with the fixed extraction-failure feedback. ``public_result``
    may carry a result the caller already computed for (code, public tests,
    cfg.limits) to skip re-execution; semantics are identical.
    """
    if state.turn > cfg.max_turns:
        raise ValueError("cannot step a terminal state (turn limit already reached)")
    executor = executor or SandboxExecutor()
    if public_result is None:
        public_result = run_public_tests(state.problem, code, cfg, executor)
    if public_result.all_passed:
        return StepOutcome(
            next_state=state,
            terminated=True,
            reason=REASON_PUBLIC_PASS,
            public_result=public_result,
        )
    feedback = render_feedback(public_result, cfg.limits)
    next_state = EnvState(
        problem=state.problem, history=state.history + ((code or "", feedback),)
    )
    if state.turn >= cfg.max_turns:
        return StepOutcome(
            next_state=next_state,
            terminated=True,
            reason=REASON_TURN_LIMIT,
            public_result=public_result,
        )
    return StepOutcome(
        next_state=next_state,
        terminated=False,
        reason=REASON_RUNNING,
        public_result=public_result,
    )


def oracle_reward(
    problem: Problem,
    code: str | None,
    cfg: EnvConfig,
    executor: SandboxExecutor | None = None,
) -> int:
    """1 iff ``code`` passes every public and private test; else 0.

    Pure in (problem, code): the interaction history that produced the code
    is irrelevant. Sandbox infrastructure failures raise; they are never
    scored as 0.
    """
    if code is None or not code.strip():
        return 0
    executor = executor or SandboxExecutor()
    public = run_public_tests(problem, code, cfg, executor)
    if not public.all_passed:
        return 0
    if not problem.private_tests:
        return 1
    private = executor.execute(code, list(problem.private_tests), cfg.limits)
    return 1 if private.all_passed else 0
