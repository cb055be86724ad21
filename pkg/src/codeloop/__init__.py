"""Multi-turn code generation engine.

A coding problem is attempted over several turns: each turn the generator
proposes complete candidate programs, the public tests run in a sandbox, a
selection strategy picks one candidate, and its execution feedback flows into
the next turn. Training alternates rollout collection, verifier fitting on
oracle labels, expert relabeling of every visited state to the per-prompt
best candidate, and fine-tuning dataset emission. Inference scales by
sampling N candidates per turn and letting public tests and the learned
verifier pick. A small tabular-MDP lab checks the one-step-recoverability
structure that justifies the whole recipe.
"""

from .env import EnvConfig, EnvState, StepOutcome, oracle_reward, reset, step
from .generate import GeneratorConfig, extract_code, generate_candidates, state_to_transcript
from .orchestrate import EvalGrid, IterationConfig, RunReport, evaluate, multi_turn_bon, run_expert_iteration
from .problems import Problem, TestCase, load_problems, make_pomdp_variant, save_problems, split_tests
from .rollouts import AggDataset, RelabelWeights, aggregate, collect_rollouts, relabel, select_expert
from .sandbox import ExecLimits, ExecutionResult, SandboxExecutor, render_feedback
from .selection import SelectionStrategy, select_candidate
from .verifier import TrainConfig, VerifierParams, featurize, score, train_verifier

__version__ = "0.1.0"

__all__ = [
    "AggDataset",
    "EnvConfig",
    "EnvState",
    "EvalGrid",
    "ExecLimits",
    "ExecutionResult",
    "GeneratorConfig",
    "IterationConfig",
    "Problem",
    "RelabelWeights",
    "RunReport",
    "SandboxExecutor",
    "SelectionStrategy",
    "StepOutcome",
    "TestCase",
    "TrainConfig",
    "VerifierParams",
    "aggregate",
    "collect_rollouts",
    "evaluate",
    "extract_code",
    "featurize",
    "generate_candidates",
    "load_problems",
    "make_pomdp_variant",
    "multi_turn_bon",
    "oracle_reward",
    "relabel",
    "render_feedback",
    "reset",
    "run_expert_iteration",
    "save_problems",
    "score",
    "select_candidate",
    "select_expert",
    "split_tests",
    "state_to_transcript",
    "step",
    "train_verifier",
]
