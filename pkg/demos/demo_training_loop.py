"""The full iterative training loop on the synthetic corpus.

Each iteration: roll out the current generator with execution feedback,
aggregate every candidate with its oracle label, train the ranking verifier,
relabel all visited states with the per-prompt best candidate (oracle label
dominant, squashed verifier score as tie-breaker), emit the fine-tuning
dataset, and let the training hook advance the scripted generator to its
next stage. Validation accuracy rises as the stages improve.
"""

import json
import os
import tempfile

from codeloop.env import EnvConfig
from codeloop.generate import GeneratorConfig
from codeloop.orchestrate import (
    HOOK_MOCK_STAGE,
    EvalGrid,
    IterationConfig,
    TrainingHook,
    run_expert_iteration,
)
from codeloop.rollouts import load_ft_dataset
from codeloop.sandbox import ExecLimits, SandboxExecutor
from codeloop.selection import STRATEGY_PUBLIC_TESTS_THEN_VERIFIER, SelectionStrategy
from codeloop.toycorpus import build_mock_script, build_toy_corpus
from codeloop.verifier import TrainConfig

out_dir = tempfile.mkdtemp(prefix="loop-demo-")
problems = build_toy_corpus(24, seed=0)
script_path = os.path.join(out_dir, "pools.json")
with open(script_path, "w") as fh:
    json.dump(build_mock_script(problems, seed=0), fh)

gen_cfg = GeneratorConfig(
    backend="scripted-mock", mock_script=script_path, temperature=0.7, seed=5
)
env_cfg = EnvConfig(max_turns=3, limits=ExecLimits(wall_timeout=6))
cfg = IterationConfig(
    iterations=2,
    candidates_per_turn=5,
    train_cfg=TrainConfig(epochs=5, learning_rate=0.5, seed=1),
    hook=TrainingHook(kind=HOOK_MOCK_STAGE),
    validation_grid=EvalGrid(
        strategies=(SelectionStrategy(STRATEGY_PUBLIC_TESTS_THEN_VERIFIER, seed=3),),
        n_values=(1,),
        max_turns=3,
    ),
    selection_seed=3,
)

artifacts, best = run_expert_iteration(
    problems, problems, gen_cfg, env_cfg, cfg, out_dir,
    executor=SandboxExecutor(), workers=8,
)

print(f"\nartifacts under {out_dir}\n")
print(f"{'iteration':>9} {'expert records':>15} {'verifier loss':>14} {'greedy accuracy':>16}")
for art in artifacts:
    print(
        f"{art.iteration:>9} {art.expert_record_count:>15} "
        f"{art.verifier.loss_trace[-1]:>14.4f} {art.validation_accuracy:>16.2f}"
    )
print(f"\nbest iteration by validation accuracy: {artifacts[best].iteration}")

rows = load_ft_dataset(artifacts[best].ft_dataset_path)
multi_turn = next(r for r in rows if len(r["messages"]) > 2)
print("\none emitted fine-tuning record (roles):",
      [m["role"] for m in multi_turn["messages"]])
print("its target is oracle-correct:", bool(multi_turn["target_oracle"]))
