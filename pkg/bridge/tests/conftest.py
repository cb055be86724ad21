"""Bridge test fixtures: real engine artifacts on disk.

The engine package generates a small corpus, rollout store, and fine-tuning
dataset once per session; bridge code consumes them purely as files.
"""

import json
import os

import pytest


@pytest.fixture(scope="session")
def engine_artifacts(tmp_path_factory):
    from codeloop.env import EnvConfig
    from codeloop.generate import GeneratorConfig
    from codeloop.rollouts import (
        AggDataset,
        RelabelWeights,
        aggregate,
        collect_rollouts,
        emit_ft_dataset,
        relabel,
        save_rollouts,
    )
    from codeloop.sandbox import ExecLimits, SandboxExecutor
    from codeloop.selection import STRATEGY_PUBLIC_TESTS, SelectionStrategy
    from codeloop.toycorpus import build_mock_script, build_toy_corpus
    from codeloop.problems import save_problems

    tmp = tmp_path_factory.mktemp("engine-artifacts")
    problems = build_toy_corpus(6, seed=0)
    corpus_path = tmp / "corpus.jsonl"
    save_problems(problems, str(corpus_path))
    script_path = tmp / "pools.json"
    script_path.write_text(json.dumps(build_mock_script(problems, seed=0)))

    gen_cfg = GeneratorConfig(
        backend="scripted-mock", mock_script=str(script_path), temperature=0.7, seed=3
    )
    env_cfg = EnvConfig(max_turns=3, limits=ExecLimits(wall_timeout=6))
    records = collect_rollouts(
        problems, gen_cfg, env_cfg, SelectionStrategy(STRATEGY_PUBLIC_TESTS), 4,
        iteration=1, executor=SandboxExecutor(), workers=4,
    )
    rollouts_path = tmp / "rollouts.jsonl"
    save_rollouts(records, str(rollouts_path))

    dataset = aggregate(AggDataset(), records, problems)
    expert = relabel(dataset, RelabelWeights(oracle_weight=1.0, learned_weight=0.0), None)
    ft_path = tmp / "ft_dataset.jsonl"
    emit_ft_dataset(expert, dataset.problems, str(ft_path))

    return {
        "corpus": str(corpus_path),
        "rollouts": str(rollouts_path),
        "ft_dataset": str(ft_path),
        "dir": str(tmp),
    }
