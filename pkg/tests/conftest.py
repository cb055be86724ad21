import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from codeloop.env import EnvConfig
from codeloop.problems import load_problems
from codeloop.sandbox import ExecLimits, SandboxExecutor

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
GOLDEN_DIR = os.path.join(DATA_DIR, "golden")
FIXTURE_CORPUS = os.path.join(DATA_DIR, "fixture_corpus.jsonl")


def read_golden(name: str) -> str:
    with open(os.path.join(GOLDEN_DIR, name), "r", encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def fast_limits():
    return ExecLimits(wall_timeout=6.0, max_output=64 * 1024, max_feedback_len=4000)


@pytest.fixture(scope="session")
def executor():
    return SandboxExecutor()


@pytest.fixture(scope="session")
def env_cfg(fast_limits):
    return EnvConfig(max_turns=3, limits=fast_limits)


@pytest.fixture(scope="session")
def fixture_problems():
    return load_problems(FIXTURE_CORPUS)


@pytest.fixture(scope="session")
def problems_by_id(fixture_problems):
    return {p.id: p for p in fixture_problems}


@pytest.fixture()
def tmp_jsonl(tmp_path):
    def write(name, lines):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(json.dumps(line) + "\n")
        return str(path)

    return write
