"""Deterministic synthetic corpus plus scripted generator pools.

Each toy problem asks for a one-argument linear function; the public test
pins the value at x=1 and private tests pin three more points, so a solution
hardcoding the public answer passes the public suite and fails the oracle
(the classic public/private gap). Candidate pools give the scripted backend
a repertoire: correct variants, an off-by-one slope, a runtime error, the
public-only hardcode, and a code-free reply.

Problems cycle through three difficulty classes controlling when correct
candidates appear in the pools:

  easy    correct candidates present from the first turn at every stage
  medium  stage 0 only recovers after feedback; sampling finds first-turn
          solutions from stage 1; greedy only solves at stage 2
  hard    correct candidates only ever appear after feedback

Later stages are at least as good as earlier ones (a fine-tuned generator);
the canonical (greedy) completion moves from wrong to correct as stages
advance, so greedy accuracy rises across training iterations.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .generate import MOCK_SCRIPT_FORMAT
from .problems import ASSERT_CODE, Problem, TestCase, save_problems
from .seeding import derive_seed

EASY, MEDIUM, HARD = "easy", "medium", "hard"


def _difficulty(index: int) -> str:
    return (EASY, MEDIUM, HARD)[index % 3]


def _params(index: int, seed: int) -> tuple[int, int]:
    rng = np.random.default_rng(derive_seed(seed, f"toy-problem:{index}"))
    return int(rng.integers(2, 9)), int(rng.integers(1, 9))


def build_toy_problem(index: int, seed: int = 0) -> Problem:
    slope, shift = _params(index, seed)
    name = f"scale_shift_{index}"
    prompt = (
        f"Write a function {name}(x) that returns {slope} * x + {shift} "
        f"for an integer x."
    )
    points = [1, 2, 5, -3]
    tests = [
        TestCase(kind=ASSERT_CODE, code=f"assert {name}({x}) == {slope * x + shift}")
        for x in points
    ]
    return Problem(
        id=f"toy/{index:03d}",
        prompt=prompt,
        test_kind=ASSERT_CODE,
        public_tests=(tests[0],),
        private_tests=tuple(tests[1:]),
        entry_point=name,
    )


def build_toy_corpus(num_problems: int, seed: int = 0) -> list[Problem]:
    return [build_toy_problem(i, seed) for i in range(num_problems)]


def _wrap(body: str, note: str) -> str:
    return f"{note}\n\n```python\n{body}\n```"


def _candidates(index: int, seed: int) -> dict[str, str]:
    slope, shift = _params(index, seed)
    name = f"scale_shift_{index}"
    return {
        "correct": _wrap(
            f"def {name}(x):\n    return {slope} * x + {shift}",
            "The function is linear in x.",
        ),
        "correct_alt": _wrap(
            f"def {name}(x):\n    scaled = {slope} * x\n    return scaled + {shift}",
            "Scale first, then shift.",
        ),
        "correct_alt2": _wrap(
            f"def {name}(x):\n    total = {shift}\n    total += {slope} * x\n    return total",
            "Accumulate the shift and the scaled term.",
        ),
        "off_by_one": _wrap(
            f"def {name}(x):\n    return {slope} * x + {shift} + 1",
            "Apply the scale and shift.",
        ),
        "wrong_slope": _wrap(
            f"def {name}(x):\n    return {slope + 1} * x + {shift}",
            "Multiply and add the offset.",
        ),
        "hardcode": _wrap(
            f"def {name}(x):\n    return {slope + shift}",
            "The sample test expects this value.",
        ),
        "error": _wrap(
            f"def {name}(x):\n    return {slope} * x + offset",
            "Use the configured offset.",
        ),
        "no_code": "I would multiply x by the slope and add the shift, "
        "but I need more details about the expected types before writing code.",
    }


def build_mock_script(problems: list[Problem], seed: int = 0) -> dict:
    """Three-stage pools per problem; see the module docstring for the shape.

    The public-only hardcode appears in pools only alongside correct
    candidates: a pool whose sole public passer games the tests would force
    every test-first selection into a dead end, which models an adversarial
    benchmark rather than a trainable generator.
    """
    pools: dict[str, dict] = {}
    for problem in problems:
        index = int(problem.id.rsplit("/", 1)[-1])
        c = _candidates(index, seed)
        difficulty = _difficulty(index)
        if difficulty == EASY:
            stage0 = {
                "first": [
                    c["off_by_one"],  # canonical: greedy fails at stage 0
                    c["correct"],
                    c["wrong_slope"],
                    c["hardcode"],
                    c["error"],
                    c["no_code"],
                ],
                "retry": [
                    c["correct"],
                    c["off_by_one"],
                    c["correct_alt"],
                    c["wrong_slope"],
                    c["error"],
                ],
            }
            stage1 = {
                "first": [
                    c["correct"],  # canonical: greedy solves at stage >= 1
                    c["correct_alt"],
                    c["wrong_slope"],
                    c["hardcode"],
                    c["correct_alt2"],
                    c["off_by_one"],
                ],
                "retry": [
                    c["correct"],
                    c["correct_alt"],
                    c["correct_alt2"],
                    c["off_by_one"],
                ],
            }
            stage2 = stage1
        elif difficulty == MEDIUM:
            stage0 = {
                "first": [
                    c["wrong_slope"],
                    c["off_by_one"],
                    c["error"],
                    c["no_code"],
                ],
                "retry": [
                    c["off_by_one"],
                    c["correct"],
                    c["wrong_slope"],
                    c["correct_alt"],
                    c["error"],
                ],
            }
            stage1 = {
                # sampled candidates include correct code, but the canonical
                # completion stays wrong: greedy only recovers at stage 2
                "first": [
                    c["wrong_slope"],
                    c["correct"],
                    c["correct_alt"],
                    c["hardcode"],
                    c["off_by_one"],
                ],
                "retry": [
                    c["off_by_one"],
                    c["correct"],
                    c["correct_alt"],
                    c["correct_alt2"],
                ],
            }
            stage2 = {
                "first": [
                    c["correct"],
                    c["wrong_slope"],
                    c["correct_alt"],
                    c["hardcode"],
                    c["off_by_one"],
                    c["correct_alt2"],
                ],
                "retry": [
                    c["correct"],
                    c["correct_alt"],
                    c["off_by_one"],
                    c["correct_alt2"],
                ],
            }
        else:  # hard: correct code only ever appears after feedback
            stage0 = {
                "first": [
                    c["wrong_slope"],
                    c["off_by_one"],
                    c["error"],
                    c["no_code"],
                ],
                "retry": [
                    c["wrong_slope"],
                    c["correct"],
                    c["hardcode"],
                    c["off_by_one"],
                    c["error"],
                ],
            }
            stage1 = {
                "first": [
                    c["off_by_one"],
                    c["wrong_slope"],
                    c["error"],
                    c["no_code"],
                ],
                "retry": [
                    c["correct"],
                    c["correct_alt"],
                    c["off_by_one"],
                    c["correct_alt2"],
                ],
            }
            stage2 = stage1
        pools[problem.id] = {"stages": [stage0, stage1, stage2]}
    return {"format": MOCK_SCRIPT_FORMAT, "problems": pools}


def write_toy_setup(
    directory: str, num_problems: int = 50, seed: int = 0
) -> tuple[str, str]:
    """Write a corpus file and matching mock script; returns their paths."""
    os.makedirs(directory, exist_ok=True)
    problems = build_toy_corpus(num_problems, seed)
    corpus_path = os.path.join(directory, "toy_corpus.jsonl")
    script_path = os.path.join(directory, "toy_mock.json")
    save_problems(problems, corpus_path)
    with open(script_path, "w", encoding="utf-8") as fh:
        json.dump(build_mock_script(problems, seed), fh, indent=2)
    return corpus_path, script_path
