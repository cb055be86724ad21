"""Walk through the multi-turn environment on one problem.

A candidate program runs against the problem's public tests each turn; the
interpreter's own traceback comes back as feedback, and a candidate that
passes the public suite ends the episode. The oracle then judges the final
code against public AND private tests, so a solution that merely hardcodes
the public answer still scores zero.
"""

from codeloop.env import EnvConfig, oracle_reward, reset, step
from codeloop.problems import ASSERT_CODE, Problem, TestCase
from codeloop.prompts import render_initial_prompt
from codeloop.sandbox import ExecLimits, SandboxExecutor

problem = Problem(
    id="demo/running-total",
    prompt="Write a function running_total(xs) that returns the list of prefix sums of xs.",
    test_kind=ASSERT_CODE,
    entry_point="running_total",
    public_tests=(
        TestCase(kind=ASSERT_CODE, code="assert running_total([1, 2, 3]) == [1, 3, 6]"),
    ),
    private_tests=(
        TestCase(kind=ASSERT_CODE, code="assert running_total([]) == []"),
        TestCase(kind=ASSERT_CODE, code="assert running_total([5]) == [5]"),
        TestCase(kind=ASSERT_CODE, code="assert running_total([2, -2, 2]) == [2, 0, 2]"),
    ),
)

cfg = EnvConfig(max_turns=3, limits=ExecLimits(wall_timeout=6))
executor = SandboxExecutor()

print("=== initial prompt (what a generator would see) ===")
print(render_initial_prompt(problem))
print()

# Turn 1: an off-by-one attempt. The public test fails and the traceback
# becomes the next user message.
state = reset(problem)
buggy = (
    "def running_total(xs):\n"
    "    total = 0\n"
    "    out = []\n"
    "    for x in xs:\n"
    "        out.append(total)\n"
    "        total += x\n"
    "    return out\n"
)
outcome = step(state, buggy, cfg, executor)
print(f"=== turn 1: buggy attempt -> terminated={outcome.terminated} ===")
print(outcome.next_state.history[-1][1])
print()

# Turn 2: fixed. All public tests pass and the episode terminates.
state = outcome.next_state
fixed = (
    "def running_total(xs):\n"
    "    total = 0\n"
    "    out = []\n"
    "    for x in xs:\n"
    "        total += x\n"
    "        out.append(total)\n"
    "    return out\n"
)
outcome = step(state, fixed, cfg, executor)
print(f"=== turn 2: fixed attempt -> terminated={outcome.terminated}, reason={outcome.reason} ===")
print()

# The oracle needs public AND private tests to pass.
hardcoded = "def running_total(xs):\n    return [1, 3, 6]\n"
print("oracle(fixed solution)     =", oracle_reward(problem, fixed, cfg, executor))
print("oracle(hardcoded solution) =", oracle_reward(problem, hardcoded, cfg, executor),
      " <- passes public, fails private")
