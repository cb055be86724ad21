"""Prompt templates and code-block extraction.

The initial-turn and feedback-turn templates are frozen verbatim; golden-file
tests guard them against drift. Function-style problems (assert tests) and
competitive-programming problems (stdio tests) use different initial wordings.
"""

from __future__ import annotations

import re

from .problems import ASSERT_CODE, Problem

FUNCTION_PROMPT_TEMPLATE = """Write a Python function implementation for the following prompt:

{prompt}

Your code should satisfy these tests:

{test}

Please follow the following instructions:
- Reason about the problem and any base cases before writing the code.
- You must return the implementation code in the following format:
```python
<CODE GOES HERE>
```
- You must only return a single code block since we only parse the first code block.
- Do not include any tests in your code - we will run the suite and return any error feedback.
- Include relevant import statements."""

FUNCTION_PROMPT_TEMPLATE_NO_TESTS = """Write a Python function implementation for the following prompt:

{prompt}

Please follow the following instructions:
- Reason about the problem and any base cases before writing the code.
- You must return the implementation code in the following format:
```python
<CODE GOES HERE>
```
- You must only return a single code block since we only parse the first code block.
- Do not include any tests in your code - we will run the suite and return any error feedback.
- Include relevant import statements."""

# The line break after the colon carries a trailing space in the frozen
# template; "\x20" keeps it visible and editor-proof.
STDIO_PROMPT_TEMPLATE = (
    "Provide a Python solution for the following competitive programming question:\x20\n"
    "\n"
    "{prompt}\n"
    "\n"
    "Your code should be enclosed in triple backticks like so: "
    "```python YOUR CODE HERE```. Use the backticks for your code only."
)

FEEDBACK_TEMPLATE = "Feedback:\n\n{feedback}"

NO_CODE_FEEDBACK = "No code block found in response."

# First fenced block, with or without a language tag on the opening fence.
_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def render_initial_prompt(p: Problem, pomdp: bool | None = None) -> str:
    """Render the first user message for a problem.

    ``pomdp`` overrides the problem's own flag when given; when hidden, the
    "Your code should satisfy these tests:" section is omitted entirely.
    Stdio problems use the competitive-programming wording and never embed
    tests in the prompt.
    """
    hide_tests = p.pomdp if pomdp is None else pomdp
    if p.test_kind != ASSERT_CODE:
        return STDIO_PROMPT_TEMPLATE.format(prompt=p.prompt)
    if hide_tests:
        return FUNCTION_PROMPT_TEMPLATE_NO_TESTS.format(prompt=p.prompt)
    test_block = "\n".join(t.code for t in p.public_tests)
    return FUNCTION_PROMPT_TEMPLATE.format(prompt=p.prompt, test=test_block)


def render_feedback_turn(feedback: str) -> str:
    """Wrap raw executor output as the feedback user message."""
    if not feedback:
        raise ValueError("feedback must be non-empty")
    return FEEDBACK_TEMPLATE.format(feedback=feedback)


def extract_code(completion: str) -> str | None:
    """Return the contents of the first fenced code block, or None if absent.

    Only the first fence counts; anything outside it is ignored. A missing
    fence is a value (None), not an error - the caller burns a turn on it.
    """
    m = _FENCE_RE.search(completion)
    if m is None:
        return None
    return m.group(1).rstrip("\n")
