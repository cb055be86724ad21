"""Wire-contract checks for the HTTP surfaces the engine consumes.

Any server claiming to back the remote-chat generator or the remote scorer
must pass these checks; the engine's own test suite runs them against stub
servers and a bridge implementation can run them unchanged against its
endpoints.
"""

from __future__ import annotations

import requests


class ContractViolation(AssertionError):
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ContractViolation(message)


def check_chat_endpoint(endpoint: str, model_id: str = "contract-check", timeout: float = 60.0) -> None:
    """Exercise the chat-completions contract: shape, n fan-out, greedy determinism."""
    base = {
        "model": model_id,
        "messages": [{"role": "user", "content": "Write a Python function implementation for the following prompt:\n\nreturn the integer 1"}],
        "max_tokens": 32,
    }

    # n completions come back, ordered by index, as assistant messages
    resp = requests.post(endpoint, json={**base, "temperature": 0.7, "n": 3}, timeout=timeout)
    _require(resp.status_code == 200, f"expected 200, got {resp.status_code}")
    body = resp.json()
    choices = body.get("choices")
    _require(isinstance(choices, list) and len(choices) == 3, "n=3 must return 3 choices")
    for i, choice in enumerate(choices):
        _require(choice.get("index") == i, "choices must be indexed 0..n-1 in order")
        message = choice.get("message", {})
        _require(message.get("role") == "assistant", "choice role must be assistant")
        _require(isinstance(message.get("content"), str), "choice content must be a string")

    # greedy decoding is deterministic
    first = requests.post(endpoint, json={**base, "temperature": 0.0, "n": 1}, timeout=timeout)
    second = requests.post(endpoint, json={**base, "temperature": 0.0, "n": 1}, timeout=timeout)
    _require(first.status_code == 200 and second.status_code == 200, "greedy requests must succeed")
    c1 = first.json()["choices"][0]["message"]["content"]
    c2 = second.json()["choices"][0]["message"]["content"]
    _require(c1 == c2, "temperature 0 must be deterministic")

    # multi-turn transcripts are accepted
    multi = {
        **base,
        "messages": [
            {"role": "user", "content": "Write a function."},
            {"role": "assistant", "content": "def f():\n    return 0"},
            {"role": "user", "content": "Feedback:\n\nAssertionError"},
        ],
        "temperature": 0.0,
        "n": 1,
    }
    resp = requests.post(endpoint, json=multi, timeout=timeout)
    _require(resp.status_code == 200, "multi-turn transcript must be accepted")


def check_scorer_endpoint(endpoint: str, timeout: float = 60.0) -> None:
    """Exercise the scorer contract: {prompt, code} -> {score: real}, pure."""
    payload = {"prompt": "add two numbers", "code": "def add(a, b):\n    return a + b"}
    first = requests.post(endpoint, json=payload, timeout=timeout)
    _require(first.status_code == 200, f"expected 200, got {first.status_code}")
    score = first.json().get("score")
    _require(isinstance(score, (int, float)), "score must be a number")
    second = requests.post(endpoint, json=payload, timeout=timeout)
    _require(second.json().get("score") == score, "scoring must be pure in (prompt, code)")
    other = requests.post(
        endpoint,
        json={"prompt": "add two numbers", "code": "raise NotImplementedError"},
        timeout=timeout,
    )
    _require(other.status_code == 200, "scorer must score arbitrary code text")
