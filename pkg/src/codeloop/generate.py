"""Generator backends: chat transcripts, candidate sampling, code extraction.

Two backends share one interface. ``remote-chat`` speaks the ubiquitous HTTP
chat-completions schema (messages array, temperature, max_tokens, n) against
a configured endpoint. ``scripted-mock`` draws completions from per-problem
scripted pools, fully deterministic in (seed, problem id, turn, sample index),
which makes the whole engine testable offline.

Mock script file format ("mockgen-v1"): a JSON document::

    {
      "format": "mockgen-v1",
      "problems": {
        "<problem id>": {
          "stages": [
            {"first": ["<completion>", ...], "retry": ["<completion>", ...]},
            ...
          ]
        }
      }
    }

``stages[k]`` is the pool for a generator at training stage k (stage indexes
past the end clamp to the last entry — a generator can only be trained so
far). ``first`` serves turn 1; ``retry`` serves turns with feedback in the
history and falls back to ``first`` when absent. Completions are full
assistant replies; code is carried in the first fenced block.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace

import requests

from .env import EnvState
from .prompts import extract_code, render_initial_prompt
from .seeding import stable_hash

logger = logging.getLogger(__name__)

BACKEND_REMOTE = "remote-chat"
BACKEND_MOCK = "scripted-mock"

MOCK_SCRIPT_FORMAT = "mockgen-v1"

ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"


class BackendError(RuntimeError):
    """Generation failed after retries, or the backend is misconfigured."""


@dataclass(frozen=True)
class GeneratorConfig:
    backend: str = BACKEND_MOCK
    endpoint: str = ""
    model_id: str = "scripted"
    temperature: float = 0.0
    max_tokens: int = 1000
    seed: int = 0
    concurrency_limit: int = 8
    mock_script: str = ""  # path, for scripted-mock
    stage: int = 0  # scripted-mock training stage
    api_key_env: str = "CODELOOP_API_KEY"
    max_retries: int = 3

    def __post_init__(self):
        if self.backend not in (BACKEND_REMOTE, BACKEND_MOCK):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.temperature < 0 or self.temperature > 2:
            raise ValueError("temperature must be 0 (greedy) or in (0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


def state_to_transcript(state: EnvState, pomdp: bool | None = None) -> list[ChatMessage]:
    """Render an environment state as an alternating user/assistant transcript.

    Message 1 is the initial prompt; each history entry contributes the code
    verbatim as an assistant message and its rendered feedback as the next
    user message.
    """
    messages = [ChatMessage(ROLE_USER, render_initial_prompt(state.problem, pomdp))]
    for code, feedback in state.history:
        messages.append(ChatMessage(ROLE_ASSISTANT, code))
        messages.append(ChatMessage(ROLE_USER, feedback))
    return messages


def transcript_to_wire(messages: list[ChatMessage]) -> list[dict]:
    return [{"role": m.role, "content": m.content} for m in messages]


# ---------------------------------------------------------------------------
# scripted-mock backend


class MockScript:
    """Per-problem candidate pools keyed by training stage and turn position."""

    def __init__(self, pools: dict):
        self.pools = pools

    @classmethod
    def load(cls, path) -> "MockScript":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != MOCK_SCRIPT_FORMAT:
            raise BackendError(
                f"{path}: expected mock script format {MOCK_SCRIPT_FORMAT!r}, "
                f"got {doc.get('format')!r}"
            )
        return cls(doc["problems"])

    @classmethod
    def from_dict(cls, doc: dict) -> "MockScript":
        if doc.get("format") != MOCK_SCRIPT_FORMAT:
            raise BackendError(f"expected format {MOCK_SCRIPT_FORMAT!r}")
        return cls(doc["problems"])

    def pool_for(self, problem_id: str, stage: int, turn: int) -> list[str]:
        entry = self.pools.get(problem_id)
        if entry is None:
            raise BackendError(f"mock script has no pool for problem {problem_id!r}")
        stages = entry["stages"]
        stage_pools = stages[min(stage, len(stages) - 1)]
        key = "retry" if turn > 1 and stage_pools.get("retry") else "first"
        pool = stage_pools.get(key) or stage_pools.get("first") or []
        if not pool:
            raise BackendError(f"mock pool for problem {problem_id!r} is empty")
        return pool


_script_cache: dict[str, MockScript] = {}


def _load_script(cfg: GeneratorConfig) -> MockScript:
    if not cfg.mock_script:
        raise BackendError("scripted-mock backend needs mock_script path")
    script = _script_cache.get(cfg.mock_script)
    if script is None:
        script = MockScript.load(cfg.mock_script)
        _script_cache[cfg.mock_script] = script
    return script


def _mock_generate(state: EnvState, n: int, cfg: GeneratorConfig) -> list[str]:
    script = _load_script(cfg)
    pool = script.pool_for(state.problem.id, cfg.stage, state.turn)
    out = []
    for k in range(n):
        if cfg.temperature == 0.0:
            idx = 0  # greedy: the pool's canonical completion
        else:
            idx = stable_hash(cfg.seed, state.problem.id, state.turn, k, cfg.stage) % len(pool)
        out.append(pool[idx])
    return out


# ---------------------------------------------------------------------------
# remote-chat backend


def _remote_generate(state: EnvState, n: int, cfg: GeneratorConfig) -> list[str]:
    import os

    if not cfg.endpoint:
        raise BackendError("remote-chat backend needs an endpoint URL")
    payload = {
        "model": cfg.model_id,
        "messages": transcript_to_wire(state_to_transcript(state)),
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "n": n,
    }
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(cfg.api_key_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    last_exc: Exception | None = None
    for attempt in range(cfg.max_retries):
        try:
            resp = requests.post(cfg.endpoint, json=payload, headers=headers, timeout=120)
        except requests.RequestException as e:
            last_exc = e
            delay = 2**attempt
            logger.warning("generation attempt %d failed (%s); retrying in %ds", attempt + 1, e, delay)
            time.sleep(delay)
            continue
        if resp.status_code != 200:
            # application errors are not retried
            raise BackendError(f"generator endpoint returned {resp.status_code}: {resp.text[:500]}")
        body = resp.json()
        choices = sorted(body.get("choices", []), key=lambda c: c.get("index", 0))
        contents = [c["message"]["content"] for c in choices]
        if len(contents) != n:
            raise BackendError(f"asked for {n} completions, endpoint returned {len(contents)}")
        return contents
    raise BackendError(f"generation failed after {cfg.max_retries} attempts: {last_exc}")


def generate_candidates(state: EnvState, n: int, cfg: GeneratorConfig) -> list[str]:
    """Sample n completions for the state, ordered by sample index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if cfg.backend == BACKEND_MOCK:
        return _mock_generate(state, n, cfg)
    return _remote_generate(state, n, cfg)


def advance_stage(cfg: GeneratorConfig) -> GeneratorConfig:
    """The scripted-mock notion of 'the generator got fine-tuned'."""
    return replace(cfg, stage=cfg.stage + 1)


__all__ = [
    "BACKEND_MOCK",
    "BACKEND_REMOTE",
    "BackendError",
    "ChatMessage",
    "GeneratorConfig",
    "MockScript",
    "advance_stage",
    "extract_code",
    "generate_candidates",
    "state_to_transcript",
    "transcript_to_wire",
]
