"""Run configuration: JSON schema, validation, and typed construction.

A run config is a single JSON document validated against CONFIG_SCHEMA before
any work starts; validation errors name the offending field path. One global
seed fans out to per-module seeds through the documented derivation in
``seeding``.
"""

from __future__ import annotations

import hashlib
import json

import jsonschema

from .env import EnvConfig
from .generate import BACKEND_MOCK, BACKEND_REMOTE, GeneratorConfig
from .orchestrate import (
    HOOK_COMMAND,
    HOOK_MOCK_STAGE,
    HOOK_NONE,
    EvalGrid,
    IterationConfig,
    TrainingHook,
)
from .rollouts import RelabelWeights
from .sandbox import ExecLimits
from .seeding import derive_seed
from .selection import ALL_STRATEGIES, STRATEGY_PUBLIC_TESTS, SelectionStrategy
from .verifier import LOSS_BCE, LOSS_BT, TrainConfig


class ConfigError(ValueError):
    """Invalid run configuration; message names the field path."""


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["corpus", "seed", "output_dir", "generator"],
    "additionalProperties": False,
    "properties": {
        "corpus": {"type": "string"},
        "validation_corpus": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "generator": {
            "type": "object",
            "required": ["backend"],
            "additionalProperties": False,
            "properties": {
                "backend": {"enum": [BACKEND_MOCK, BACKEND_REMOTE]},
                "endpoint": {"type": "string"},
                "model_id": {"type": "string"},
                "temperature": {"type": "number", "minimum": 0, "maximum": 2},
                "max_tokens": {"type": "integer", "minimum": 1},
                "mock_script": {"type": "string"},
                "stage": {"type": "integer", "minimum": 0},
                "concurrency_limit": {"type": "integer", "minimum": 1},
            },
        },
        "env": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_turns": {"type": "integer", "minimum": 1},
                "discount": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "limits": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "wall_timeout": {"type": "number", "exclusiveMinimum": 0},
                        "max_output": {"type": "integer", "exclusiveMinimum": 0},
                        "max_feedback_len": {"type": "integer", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "verifier": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "loss": {"enum": [LOSS_BCE, LOSS_BT]},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "pair_cap": {"type": "integer", "minimum": 1},
                "l2": {"type": "number", "minimum": 0},
                "params_path": {"type": "string"},
            },
        },
        "collection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "strategy": {"enum": list(ALL_STRATEGIES)},
                "candidates_per_turn": {"type": "integer", "minimum": 1},
                "temperature": {"type": "number", "minimum": 0, "maximum": 2},
                "rollouts_path": {"type": "string"},
            },
        },
        "iteration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer", "minimum": 1},
                "candidates_per_turn": {"type": "integer", "minimum": 1},
                "collect_temperature": {"type": "number", "minimum": 0, "maximum": 2},
                "oracle_weight": {"type": "number", "minimum": 0},
                "learned_weight": {"type": "number", "minimum": 0},
                "hook": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": [HOOK_NONE, HOOK_MOCK_STAGE, HOOK_COMMAND]},
                        "command_template": {"type": "string"},
                    },
                },
            },
        },
        "evaluation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "strategies": {
                    "type": "array",
                    "items": {"enum": list(ALL_STRATEGIES)},
                    "minItems": 1,
                },
                "n_values": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
                "pomdp": {"type": "boolean"},
                "max_turns": {"type": "integer", "minimum": 1},
                "sampling_temperature": {"type": "number", "minimum": 0, "maximum": 2},
            },
        },
        "lab": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizons": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 2},
                    "minItems": 2,
                },
                "num_seeds": {"type": "integer", "minimum": 1},
                "num_actions": {"type": "integer", "minimum": 2},
                "num_prompts": {"type": "integer", "minimum": 1},
                "min_prob": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
                "iterations": {"type": "integer", "minimum": 1},
                "def_check_mdps": {"type": "integer", "minimum": 1},
            },
        },
    },
}


def load_config(path) -> dict:
    """Parse and schema-validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config field {e.json_path}: {e.message}") from e
    return doc


def config_hash(doc: dict) -> str:
    """Stable hash of the canonical JSON form."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def generator_config(doc: dict) -> GeneratorConfig:
    g = doc["generator"]
    return GeneratorConfig(
        backend=g["backend"],
        endpoint=g.get("endpoint", ""),
        model_id=g.get("model_id", "scripted"),
        temperature=g.get("temperature", 0.0),
        max_tokens=g.get("max_tokens", 1000),
        seed=derive_seed(doc["seed"], "generator"),
        concurrency_limit=g.get("concurrency_limit", 8),
        mock_script=g.get("mock_script", ""),
        stage=g.get("stage", 0),
    )


def env_config(doc: dict) -> EnvConfig:
    e = doc.get("env", {})
    lim = e.get("limits", {})
    return EnvConfig(
        max_turns=e.get("max_turns", 3),
        discount=e.get("discount", 0.99),
        limits=ExecLimits(
            wall_timeout=lim.get("wall_timeout", 10.0),
            max_output=lim.get("max_output", 64 * 1024),
            max_feedback_len=lim.get("max_feedback_len", 4000),
        ),
    )


def train_config(doc: dict) -> TrainConfig:
    v = doc.get("verifier", {})
    return TrainConfig(
        loss_kind=v.get("loss", LOSS_BT),
        learning_rate=v.get("learning_rate", 0.1),
        epochs=v.get("epochs", 8),
        batch_size=v.get("batch_size", 32),
        pair_cap=v.get("pair_cap", 64),
        l2=v.get("l2", 1e-4),
        seed=derive_seed(doc["seed"], "verifier"),
    )


def collection_strategy(doc: dict) -> SelectionStrategy:
    c = doc.get("collection", {})
    return SelectionStrategy(
        kind=c.get("strategy", STRATEGY_PUBLIC_TESTS),
        seed=derive_seed(doc["seed"], "selection"),
    )


def iteration_config(doc: dict) -> IterationConfig:
    it = doc.get("iteration", {})
    hook = it.get("hook", {})
    return IterationConfig(
        iterations=it.get("iterations", 2),
        candidates_per_turn=it.get("candidates_per_turn", 5),
        collect_temperature=it.get("collect_temperature", 0.7),
        relabel_weights=RelabelWeights(
            oracle_weight=it.get("oracle_weight", 1.0),
            learned_weight=it.get("learned_weight", 0.1),
        ),
        train_cfg=train_config(doc),
        hook=TrainingHook(
            kind=hook.get("kind", HOOK_NONE),
            command_template=hook.get("command_template", ""),
        ),
        validation_grid=eval_grid(doc, default_n=(1,)),
        selection_seed=derive_seed(doc["seed"], "selection"),
    )


def eval_grid(doc: dict, default_n: tuple[int, ...] = (1, 5)) -> EvalGrid:
    ev = doc.get("evaluation", {})
    seed = derive_seed(doc["seed"], "selection")
    strategies = tuple(
        SelectionStrategy(kind=k, seed=seed)
        for k in ev.get("strategies", ["public-tests-then-verifier"])
    )
    return EvalGrid(
        strategies=strategies,
        n_values=tuple(ev.get("n_values", list(default_n))),
        pomdp=ev.get("pomdp", False),
        max_turns=ev.get("max_turns", doc.get("env", {}).get("max_turns", 3)),
        sampling_temperature=ev.get("sampling_temperature", 0.7),
    )
