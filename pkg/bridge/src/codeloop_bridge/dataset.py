"""Dataset plumbing: the engine's file formats in, trainer-native records out.

The engine emits fine-tuning data as line-delimited chat records
(``ftdata-v1``). Conversion to the trainer-native ``bridgeft-v1`` keeps every
engine field verbatim and adds the flattened context/target split the
trainer consumes, so the mapping is lossless and invertible by dropping the
derived fields.

Readers for the engine's corpus (``corpus-v1``) and rollout store
(``rollouts-v1``) parse just the documented fields the reward model needs:
prompts by problem id, and (code, oracle label) observations.
"""

from __future__ import annotations

import json

ENGINE_FT_FORMAT = "ftdata-v1"
BRIDGE_FT_FORMAT = "bridgeft-v1"
ENGINE_CORPUS_FORMAT = "corpus-v1"
ENGINE_ROLLOUTS_FORMAT = "rollouts-v1"

ENGINE_FIELDS = ("problem_id", "messages", "target_oracle", "target_score")


class SchemaError(ValueError):
    pass


def _read_lines(path, expected_format):
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != expected_format:
            raise SchemaError(
                f"{path}: expected {expected_format!r}, got {header.get('format')!r}"
            )
        return [json.loads(line) for line in fh if line.strip()]


def load_engine_ft(path) -> list[dict]:
    records = _read_lines(path, ENGINE_FT_FORMAT)
    for record in records:
        if record["messages"][-1]["role"] != "assistant":
            raise SchemaError(f"{path}: record target must be the final assistant message")
    return records


def to_trainer_record(record: dict) -> dict:
    out = {field: record[field] for field in ENGINE_FIELDS if field in record}
    out["context_messages"] = record["messages"][:-1]
    out["target_text"] = record["messages"][-1]["content"]
    return out


def to_engine_record(trainer_record: dict) -> dict:
    return {
        field: trainer_record[field] for field in ENGINE_FIELDS if field in trainer_record
    }


def convert_ft_dataset(engine_path, trainer_path) -> int:
    """Engine ftdata -> trainer-native file; returns the record count."""
    records = load_engine_ft(engine_path)
    with open(trainer_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": BRIDGE_FT_FORMAT}) + "\n")
        for record in records:
            fh.write(json.dumps(to_trainer_record(record), ensure_ascii=False) + "\n")
    return len(records)


def load_trainer_ft(path) -> list[dict]:
    return _read_lines(path, BRIDGE_FT_FORMAT)


# ---------------------------------------------------------------------------
# reward-model inputs from the engine's corpus and rollout store


def load_prompts(corpus_path) -> dict[str, str]:
    records = _read_lines(corpus_path, ENGINE_CORPUS_FORMAT)
    return {str(r["id"]): r["prompt"] for r in records}


def load_labeled_candidates(rollouts_path, corpus_path) -> list[tuple[str, str, int]]:
    """Distinct (prompt text, code, oracle label) triples from a rollout store."""
    prompts = load_prompts(corpus_path)
    seen = set()
    out = []
    for record in _read_lines(rollouts_path, ENGINE_ROLLOUTS_FORMAT):
        code = record["code"]
        if not code:
            continue
        key = (record["problem_id"], code)
        if key in seen:
            continue
        seen.add(key)
        prompt = prompts.get(str(record["problem_id"]))
        if prompt is None:
            raise SchemaError(f"rollout references unknown problem {record['problem_id']!r}")
        out.append((prompt, code, int(record["oracle"])))
    return out
