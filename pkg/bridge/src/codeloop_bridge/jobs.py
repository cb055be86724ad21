"""Bridge job descriptions with the documented default hyperparameters.

The defaults mirror a full-scale training recipe (tiny learning rates, two
epochs); the smoke-scale models used in tests override them, since a
randomly initialized 64-dim model learns nothing at 5e-7.
"""

from __future__ import annotations

from dataclasses import dataclass, field

JOB_SERVE_GENERATOR = "serve-generator"
JOB_FINETUNE_GENERATOR = "finetune-generator"
JOB_TRAIN_REWARD_MODEL = "train-reward-model"
JOB_SERVE_SCORER = "serve-scorer"

JOB_KINDS = (
    JOB_SERVE_GENERATOR,
    JOB_FINETUNE_GENERATOR,
    JOB_TRAIN_REWARD_MODEL,
    JOB_SERVE_SCORER,
)

GENERATOR_DEFAULTS = {
    "learning_rate": 5e-7,
    "batch_size": 32,
    "epochs": 2,
    "max_seq_len": 4096,
}

REWARD_MODEL_DEFAULTS = {
    "learning_rate": 1e-6,
    "batch_size": 64,
    "epochs": 2,
    "max_seq_len": 2048,
}


@dataclass(frozen=True)
class BridgeJob:
    kind: str
    dataset_path: str = ""
    base_model_path: str = ""
    learning_rate: float | None = None
    batch_size: int | None = None
    epochs: int | None = None
    loss_kind: str = "BT"  # reward model only
    seed: int = 0

    def __post_init__(self):
        if self.kind not in JOB_KINDS:
            raise ValueError(f"unknown bridge job kind {self.kind!r}")

    def hyperparameters(self) -> dict:
        defaults = (
            REWARD_MODEL_DEFAULTS
            if self.kind == JOB_TRAIN_REWARD_MODEL
            else GENERATOR_DEFAULTS
        )
        return {
            "learning_rate": self.learning_rate or defaults["learning_rate"],
            "batch_size": self.batch_size or defaults["batch_size"],
            "epochs": self.epochs or defaults["epochs"],
        }
