"""A tiny neural reward model scoring (prompt, code) pairs.

Byte embeddings mean-pooled per field feed a two-layer head that outputs one
scalar. Training consumes the engine's rollout store labels, either directly
(binary cross-entropy on the oracle label) or as per-prompt preference pairs
(pairwise logistic loss on correct-vs-incorrect score differences).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .jobs import BridgeJob
from .vocab import VOCAB_SIZE, encode_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardModelConfig:
    d_embed: int = 32
    d_hidden: int = 64
    max_bytes: int = 2048


class TinyRewardModel(nn.Module):
    def __init__(self, cfg: RewardModelConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg or RewardModelConfig()
        torch.manual_seed(seed)
        self.embedding = nn.Embedding(VOCAB_SIZE, self.cfg.d_embed)
        self.head = nn.Sequential(
            nn.Linear(2 * self.cfg.d_embed, self.cfg.d_hidden),
            nn.ReLU(),
            nn.Linear(self.cfg.d_hidden, 1),
        )

    def _pool(self, texts: list[str]) -> torch.Tensor:
        pooled = []
        for text in texts:
            tokens = encode_text(text)[: self.cfg.max_bytes] or [0]
            embedded = self.embedding(torch.tensor(tokens, dtype=torch.long))
            pooled.append(embedded.mean(dim=0))
        return torch.stack(pooled)

    def forward(self, prompts: list[str], codes: list[str]) -> torch.Tensor:
        features = torch.cat([self._pool(prompts), self._pool(codes)], dim=1)
        return self.head(features).squeeze(-1)

    @torch.no_grad()
    def score(self, prompt: str, code: str) -> float:
        self.eval()
        return float(self([prompt], [code]).item())

    def save(self, path) -> None:
        torch.save({"config": asdict(self.cfg), "state": self.state_dict()}, path)

    @classmethod
    def load(cls, path) -> "TinyRewardModel":
        payload = torch.load(path, map_location="cpu", weights_only=True)
        model = cls(RewardModelConfig(**payload["config"]))
        model.load_state_dict(payload["state"])
        model.eval()
        return model


def make_preference_pairs(labeled: list[tuple[str, str, int]]) -> list[tuple[str, str, str]]:
    """(prompt, correct code, incorrect code) per prompt, cross product."""
    by_prompt: dict[str, tuple[list[str], list[str]]] = {}
    for prompt, code, label in labeled:
        goods, bads = by_prompt.setdefault(prompt, ([], []))
        (goods if label == 1 else bads).append(code)
    pairs = []
    for prompt, (goods, bads) in by_prompt.items():
        pairs.extend((prompt, g, b) for g in goods for b in bads)
    return pairs


def train_reward_model(
    labeled: list[tuple[str, str, int]], job: BridgeJob
) -> tuple[TinyRewardModel, list[float]]:
    """Fit the scorer on oracle-labeled candidates; returns the loss trace."""
    if not any(label == 1 for _, _, label in labeled) or not any(
        label == 0 for _, _, label in labeled
    ):
        raise ValueError("reward-model training needs both correct and incorrect examples")
    hp = job.hyperparameters()
    model = TinyRewardModel(seed=job.seed)
    optimizer = torch.optim.AdamW(model.parameters(), lr=hp["learning_rate"])
    generator = torch.Generator().manual_seed(job.seed)
    trace: list[float] = []

    if job.loss_kind == "BT":
        pairs = make_preference_pairs(labeled)
        if not pairs:
            raise ValueError("no preference pairs (no prompt has both labels)")

        def batch_loss(batch):
            prompts = [pairs[i][0] for i in batch]
            chosen = model(prompts, [pairs[i][1] for i in batch])
            rejected = model(prompts, [pairs[i][2] for i in batch])
            return -F.logsigmoid(chosen - rejected).mean()

        count = len(pairs)
    else:

        def batch_loss(batch):
            prompts = [labeled[i][0] for i in batch]
            codes = [labeled[i][1] for i in batch]
            target = torch.tensor([float(labeled[i][2]) for i in batch])
            return F.binary_cross_entropy_with_logits(model(prompts, codes), target)

        count = len(labeled)

    model.train()
    for _ in range(hp["epochs"]):
        order = torch.randperm(count, generator=generator).tolist()
        epoch_loss, steps = 0.0, 0
        for lo in range(0, count, hp["batch_size"]):
            loss = batch_loss(order[lo : lo + hp["batch_size"]])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.item())
            steps += 1
        trace.append(epoch_loss / max(steps, 1))
        logger.info("reward-model epoch loss %.4f", trace[-1])
        if not torch.isfinite(torch.tensor(trace[-1])):
            raise RuntimeError("reward-model training diverged (non-finite loss)")
    model.eval()
    return model, trace


def pairwise_accuracy(model: TinyRewardModel, labeled: list[tuple[str, str, int]]) -> float:
    pairs = make_preference_pairs(labeled)
    if not pairs:
        return 0.0
    wins = sum(model.score(p, g) > model.score(p, b) for p, g, b in pairs)
    return wins / len(pairs)
