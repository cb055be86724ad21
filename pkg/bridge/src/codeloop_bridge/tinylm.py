"""A tiny byte-level causal language model, trained and served on CPU.

Small enough to fine-tune in seconds on the engine's emitted datasets while
honoring the serving semantics the engine relies on: temperature 0 decodes
greedily (deterministic), positive temperatures sample with a seeded
generator, and each request can fan out to n independent completions capped
at max_tokens.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .vocab import ASSISTANT, BOS, EOS, PAD, VOCAB_SIZE, decode_tokens, encode_transcript, truncate_oldest_turns

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TinyLMConfig:
    vocab_size: int = VOCAB_SIZE
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_len: int = 640
    dropout: float = 0.0


class Block(nn.Module):
    def __init__(self, cfg: TinyLMConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = nn.MultiheadAttention(
            cfg.d_model, cfg.n_heads, dropout=cfg.dropout, batch_first=True
        )
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff),
            nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.d_model),
        )

    def forward(self, x, causal_mask, key_padding_mask=None):
        normed = self.ln1(x)
        attended, _ = self.attn(
            normed,
            normed,
            normed,
            attn_mask=causal_mask,
            key_padding_mask=key_padding_mask,
            need_weights=False,
        )
        x = x + attended
        x = x + self.mlp(self.ln2(x))
        return x


class TinyLM(nn.Module):
    def __init__(self, cfg: TinyLMConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg or TinyLMConfig()
        torch.manual_seed(seed)
        self.tok_emb = nn.Embedding(self.cfg.vocab_size, self.cfg.d_model)
        self.pos_emb = nn.Embedding(self.cfg.max_len, self.cfg.d_model)
        self.blocks = nn.ModuleList(Block(self.cfg) for _ in range(self.cfg.n_layers))
        self.ln_f = nn.LayerNorm(self.cfg.d_model)
        self.head = nn.Linear(self.cfg.d_model, self.cfg.vocab_size, bias=False)

    def forward(self, tokens: torch.Tensor, key_padding_mask: torch.Tensor | None = None):
        _, seq_len = tokens.shape
        positions = torch.arange(seq_len, device=tokens.device)
        x = self.tok_emb(tokens) + self.pos_emb(positions)[None, :, :]
        causal = torch.triu(
            torch.ones((seq_len, seq_len), dtype=torch.bool, device=tokens.device), diagonal=1
        )
        for block in self.blocks:
            x = block(x, causal, key_padding_mask)
        return self.head(self.ln_f(x))

    # -- serving ------------------------------------------------------------

    def _context_tokens(self, messages: list[dict]) -> list[int]:
        budget = self.cfg.max_len - 1
        trimmed, dropped = truncate_oldest_turns(messages, budget - 32)
        if dropped:
            logger.info("truncated %d oldest history turns to fit the context", dropped)
        tokens = encode_transcript(trimmed) + [ASSISTANT]
        if len(tokens) > budget:  # a single oversize message: keep the tail
            tokens = [BOS] + tokens[-(budget - 1):]
        return tokens

    @torch.no_grad()
    def complete(
        self,
        messages: list[dict],
        temperature: float = 0.0,
        max_tokens: int = 128,
        n: int = 1,
        seed: int | None = None,
    ) -> list[str]:
        """n completions of the transcript, each capped at max_tokens."""
        self.eval()
        context = self._context_tokens(messages)
        outputs = []
        for choice_index in range(n):
            generator = None
            if temperature > 0:
                material = f"{seed if seed is not None else 0}:{choice_index}"
                digest = hashlib.blake2b(material.encode(), digest_size=8).digest()
                generator = torch.Generator().manual_seed(int.from_bytes(digest, "big") >> 1)
            tokens = list(context)
            produced: list[int] = []
            for _ in range(max_tokens):
                window = tokens[-self.cfg.max_len:]
                logits = self(torch.tensor([window], dtype=torch.long))[0, -1]
                if temperature == 0.0:
                    nxt = int(torch.argmax(logits).item())
                else:
                    probs = F.softmax(logits / temperature, dim=-1)
                    nxt = int(torch.multinomial(probs, 1, generator=generator).item())
                if nxt == EOS:
                    break
                tokens.append(nxt)
                produced.append(nxt)
            outputs.append(decode_tokens(produced))
        return outputs

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        torch.save({"config": asdict(self.cfg), "state": self.state_dict()}, path)

    @classmethod
    def load(cls, path) -> "TinyLM":
        payload = torch.load(path, map_location="cpu", weights_only=True)
        model = cls(TinyLMConfig(**payload["config"]))
        model.load_state_dict(payload["state"])
        model.eval()
        return model


def batch_cross_entropy(model: TinyLM, contexts: list[list[int]], targets: list[list[int]]):
    """Loss over target regions only, with right padding masked out."""
    rows = []
    labels = []
    for context, target in zip(contexts, targets):
        sequence = context + target + [EOS]
        sequence = sequence[: model.cfg.max_len]
        row_labels = [-100] * len(context) + list(target) + [EOS]
        row_labels = row_labels[: model.cfg.max_len]
        rows.append(sequence)
        labels.append(row_labels)
    width = max(len(r) for r in rows)
    padded = torch.full((len(rows), width), PAD, dtype=torch.long)
    label_tensor = torch.full((len(rows), width), -100, dtype=torch.long)
    padding_mask = torch.ones((len(rows), width), dtype=torch.bool)
    for i, (row, row_labels) in enumerate(zip(rows, labels)):
        padded[i, : len(row)] = torch.tensor(row)
        label_tensor[i, : len(row_labels)] = torch.tensor(row_labels)
        padding_mask[i, : len(row)] = False
    logits = model(padded, key_padding_mask=padding_mask)
    # next-token prediction: logits at position t predict token t+1
    shifted_logits = logits[:, :-1, :].reshape(-1, model.cfg.vocab_size)
    shifted_labels = label_tensor[:, 1:].reshape(-1)
    return F.cross_entropy(shifted_logits, shifted_labels, ignore_index=-100)
