"""Fine-tune the tiny generator on a trainer-native dataset."""

from __future__ import annotations

import logging

import torch

from .jobs import BridgeJob
from .tinylm import TinyLM, batch_cross_entropy
from .vocab import ASSISTANT, BOS, encode_text, encode_transcript, truncate_oldest_turns

logger = logging.getLogger(__name__)


def _examples(model: TinyLM, records: list[dict]):
    contexts, targets = [], []
    budget = model.cfg.max_len
    context_cap = max(budget - 72, budget // 2)  # leave room for the target
    for record in records:
        messages, dropped = truncate_oldest_turns(record["context_messages"], context_cap)
        if dropped:
            logger.info("record %s: dropped %d oldest turns", record.get("problem_id"), dropped)
        context = encode_transcript(messages) + [ASSISTANT]
        if len(context) > context_cap:
            # a single oversize message: keep its tail, as serving does
            context = [BOS] + context[-(context_cap - 1):]
        target = encode_text(record["target_text"])[: budget - len(context) - 1]
        if target:
            contexts.append(context)
            targets.append(target)
    return contexts, targets


def finetune_generator(
    model: TinyLM, records: list[dict], job: BridgeJob
) -> tuple[TinyLM, list[float]]:
    """Cross-entropy on the target region of each record; returns the loss trace."""
    hp = job.hyperparameters()
    contexts, targets = _examples(model, records)
    if not contexts:
        raise ValueError("no trainable records (all targets empty after truncation)")
    optimizer = torch.optim.AdamW(model.parameters(), lr=hp["learning_rate"])
    generator = torch.Generator().manual_seed(job.seed)
    trace: list[float] = []
    model.train()
    for _ in range(hp["epochs"]):
        order = torch.randperm(len(contexts), generator=generator).tolist()
        epoch_loss = 0.0
        steps = 0
        for lo in range(0, len(order), hp["batch_size"]):
            batch = order[lo : lo + hp["batch_size"]]
            loss = batch_cross_entropy(
                model, [contexts[i] for i in batch], [targets[i] for i in batch]
            )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.item())
            steps += 1
        trace.append(epoch_loss / max(steps, 1))
        logger.info("fine-tune epoch loss %.4f", trace[-1])
    model.eval()
    return model, trace
