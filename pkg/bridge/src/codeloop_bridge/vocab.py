"""Byte-level vocabulary for the tiny neural models.

Tokens 0..255 are raw bytes; the specials mark sequence start, message
boundaries by role, and end of generation. Both the generator and the reward
model share this encoding, so there is no tokenizer artifact to ship.
"""

from __future__ import annotations

PAD = 256
BOS = 257
USER = 258
ASSISTANT = 259
EOS = 260

VOCAB_SIZE = 261

_ROLE_TOKENS = {"user": USER, "assistant": ASSISTANT}


def encode_text(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def decode_tokens(tokens: list[int]) -> str:
    return bytes(t for t in tokens if t < 256).decode("utf-8", errors="replace")


def encode_transcript(messages: list[dict]) -> list[int]:
    """BOS, then each message as its role token followed by its bytes."""
    out = [BOS]
    for message in messages:
        out.append(_ROLE_TOKENS[message["role"]])
        out.extend(encode_text(message["content"]))
    return out


def truncate_oldest_turns(messages: list[dict], max_len: int) -> tuple[list[dict], int]:
    """Drop the oldest (assistant, user) history pair until the encoding fits.

    The initial message always survives; returns (messages, dropped pairs).
    """
    dropped = 0
    current = list(messages)
    while len(encode_transcript(current)) + 2 > max_len and len(current) > 2:
        current = [current[0]] + current[3:]
        dropped += 1
    return current, dropped
