"""Deterministic fan-out of one global seed into per-module seeds.

Derivation: ``blake2b(f"{seed}:{label}", digest_size=8)`` interpreted as an
unsigned big-endian integer, reduced mod 2**32. Stable across platforms and
Python versions (never the salted builtin ``hash``).
"""

from __future__ import annotations

import hashlib


def derive_seed(global_seed: int, label: str) -> int:
    digest = hashlib.blake2b(f"{global_seed}:{label}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2**32)


def stable_hash(*parts) -> int:
    """Order-sensitive 64-bit hash of string-convertible parts."""
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(joined.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")
