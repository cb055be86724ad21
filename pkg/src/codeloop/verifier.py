"""Learned single-step verifier: scores (prompt, code) pairs for ranking.

The desk-scale scorer is a hashed linear model. Features of a (prompt, code)
pair, dimension d (default 4096):

  slot 0        constant bias (1.0)
  slot 1        code length bucket, min(len(code) // 64, 32)
  slot 2        number of function definitions in the code
  slot 3        1.0 if the code contains a loop keyword (for / while)
  slot 4        1.0 if the code contains a conditional keyword (if / elif / else)
  slots 5..d-1  hashed counts: prompt tokens (namespace "p"), code tokens
                ("c"), and code token bigrams ("b"); the slot of a token is
                5 + blake2b-64("<ns>\\x1f<token>") mod (d - 5)

Deterministic in (prompt, code) and never sees the interaction history, so a
score is identical no matter which trajectory produced the candidate.

Training supports two objectives on oracle-labeled candidates: plain binary
cross-entropy on labels, and a pairwise Bradley-Terry loss on (correct,
incorrect) pairs built per prompt. Both add an L2 penalty lambda * ||w||^2.
An HTTP adapter exposes the same scoring contract for a remotely served
neural verifier.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .problems import Problem
from .seeding import derive_seed, stable_hash

DEFAULT_DIM = 4096
_RESERVED = 5

LOSS_BCE = "BCE"
LOSS_BT = "BT"

PARAMS_FORMAT = "verifier-v1"

_TOKEN_RE = re.compile(r"[A-Za-z_]\w*|\d+|[^\sA-Za-z0-9_]")
_DEF_RE = re.compile(r"\bdef\s+\w+")
_LOOP_RE = re.compile(r"\b(for|while)\b")
_COND_RE = re.compile(r"\b(if|elif|else)\b")


class TrainingError(RuntimeError):
    """Training cannot proceed (typically: no usable data)."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def feature_slot(namespace: str, token: str, dim: int = DEFAULT_DIM) -> int:
    """Documented hash position of a token feature; stable across runs."""
    return _RESERVED + stable_hash(namespace, token) % (dim - _RESERVED)


def featurize(p: Problem, code: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Feature vector of a (prompt, code) pair; see module docstring."""
    v = np.zeros(dim, dtype=np.float64)
    v[0] = 1.0
    v[1] = min(len(code) // 64, 32)
    v[2] = len(_DEF_RE.findall(code))
    v[3] = 1.0 if _LOOP_RE.search(code) else 0.0
    v[4] = 1.0 if _COND_RE.search(code) else 0.0
    for tok in tokenize(p.prompt):
        v[feature_slot("p", tok, dim)] += 1.0
    code_tokens = tokenize(code)
    for tok in code_tokens:
        v[feature_slot("c", tok, dim)] += 1.0
    for a, b in zip(code_tokens, code_tokens[1:]):
        v[feature_slot("b", a + "\x1f" + b, dim)] += 1.0
    return v


@dataclass
class VerifierParams:
    weights: np.ndarray
    trained_on_iteration: int = 0
    loss_kind: str = LOSS_BT
    seed: int = 0
    loss_trace: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def save(self, path) -> None:
        doc = {
            "format": PARAMS_FORMAT,
            "dim": self.dim,
            "trained_on_iteration": self.trained_on_iteration,
            "loss_kind": self.loss_kind,
            "seed": self.seed,
            "loss_trace": self.loss_trace,
            "weights": self.weights.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "VerifierParams":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != PARAMS_FORMAT:
            raise ValueError(f"{path}: not a {PARAMS_FORMAT} file")
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            trained_on_iteration=doc.get("trained_on_iteration", 0),
            loss_kind=doc.get("loss_kind", LOSS_BT),
            seed=doc.get("seed", 0),
            loss_trace=list(doc.get("loss_trace", [])),
        )

    @classmethod
    def zeros(cls, dim: int = DEFAULT_DIM, **kw) -> "VerifierParams":
        return cls(weights=np.zeros(dim, dtype=np.float64), **kw)


@dataclass(frozen=True)
class PreferencePair:
    """A (correct, incorrect) candidate pair for one prompt."""

    problem: Problem
    y_plus: str
    y_minus: str

    def __post_init__(self):
        if self.y_plus == self.y_minus:
            raise ValueError("preference pair must contain two distinct codes")

    @property
    def problem_id(self) -> str:
        return self.problem.id


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = LOSS_BT
    learning_rate: float = 0.1
    epochs: int = 8
    batch_size: int = 32
    pair_cap: int = 64
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss_kind not in (LOSS_BCE, LOSS_BT):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")


def sigmoid(z):
    """Numerically stable logistic function, scalar or array."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def score(params: VerifierParams, p: Problem, code: str) -> float:
    """Dot product of the weights with featurize(p, code); pure in (p, code)."""
    phi = featurize(p, code, params.dim)
    return float(params.weights @ phi)


def score_many(params: VerifierParams, p: Problem, codes: list[str]) -> list[float]:
    return [score(params, p, c) for c in codes]


# ---------------------------------------------------------------------------
# losses (array cores shared by the public ops and the trainer)


def _bce_core(w: np.ndarray, feats: np.ndarray, labels: np.ndarray, l2: float):
    scores = feats @ w
    probs = np.clip(sigmoid(scores), 1e-12, 1.0 - 1e-12)
    loss = float(np.mean(-labels * np.log(probs) - (1.0 - labels) * np.log(1.0 - probs)))
    loss += l2 * float(w @ w)
    grad = feats.T @ (sigmoid(scores) - labels) / len(labels) + 2.0 * l2 * w
    return loss, grad


def _bt_core(w: np.ndarray, delta_feats: np.ndarray, l2: float):
    deltas = delta_feats @ w
    # -log sigmoid(delta) == log(1 + exp(-delta)), computed stably
    loss = float(np.mean(np.logaddexp(0.0, -deltas))) + l2 * float(w @ w)
    grad = -(delta_feats.T @ sigmoid(-deltas)) / len(deltas) + 2.0 * l2 * w
    return loss, grad


def bce_loss_and_grad(
    params: VerifierParams, batch: list[tuple[Problem, str, int]], l2: float = 1e-4
):
    """Mean binary cross-entropy of oracle labels plus L2, with exact gradient."""
    if not batch:
        raise TrainingError("BCE loss needs a non-empty batch")
    feats = np.stack([featurize(p, code, params.dim) for p, code, _ in batch])
    labels = np.array([float(r) for _, _, r in batch])
    return _bce_core(params.weights, feats, labels, l2)


def bt_loss_and_grad(params: VerifierParams, pairs: list[PreferencePair], l2: float = 1e-4):
    """Mean pairwise -log sigmoid(score(y+) - score(y-)) plus L2, exact gradient."""
    if not pairs:
        raise TrainingError("BT loss needs a non-empty pair list")
    delta = np.stack(
        [
            featurize(pr.problem, pr.y_plus, params.dim)
            - featurize(pr.problem, pr.y_minus, params.dim)
            for pr in pairs
        ]
    )
    return _bt_core(params.weights, delta, l2)


# ---------------------------------------------------------------------------
# pair construction and training


def make_pairs(dataset, cap: int = 64, seed: int = 0) -> list[PreferencePair]:
    """Per prompt: deduplicated correct x incorrect cross product, capped.

    ``dataset`` must expose ``by_problem() -> dict[pid, (Problem,
    list[(code, oracle)])]`` (the aggregated rollout store does). Prompts
    lacking either class contribute nothing. When the cross product exceeds
    ``cap``, a per-prompt seeded uniform subsample keeps exactly ``cap``.
    """
    pairs: list[PreferencePair] = []
    view = dataset.by_problem()
    for pid in sorted(view):
        problem, candidates = view[pid]
        correct: list[str] = []
        incorrect: list[str] = []
        for code, r in candidates:
            bucket = correct if r == 1 else incorrect
            if code not in bucket:
                bucket.append(code)
        if not correct or not incorrect:
            continue
        cross = [(yp, ym) for yp in correct for ym in incorrect if yp != ym]
        if len(cross) > cap:
            rng = np.random.default_rng(derive_seed(seed, f"pairs:{pid}"))
            keep = sorted(rng.choice(len(cross), size=cap, replace=False).tolist())
            cross = [cross[i] for i in keep]
        pairs.extend(PreferencePair(problem, yp, ym) for yp, ym in cross)
    return pairs


def train_verifier(dataset, cfg: TrainConfig, iteration: int = 0) -> VerifierParams:
    """Seeded mini-batch gradient descent on the configured loss.

    Deterministic for fixed (dataset, cfg). The returned params carry the
    per-epoch full-data loss trace.
    """
    view = dataset.by_problem()
    dim = DEFAULT_DIM

    if cfg.loss_kind == LOSS_BCE:
        items = [
            (problem, code, r)
            for pid in sorted(view)
            for problem, candidates in [view[pid]]
            for code, r in candidates
        ]
        if not items:
            raise TrainingError("no labeled candidates to train BCE on")
        feats = np.stack([featurize(p, c, dim) for p, c, _ in items])
        labels = np.array([float(r) for _, _, r in items])

        def batch_loss_grad(w, idx):
            return _bce_core(w, feats[idx], labels[idx], cfg.l2)

        def full_loss(w):
            return _bce_core(w, feats, labels, cfg.l2)[0]

        count = len(items)
    else:
        pairs = make_pairs(dataset, cap=cfg.pair_cap, seed=cfg.seed)
        if not pairs:
            raise TrainingError(
                "no preference pairs: need prompts with both correct and incorrect candidates"
            )
        delta = np.stack(
            [
                featurize(pr.problem, pr.y_plus, dim) - featurize(pr.problem, pr.y_minus, dim)
                for pr in pairs
            ]
        )

        def batch_loss_grad(w, idx):
            return _bt_core(w, delta[idx], cfg.l2)

        def full_loss(w):
            return _bt_core(w, delta, cfg.l2)[0]

        count = len(pairs)

    rng = np.random.default_rng(derive_seed(cfg.seed, "train-verifier"))
    w = np.zeros(dim, dtype=np.float64)
    trace: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(count)
        for lo in range(0, count, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            _, grad = batch_loss_grad(w, idx)
            w = w - cfg.learning_rate * grad
        trace.append(full_loss(w))
    return VerifierParams(
        weights=w,
        trained_on_iteration=iteration,
        loss_kind=cfg.loss_kind,
        seed=cfg.seed,
        loss_trace=trace,
    )


# ---------------------------------------------------------------------------
# remote scorer adapter


class RemoteScorer:
    """HTTP adapter satisfying the scoring contract: {prompt, code} -> {score}."""

    def __init__(self, endpoint: str, max_retries: int = 3, timeout: float = 30.0):
        self.endpoint = endpoint
        self.max_retries = max_retries
        self.timeout = timeout

    def score(self, p: Problem, code: str) -> float:
        import requests

        last_exc = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"prompt": p.prompt, "code": code},
                    timeout=self.timeout,
                )
            except requests.RequestException as e:
                last_exc = e
                time.sleep(2**attempt)
                continue
            if resp.status_code != 200:
                raise RuntimeError(f"scorer endpoint returned {resp.status_code}: {resp.text[:200]}")
            return float(resp.json()["score"])
        raise RuntimeError(f"scorer unreachable after {self.max_retries} attempts: {last_exc}")
