"""Synthetic tabular MDPs probing one-step recoverability.

The toy task mirrors the code environment's structure: a prompt is drawn, an
episode runs for a fixed number of turns, each turn picks one action from a
small set, a turn earns one unit of reward iff its action is correct for the
prompt, and the learner observes whether its last action was correct. In the
recoverable family, correctness depends only on (prompt, action), so the DP
advantage of any wrong action is exactly -1 (one forfeited turn). The
non-recoverable control locks the episode after the first wrong action -
every later turn earns nothing - so the advantage of a wrong action at turn
t is -(remaining turns), breaching the [-1, 0] band.

The imitation experiments use a tabular policy over (prompt bucket, last
observation) with an optional probability floor (a bounded-logit softmax
cannot place probability one on a label; the floor is exactly that cap).
Rollout, relabel, aggregate and refit are computed with exact occupancy
weights over the compressed policy state, so regret curves carry no Monte
Carlo noise; refitting by weighted label frequency is the exact
cross-entropy minimizer over the class, i.e. follow-the-leader.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_seed

OBS_START = 2  # no action taken yet

DEFAULT_STATE_CAP = 500_000


class StateSpaceError(ValueError):
    """Enumerating this MDP would exceed the configured state cap."""


def observation_for(correct: bool) -> int:
    """Deterministic observation of the last action's correctness."""
    return 1 if correct else 0


@dataclass(frozen=True)
class ToyMDP:
    horizon: int
    num_actions: int
    rewards: np.ndarray  # (num_prompts, num_actions) in {0, 1}
    recoverable: bool
    prompt_weights: np.ndarray  # (num_prompts,), sums to 1

    @property
    def num_prompts(self) -> int:
        return int(self.rewards.shape[0])

    def correct(self, prompt: int, action: int) -> bool:
        return self.rewards[prompt, action] == 1

    def locked(self, history: tuple[int, ...], prompt: int) -> bool:
        """Control only: has any past action been wrong?"""
        if self.recoverable:
            return False
        return any(not self.correct(prompt, a) for a in history)

    def effective_reward(self, prompt: int, history: tuple[int, ...], action: int) -> float:
        if self.locked(history, prompt):
            return 0.0
        return float(self.rewards[prompt, action])

    def expert_action(self, prompt: int) -> int:
        return int(np.argmax(self.rewards[prompt]))


def build_toy_mdp(
    seed: int,
    horizon: int,
    num_actions: int,
    recoverable: bool = True,
    num_prompts: int = 4,
    single_correct: bool = False,
) -> ToyMDP:
    """Random reward table with at least one correct action per prompt.

    ``single_correct`` forces exactly one correct action per prompt (the
    imitation experiments want an unambiguous expert).
    """
    if horizon < 1 or num_actions < 2:
        raise ValueError("need horizon >= 1 and num_actions >= 2")
    rng = np.random.default_rng(derive_seed(seed, "toy-mdp"))
    if single_correct:
        rewards = np.zeros((num_prompts, num_actions), dtype=np.int64)
        for x in range(num_prompts):
            rewards[x, rng.integers(num_actions)] = 1
    else:
        rewards = (rng.random((num_prompts, num_actions)) < 0.35).astype(np.int64)
        for x in range(num_prompts):
            if rewards[x].sum() == 0:
                rewards[x, rng.integers(num_actions)] = 1
    weights = np.full(num_prompts, 1.0 / num_prompts)
    return ToyMDP(
        horizon=horizon,
        num_actions=num_actions,
        rewards=rewards,
        recoverable=recoverable,
        prompt_weights=weights,
    )


# ---------------------------------------------------------------------------
# exact dynamic programming over full histories


def _check_size(mdp: ToyMDP, cap: int) -> None:
    states = mdp.num_prompts * sum(mdp.num_actions**t for t in range(mdp.horizon))
    if states > cap:
        raise StateSpaceError(f"{states} enumerable states exceed cap {cap}")


def _histories(mdp: ToyMDP, length: int):
    if length == 0:
        yield ()
        return
    for prefix in _histories(mdp, length - 1):
        for a in range(mdp.num_actions):
            yield prefix + (a,)


def exact_advantage(
    mdp: ToyMDP, cap: int = DEFAULT_STATE_CAP
) -> dict[tuple[int, tuple[int, ...]], np.ndarray]:
    """A*(s, a) for every enumerable state, by exact backward induction."""
    _check_size(mdp, cap)
    q_star: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}

    def v_star(prompt: int, history: tuple[int, ...]) -> float:
        if len(history) >= mdp.horizon:
            return 0.0
        return float(np.max(q(prompt, history)))

    def q(prompt: int, history: tuple[int, ...]) -> np.ndarray:
        key = (prompt, history)
        if key in q_star:
            return q_star[key]
        values = np.empty(mdp.num_actions)
        for a in range(mdp.num_actions):
            r = mdp.effective_reward(prompt, history, a)
            values[a] = r + v_star(prompt, history + (a,))
        q_star[key] = values
        return values

    advantages: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}
    for prompt in range(mdp.num_prompts):
        for t in range(mdp.horizon):
            for history in _histories(mdp, t):
                qs = q(prompt, history)
                advantages[(prompt, history)] = qs - np.max(qs)
    return advantages


def policy_values(mdp: ToyMDP, policy, cap: int = DEFAULT_STATE_CAP):
    """Q^pi and V^pi for an arbitrary stochastic policy, by exact DP.

    ``policy(prompt, history) -> np.ndarray(num_actions)`` of probabilities.
    """
    _check_size(mdp, cap)
    q_pi: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}

    def v(prompt: int, history: tuple[int, ...]) -> float:
        if len(history) >= mdp.horizon:
            return 0.0
        return float(policy(prompt, history) @ q(prompt, history))

    def q(prompt: int, history: tuple[int, ...]) -> np.ndarray:
        key = (prompt, history)
        if key in q_pi:
            return q_pi[key]
        values = np.empty(mdp.num_actions)
        for a in range(mdp.num_actions):
            r = mdp.effective_reward(prompt, history, a)
            values[a] = r + v(prompt, history + (a,))
        q_pi[key] = values
        return values

    return q, v


def policy_return(mdp: ToyMDP, policy, cap: int = DEFAULT_STATE_CAP) -> float:
    """J(pi): expected total reward over prompts."""
    _, v = policy_values(mdp, policy, cap)
    return float(
        sum(mdp.prompt_weights[x] * v(x, ()) for x in range(mdp.num_prompts))
    )


def optimal_return(mdp: ToyMDP) -> float:
    """J(pi*): the expert earns every turn (a correct action always exists
    and, in the control, the expert is never locked)."""
    return float(mdp.horizon)


def state_distribution(mdp: ToyMDP, policy, cap: int = DEFAULT_STATE_CAP):
    """d^pi_t over full histories: list (per turn) of {(prompt, history): mass}."""
    _check_size(mdp, cap)
    layers = []
    current = {
        (x, ()): float(mdp.prompt_weights[x]) for x in range(mdp.num_prompts)
    }
    for _ in range(mdp.horizon):
        layers.append(current)
        nxt: dict[tuple[int, tuple[int, ...]], float] = {}
        for (x, h), mass in current.items():
            probs = policy(x, h)
            for a in range(mdp.num_actions):
                if probs[a] == 0.0:
                    continue
                nxt[(x, h + (a,))] = nxt.get((x, h + (a,)), 0.0) + mass * probs[a]
        current = nxt
    return layers


def pdl_decomposition(mdp: ToyMDP, pi, pi_prime, cap: int = DEFAULT_STATE_CAP):
    """Both sides of the performance-difference identity for (pi, pi_prime).

    Returns (J(pi) - J(pi_prime), sum_t E_{s~d^pi_t}[sum_a A^{pi'}(s,a) pi(a|s)]).
    """
    lhs = policy_return(mdp, pi, cap) - policy_return(mdp, pi_prime, cap)
    q_prime, v_prime = policy_values(mdp, pi_prime, cap)
    rhs = 0.0
    for layer in state_distribution(mdp, pi, cap):
        for (x, h), mass in layer.items():
            advantage = q_prime(x, h) - v_prime(x, h)
            rhs += mass * float(pi(x, h) @ advantage)
    return lhs, rhs


# ---------------------------------------------------------------------------
# tabular policy class over (prompt bucket, last observation)


@dataclass(frozen=True)
class PolicyClass:
    """Features and capacity of the imitation learner.

    ``buckets=None`` keeps one context per prompt (lossless). ``min_prob`` is
    the per-action probability floor of the bounded-logit softmax; 0 recovers
    the pure tabular class (realizability error 0).
    """

    buckets: int | None = None
    min_prob: float = 0.0

    def bucket(self, prompt: int) -> int:
        return prompt if self.buckets is None else prompt % self.buckets


class TabularPolicy:
    """Per-(bucket, last observation) categorical distribution over actions."""

    def __init__(self, policy_class: PolicyClass, num_actions: int):
        self.policy_class = policy_class
        self.num_actions = num_actions
        self.table: dict[tuple[int, int], np.ndarray] = {}

    def probs(self, bucket: int, obs: int) -> np.ndarray:
        dist = self.table.get((bucket, obs))
        if dist is None:
            return np.full(self.num_actions, 1.0 / self.num_actions)
        return dist

    def fit(self, counts: dict[tuple[int, int], np.ndarray]) -> None:
        """Weighted label frequencies, floored and renormalized."""
        floor = self.policy_class.min_prob
        self.table = {}
        for context, c in counts.items():
            total = c.sum()
            if total <= 0:
                continue
            dist = c / total
            if floor > 0.0:
                dist = np.maximum(dist, floor)
                dist = dist / dist.sum()
            self.table[context] = dist

    def as_history_policy(self, mdp: ToyMDP):
        """Adapter onto full-history DP: derives the last observation."""

        def policy(prompt: int, history: tuple[int, ...]) -> np.ndarray:
            obs = OBS_START if not history else observation_for(mdp.correct(prompt, history[-1]))
            return self.probs(self.policy_class.bucket(prompt), obs)

        return policy


def _compressed_occupancy(mdp: ToyMDP, policy: TabularPolicy):
    """Exact d^pi over (prompt, last obs, locked), summed over turns.

    The policy only reads (bucket, obs), and the dynamics only need the
    locked flag, so this small recursion is exact.
    """
    current: dict[tuple[int, int, bool], float] = {
        (x, OBS_START, False): float(mdp.prompt_weights[x]) for x in range(mdp.num_prompts)
    }
    total: dict[tuple[int, int, bool], float] = {}
    value = 0.0
    for _ in range(mdp.horizon):
        for key, mass in current.items():
            total[key] = total.get(key, 0.0) + mass
        nxt: dict[tuple[int, int, bool], float] = {}
        for (x, obs, locked), mass in current.items():
            probs = policy.probs(policy.policy_class.bucket(x), obs)
            for a in range(mdp.num_actions):
                p = float(probs[a])
                if p == 0.0:
                    continue
                correct = mdp.correct(x, a)
                if correct and not locked:
                    value += mass * p
                nobs = observation_for(correct)
                nlocked = locked if mdp.recoverable else (locked or not correct)
                key = (x, nobs, nlocked)
                nxt[key] = nxt.get(key, 0.0) + mass * p
        current = nxt
    return total, value


def exact_return(mdp: ToyMDP, policy: TabularPolicy) -> float:
    """J(pi) for a tabular policy, via the compressed occupancy recursion."""
    _, value = _compressed_occupancy(mdp, policy)
    return value


def _expert_l1(mdp: ToyMDP, policy: TabularPolicy, occupancy) -> float:
    """E_{s ~ d}[ ||pi(.|s) - pi*(.|s)||_1 ], normalized over turns."""
    total_mass = sum(occupancy.values())
    if total_mass == 0:
        return 0.0
    acc = 0.0
    for (x, obs, _), mass in occupancy.items():
        probs = policy.probs(policy.policy_class.bucket(x), obs)
        expert = np.zeros(mdp.num_actions)
        expert[mdp.expert_action(x)] = 1.0
        acc += mass * float(np.abs(probs - expert).sum())
    return acc / total_mass


@dataclass
class ImitationResult:
    gaps: list[float]
    best_gap: float
    realizability_error: float
    average_regret: float


def run_imitation(
    mdp: ToyMDP,
    policy_class: PolicyClass,
    iterations: int = 10,
    mode: str = "dagger",
) -> ImitationResult:
    """Interactive imitation (state aggregation) or plain behavior cloning.

    dagger: iterate [roll out the current policy, relabel its visited states
    with the expert action, aggregate, refit]. bc: fit once per iteration on
    the expert's own state distribution (no interaction). Everything uses
    exact occupancy weights; gaps are exact.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if mode not in ("dagger", "bc"):
        raise ValueError(f"unknown mode {mode!r}")
    policy = TabularPolicy(policy_class, mdp.num_actions)
    expert_policy = TabularPolicy(PolicyClass(), mdp.num_actions)
    expert_policy.fit(
        {
            (x, obs): np.eye(mdp.num_actions)[mdp.expert_action(x)]
            for x in range(mdp.num_prompts)
            for obs in (OBS_START, 0, 1)
        }
    )

    aggregated: dict[tuple[int, int], np.ndarray] = {}
    optimal = optimal_return(mdp)
    gaps: list[float] = []
    per_iteration_l1: list[float] = []
    occupancies = []

    for _ in range(iterations):
        if mode == "bc":
            occupancy, _ = _compressed_occupancy(mdp, expert_policy)
        else:
            occupancy, _ = _compressed_occupancy(mdp, policy)
        occupancies.append(occupancy)
        for (x, obs, _), mass in occupancy.items():
            context = (policy_class.bucket(x), obs)
            counts = aggregated.setdefault(context, np.zeros(mdp.num_actions))
            counts[mdp.expert_action(x)] += mass
        policy = TabularPolicy(policy_class, mdp.num_actions)
        policy.fit(aggregated)
        gaps.append(optimal - exact_return(mdp, policy))
        occ_now, _ = _compressed_occupancy(mdp, policy)
        per_iteration_l1.append(_expert_l1(mdp, policy, occ_now))

    # average online regret: average surrogate loss of the iterates minus the
    # best fixed policy in class evaluated on the same distributions
    best_fixed = TabularPolicy(policy_class, mdp.num_actions)
    best_fixed.fit(aggregated)
    fixed_losses = [_expert_l1(mdp, best_fixed, occ) for occ in occupancies]
    realized = float(np.mean(per_iteration_l1))
    average_regret = max(0.0, realized - float(np.mean(fixed_losses)))
    realizability = float(np.mean(fixed_losses))
    return ImitationResult(
        gaps=gaps,
        best_gap=min(gaps),
        realizability_error=realizability,
        average_regret=average_regret,
    )


# ---------------------------------------------------------------------------
# regret growth versus horizon


@dataclass
class RegretReport:
    horizons: list[int]
    mean_gaps: list[float]
    growth_exponent: float
    realizability_error: float
    average_regret: float
    mode: str
    recoverable: bool

    def to_dict(self) -> dict:
        return {
            "format": "regret-v1",
            "horizons": self.horizons,
            "mean_gaps": self.mean_gaps,
            "growth_exponent": self.growth_exponent,
            "realizability_error": self.realizability_error,
            "average_regret": self.average_regret,
            "mode": self.mode,
            "recoverable": self.recoverable,
        }


def fit_growth_exponent(horizons, gaps) -> float:
    """Least-squares slope of log gap against log horizon."""
    x = np.log(np.asarray(horizons, dtype=np.float64))
    y = np.log(np.maximum(np.asarray(gaps, dtype=np.float64), 1e-300))
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))


def regret_sweep(
    recoverable: bool,
    horizons=(2, 4, 8),
    seeds=range(10),
    num_actions: int = 4,
    num_prompts: int = 12,
    min_prob: float = 1.0 / 150.0,
    iterations: int = 8,
) -> RegretReport:
    """Average gap per horizon over seeds, with the fitted growth exponent.

    The recoverable arm runs interactive imitation; the control arm runs
    behavior cloning (the classic compounding-error setting).
    """
    mode = "dagger" if recoverable else "bc"
    policy_class = PolicyClass(buckets=None, min_prob=min_prob)
    mean_gaps = []
    eps_values = []
    regret_values = []
    for horizon in horizons:
        gaps = []
        for seed in seeds:
            mdp = build_toy_mdp(
                seed,
                horizon,
                num_actions,
                recoverable=recoverable,
                num_prompts=num_prompts,
                single_correct=True,
            )
            result = run_imitation(mdp, policy_class, iterations=iterations, mode=mode)
            gaps.append(result.best_gap)
            eps_values.append(result.realizability_error)
            regret_values.append(result.average_regret)
        mean_gaps.append(float(np.mean(gaps)))
    exponent = fit_growth_exponent(list(horizons), mean_gaps)
    return RegretReport(
        horizons=list(horizons),
        mean_gaps=mean_gaps,
        growth_exponent=exponent,
        realizability_error=float(np.mean(eps_values)),
        average_regret=float(np.mean(regret_values)),
        mode=mode,
        recoverable=recoverable,
    )
