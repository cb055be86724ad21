"""Why single-step supervision suffices: the tabular-MDP lab.

In the recoverable family, being wrong at one turn costs exactly that turn:
the optimal advantage of every action sits in [-1, 0]. The control family
locks the episode after one wrong action, so a turn-1 mistake forfeits the
whole horizon and the advantage drops below -1. Imitation learning inherits
the difference: the recoverable performance gap grows linearly with the
horizon, the control gap super-linearly.
"""

import numpy as np

from codeloop.recoverability import (
    build_toy_mdp,
    exact_advantage,
    regret_sweep,
)

print("=== optimal advantages, horizon 3, 3 actions ===")
for recoverable in (True, False):
    mdp = build_toy_mdp(0, 3, 3, recoverable=recoverable)
    values = np.concatenate(list(exact_advantage(mdp).values()))
    label = "recoverable" if recoverable else "control"
    print(f"{label:>12}: advantage range [{values.min():+.1f}, {values.max():+.1f}]")

print(
    "\nThe control's -3.0 is a turn-1 mistake forfeiting all three turns;\n"
    "the recoverable family never loses more than the one turn.\n"
)

print("=== imitation gap vs horizon (exact, no sampling noise) ===")
recoverable = regret_sweep(True, seeds=range(10))
control = regret_sweep(False, seeds=range(10))
print(f"{'horizon':>8} {'recoverable gap':>16} {'control gap':>12}")
for horizon, r_gap, c_gap in zip(
    recoverable.horizons, recoverable.mean_gaps, control.mean_gaps
):
    print(f"{horizon:>8} {r_gap:>16.4f} {c_gap:>12.4f}")
print(
    f"\nfitted growth exponents: recoverable {recoverable.growth_exponent:.2f} "
    f"(linear), control {control.growth_exponent:.2f} (compounding)"
)
print(
    f"policy-class realizability error in both arms: "
    f"{recoverable.realizability_error:.4f} (L1)"
)
