"""Seeded MDP families used by tests and experiments."""
from __future__ import annotations

import numpy as np

from ..mdp import Mdp


def generate_garnet(n_states: int, n_actions: int, branching: int, cost_seed: int,
                    transition_seed: int, gamma: float = 0.9, c_max: float = 1.0) -> Mdp:
    """Random MDP: each ``(s, a)`` reaches exactly ``branching`` states.

    Next states are a uniformly random subset with Dirichlet(1) weights; costs
    are uniform on ``[0, c_max]``. Costs and transitions use separate seeds.
    """
    if n_states < 1 or n_actions < 1:
        raise ValueError("need at least one state and one action")
    if not 1 <= branching <= n_states:
        raise ValueError(f"branching must lie in [1, {n_states}], got {branching}")
    t_rng = np.random.default_rng(transition_seed)
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            support = t_rng.choice(n_states, size=branching, replace=False)
            w = t_rng.dirichlet(np.ones(branching))
            # Dirichlet draws can underflow to exact zeros; keep the support size honest
            w = np.maximum(w, 1e-12)
            P[s, a, support] = w / w.sum()
    cost = np.random.default_rng(cost_seed).uniform(0.0, c_max, size=(n_states, n_actions))
    mdp = Mdp(P, cost, gamma, c_max)
    mdp.validate()
    return mdp


def generate_chain(n_states: int, slip: float = 0.0, gamma: float = 0.9) -> Mdp:
    """Chain with a rewarding (zero-cost) right end.

    Action 0 moves one step right w.p. ``1 - slip`` and stays put otherwise;
    action 1 resets to state 0. Every step costs 1 except at the last state,
    which self-loops under both actions at cost 0.
    """
    if n_states < 2:
        raise ValueError("a chain needs at least 2 states")
    if not 0.0 <= slip < 1.0:
        raise ValueError("slip must lie in [0, 1)")
    S = n_states
    P = np.zeros((S, 2, S))
    cost = np.ones((S, 2))
    for s in range(S - 1):
        P[s, 0, s + 1] += 1.0 - slip
        P[s, 0, s] += slip
        P[s, 1, 0] = 1.0
    P[S - 1, :, S - 1] = 1.0
    cost[S - 1] = 0.0
    mdp = Mdp(P, cost, gamma, 1.0)
    mdp.validate()
    return mdp
