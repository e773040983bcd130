"""Evaluation and conversions between extensive and normal form."""

from __future__ import annotations

import numpy as np

from .efg import ExtensiveFormGame
from .nf import NormalFormGame

MAX_ENUM_INFOSETS = 20
MAX_INDUCED_PROFILES = 1_000_000


def expected_utility_efg(g: ExtensiveFormGame, profile) -> np.ndarray:
    """Per-player expected utility ``sum_z p(z) u(z)`` of a behavior profile."""
    g.check_profile(profile)
    return g.expected_utility(profile)


def reach_probabilities(g: ExtensiveFormGame, profile) -> tuple[np.ndarray, list[np.ndarray]]:
    """Terminal reach probabilities ``p(z)`` and per-player factors ``p_i(z)``.

    ``p(z)`` is the product of the chance reach and all player factors.
    """
    g.check_profile(profile)
    return g.reach(profile)


def total_variation(g: ExtensiveFormGame, profile_a, profile_b) -> float:
    """Total variation distance between the terminal distributions."""
    pa, _ = reach_probabilities(g, profile_a)
    pb, _ = reach_probabilities(g, profile_b)
    return 0.5 * float(np.abs(pa - pb).sum())


def behavior_to_mixed(g: ExtensiveFormGame, i: int, b: np.ndarray) -> np.ndarray:
    """Realization-equivalent mixed strategy of a behavior strategy.

    Returns weights over ``g.pure_strategies(i)`` in enumeration order: the
    weight of a pure strategy is the product of the behavior probabilities of
    its choices, which reproduces ``p_i(z)`` exactly under perfect recall.
    """
    pt = g.trees[i]
    if not g.perfect_recall:
        raise ValueError("behavior_to_mixed requires perfect recall")
    if pt.num_infosets > MAX_ENUM_INFOSETS:
        raise ValueError(f"player {i} has {pt.num_infosets} infosets; "
                         f"enumeration is limited to {MAX_ENUM_INFOSETS}")
    g.check_strategy(i, b)
    w = np.ones(1)
    # first infoset is the most significant digit of the enumeration order
    for I in range(pt.num_infosets):
        w = np.outer(w, b[pt.slot_range(I)]).ravel()
    return w


def induced_normal_form(g: ExtensiveFormGame, max_profiles: int = MAX_INDUCED_PROFILES) -> NormalFormGame:
    """Normal form over pure strategies, with chance marginalized out."""
    counts = [g.num_pure_strategies(i) for i in range(g.num_players)]
    total = int(np.prod(np.array(counts, dtype=object)))
    if total > max_profiles:
        raise ValueError(f"induced normal form has {total} profiles (limit {max_profiles})")
    m = g.chance_reach[:, None] * g.utilities  # (Z, n)
    for i in reversed(range(g.num_players)):
        r = g.pure_reach_matrix(i)  # (P_i, Z)
        m = r.reshape((r.shape[0],) + (1,) * (m.ndim - 2) + (r.shape[1], 1)) * m[None]
    u = m.sum(axis=-2)
    names = [[_pure_name(g, i, c) for c in g.pure_strategies(i)] for i in range(g.num_players)]
    return NormalFormGame(u, names, name=f"{g.name}_induced")


def _pure_name(g: ExtensiveFormGame, i: int, choice) -> str:
    pt = g.trees[i]
    return ";".join(f"{pt.infoset_keys[I]}:{pt.infoset_actions[I][a]}" for I, a in enumerate(choice))
