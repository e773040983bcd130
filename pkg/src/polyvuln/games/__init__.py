"""Game representations, builtin games and evaluation helpers."""

from .builtin import (
    BUILTIN_NAMES,
    appendix_a,
    bad_card,
    build_builtin,
    coordination,
    kuhn_poker,
    leduc_poker,
    matching_pennies,
    nf_to_efg,
    offense_defense,
    offense_defense_edges,
    tiny_hanabi,
)
from .convert import (
    behavior_to_mixed,
    expected_utility_efg,
    induced_normal_form,
    reach_probabilities,
    total_variation,
)
from .efg import CHANCE, ExtensiveFormGame, GameState, PlayerTree, build_efg
from .nf import NormalFormGame, deviation_values, expected_utility_nf, nash_gap_nf

__all__ = [
    "BUILTIN_NAMES", "CHANCE", "ExtensiveFormGame", "GameState", "NormalFormGame", "PlayerTree",
    "appendix_a", "bad_card", "behavior_to_mixed", "build_builtin", "build_efg", "coordination",
    "deviation_values", "expected_utility_efg", "expected_utility_nf", "induced_normal_form",
    "kuhn_poker", "leduc_poker", "matching_pennies", "nash_gap_nf", "nf_to_efg",
    "offense_defense", "offense_defense_edges", "reach_probabilities", "tiny_hanabi",
    "total_variation",
]
