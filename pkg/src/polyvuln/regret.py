"""Self-play regret minimization (CFR, CFR+), best responses and Nash gaps.

Both algorithms update all players simultaneously from the same current
profile.  CFR accumulates signed regrets and averages strategies uniformly
over iterations; CFR+ clips cumulative regrets at zero after every update
and weights iteration ``t`` by ``t`` in the average.  The average strategy at
an infoset is weighted by the player's own probability of reaching it;
infosets that are never reached get the uniform distribution.

The other common CFR+ variant alternates updates (player 0 updates, then
player 1 against the new strategy, ...) and may delay averaging; it is not
implemented here.  Simultaneous updates keep a run bit-exactly reproducible
from its seed regardless of player order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .games.efg import ExtensiveFormGame
from .games.nf import NormalFormGame, nash_gap_nf

CFR = "cfr"
CFR_PLUS = "cfr+"
ALGORITHMS = (CFR, CFR_PLUS)
INIT_REGRET_HIGH = 1e-3


def make_rng(seed: int) -> np.random.Generator:
    """The generator used for all seeded randomness: PCG64 from numpy."""
    return np.random.Generator(np.random.PCG64(seed))


def regret_match(regrets) -> np.ndarray:
    """Distribution proportional to positive regrets, uniform if none are positive."""
    r = np.maximum(np.asarray(regrets, dtype=float), 0.0)
    total = r.sum()
    if total > 0:
        return r / total
    return np.full(r.size, 1.0 / r.size)


def _regret_match_slots(g: ExtensiveFormGame, i: int, regrets: np.ndarray) -> np.ndarray:
    """Vectorized :func:`regret_match` over every infoset of player ``i``."""
    pt = g.trees[i]
    if pt.num_slots == 0:
        return np.zeros(0)
    pos = np.maximum(regrets, 0.0)
    sums = np.add.reduceat(pos, pt.slot_start[:-1])[pt.slot_infoset]
    uniform = 1.0 / pt.num_actions[pt.slot_infoset]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(sums > 0, pos / np.where(sums > 0, sums, 1.0), uniform)


def normalize_average(g: ExtensiveFormGame, i: int, weights: np.ndarray) -> np.ndarray:
    """Turn cumulative strategy weights into a behavior strategy."""
    return _regret_match_slots(g, i, weights)


def best_response(g: ExtensiveFormGame, i: int, profile) -> tuple[float, np.ndarray]:
    """Best-response value and pure best response of player ``i``.

    ``profile[i]`` is ignored (it may be ``None``).  At each infoset the
    action with the highest counterfactual value is chosen; ties go to the
    lowest action index.
    """
    g.check_profile(profile, skip=i)
    p = g.chance_reach.copy()
    for j, b in enumerate(profile):
        if j != i:
            p *= g.player_reach(j, b)
    _, _, value, choice = g.backup(i, p * g.utilities[:, i])
    return value, g.choice_to_strategy(i, choice)


def nash_gap(g, profile) -> float:
    """Largest gain any player gets by unilaterally best-responding."""
    if isinstance(g, NormalFormGame):
        return nash_gap_nf(g, profile)
    g.check_profile(profile)
    u = g.expected_utility(profile)
    return max(best_response(g, i, profile)[0] - float(u[i]) for i in range(g.num_players))


@dataclass
class SelfPlayRun:
    game: str
    algorithm: str
    seed: int
    iterations: int
    profile: list
    nash_gap: float
    checkpoints: list = field(default_factory=list)  # (iteration, nash gap)
    params: dict = field(default_factory=dict)

    def to_json(self, g: ExtensiveFormGame) -> dict:
        return {
            "game": self.game,
            "params": self.params,
            "algorithm": self.algorithm,
            "seed": int(self.seed),
            "iterations": int(self.iterations),
            "nash_gap": float(self.nash_gap),
            "checkpoints": [[int(t), float(e)] for t, e in self.checkpoints],
            "profile": profile_to_json(g, self.profile),
        }

    @classmethod
    def from_json(cls, g: ExtensiveFormGame, doc: dict) -> "SelfPlayRun":
        return cls(
            game=doc["game"], algorithm=doc["algorithm"], seed=int(doc["seed"]),
            iterations=int(doc["iterations"]), profile=profile_from_json(g, doc["profile"]),
            nash_gap=float(doc["nash_gap"]),
            checkpoints=[tuple(c) for c in doc.get("checkpoints", [])],
            params=doc.get("params", {}),
        )


def profile_to_json(g: ExtensiveFormGame, profile) -> list[dict]:
    """One ``{infoset key: action probabilities}`` mapping per player."""
    return [g.strategy_to_dict(i, b) for i, b in enumerate(profile)]


def profile_from_json(g: ExtensiveFormGame, doc) -> list[np.ndarray]:
    if len(doc) != g.num_players:
        raise ValueError(f"profile has {len(doc)} players, game has {g.num_players}")
    profile = [g.strategy_from_dict(i, table) for i, table in enumerate(doc)]
    g.check_profile(profile)
    return profile


def save_run(path, g: ExtensiveFormGame, run: SelfPlayRun) -> None:
    Path(path).write_text(json.dumps(run.to_json(g)))


def load_run(path, g: ExtensiveFormGame) -> SelfPlayRun:
    return SelfPlayRun.from_json(g, json.loads(Path(path).read_text()))


def train(g: ExtensiveFormGame, algorithm: str = CFR_PLUS, iterations: int = 1000,
          seed: int = 0, checkpoints: bool = False) -> SelfPlayRun:
    """Run CFR or CFR+ in self-play and return the average profile.

    Initial cumulative regrets are drawn uniformly from ``[0, 0.001]`` per
    action with a PCG64 generator seeded by ``seed``.  With ``checkpoints``
    the Nash gap of the running average is recorded every
    ``max(1, iterations // 100)`` iterations.
    """
    algorithm = algorithm.lower()
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; use 'cfr' or 'cfr+'")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if not g.perfect_recall:
        raise ValueError("self-play training requires a perfect-recall game")
    n = g.num_players
    rng = make_rng(seed)
    regrets = [rng.uniform(0.0, INIT_REGRET_HIGH, g.trees[i].num_slots) for i in range(n)]
    avg = [np.zeros(g.trees[i].num_slots) for i in range(n)]
    utils = [np.ascontiguousarray(g.utilities[:, i]) for i in range(n)]
    cadence = max(1, iterations // 100)
    curve = []

    for t in range(1, iterations + 1):
        strat = [_regret_match_slots(g, i, regrets[i]) for i in range(n)]
        plans = [g.realization_plan(i, strat[i]) for i in range(n)]
        reach = [plans[i][g.trees[i].terminal_seq] for i in range(n)]
        weight = float(t) if algorithm == CFR_PLUS else 1.0
        for i in range(n):
            pt = g.trees[i]
            w = g.chance_reach * utils[i]
            for j in range(n):
                if j != i:
                    w = w * reach[j]
            seq_vals, ivals, _, _ = g.backup(i, w, strat[i])
            regrets[i] += seq_vals - ivals[pt.slot_infoset]
            if algorithm == CFR_PLUS:
                np.maximum(regrets[i], 0.0, out=regrets[i])
            avg[i] += weight * plans[i][: pt.num_slots]
        if checkpoints and (t % cadence == 0 or t == iterations):
            curve.append((t, nash_gap(g, [normalize_average(g, i, avg[i]) for i in range(n)])))

    profile = [normalize_average(g, i, avg[i]) for i in range(n)]
    gap = curve[-1][1] if curve and curve[-1][0] == iterations else nash_gap(g, profile)
    return SelfPlayRun(game=g.name, algorithm=algorithm, seed=seed, iterations=iterations,
                       profile=profile, nash_gap=gap, checkpoints=curve, params=dict(g.params))
