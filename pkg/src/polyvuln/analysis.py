"""Equilibrium quality and vulnerability measures, and the vulnerability bounds.

Vulnerability of player ``i`` at profile ``s`` against a set of opponent
strategies is ``u_i(s)`` minus the worst value ``i`` can get when the other
players independently switch to strategies from that set.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exactdecomp import deviation_matrix
from .games.efg import ExtensiveFormGame
from .games.nf import NormalFormGame, expected_utility_nf
from .polymatrix import PolyEFG, PolymatrixGame

MAX_GRID_ACTIONS = 4
MAX_GRID_PLAYERS = 3


def marginal_strategy(mu: np.ndarray, i: int) -> np.ndarray:
    """Player ``i``'s marginal of a distribution over pure profiles."""
    mu = np.asarray(mu, dtype=float)
    axes = tuple(k for k in range(mu.ndim) if k != i)
    return mu.sum(axis=axes)


def marginal_profile(mu: np.ndarray) -> list[np.ndarray]:
    return [marginal_strategy(mu, i) for i in range(np.ndim(mu))]


def cce_gap(g: NormalFormGame, mu: np.ndarray) -> float:
    """Largest gain from committing to a fixed pure strategy before play."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != g.shape:
        raise ValueError(f"distribution has shape {mu.shape}, game has {g.shape}")
    flat = mu.ravel()
    return max(float((deviation_matrix(g, i) @ flat).max()) for i in range(g.num_players))


def deviation_advantage(g: NormalFormGame, i: int, profile, action) -> float:
    """``u_i(rho'_i, s_-i) - u_i(s)`` for a pure deviation of player ``i``."""
    k = g.action_index(i, action) if isinstance(action, str) else int(action)
    dev = list(profile)
    dev[i] = np.eye(g.shape[i])[k]
    return float(expected_utility_nf(g, dev)[i] - expected_utility_nf(g, profile)[i])


def _cross_min(values_fn, sets):
    return min(values_fn(combo) for combo in itertools.product(*sets))


def vulnerability_finite(g, i: int, profile, opponent_sets) -> float:
    """``u_i(s) - min`` over independent opponent choices from finite sets.

    ``opponent_sets[j]`` lists candidate strategies of player ``j``; the
    entry for ``i`` is ignored.  Works for normal-form (mixed strategies) and
    extensive-form (behavior strategies) games.
    """
    n = g.num_players
    if len(opponent_sets) != n:
        raise ValueError("opponent_sets needs one entry per player")
    others = [j for j in range(n) if j != i]
    if any(len(opponent_sets[j]) == 0 for j in others):
        raise ValueError("opponent sets must be nonempty")
    if isinstance(g, ExtensiveFormGame):
        g.check_profile(profile)
        base = float(g.expected_utility(profile)[i])
        w = g.chance_reach * g.player_reach(i, profile[i]) * g.utilities[:, i]
        reach_sets = [np.array([g.player_reach(j, b) for b in opponent_sets[j]]) for j in others]
        vals = _contract_min(w, reach_sets)
        return base - vals
    base = float(expected_utility_nf(g, profile)[i])

    def value(combo):
        prof = list(profile)
        for j, s in zip(others, combo):
            prof[j] = s
        return float(expected_utility_nf(g, prof)[i])

    return base - _cross_min(value, [opponent_sets[j] for j in others])


def _contract_min(w: np.ndarray, reach_sets) -> float:
    """``min`` over the cross product of ``sum_z w(z) prod_k r_k(z)``."""
    if len(reach_sets) == 1:
        return float((reach_sets[0] @ w).min())
    head, rest = reach_sets[0], reach_sets[1:]
    return min(_contract_min(w * r, rest) for r in head)


def vulnerability_polymatrix(pg, i: int, profile) -> float:
    """Worst-case vulnerability of ``i`` in a constant-sum polymatrix game or poly-EFG.

    Opponents cannot correlate, and each edge contributes independently, so
    the worst case is the sum over neighbors ``j`` of ``u_ij(s_i, s_j) -
    min_{s'_j} u_ij(s_i, s'_j)``.
    """
    total = 0.0
    if isinstance(pg, PolyEFG):
        for j in pg.neighbors(i):
            cur = pg.subgame_utility(i, j, profile[i], profile[j])[0]
            total += cur - pg.subgame_worst_case(i, j, profile[i])
        return total
    if isinstance(pg, PolymatrixGame):
        if not pg.is_constant_sum:
            raise ValueError("vulnerability_polymatrix needs a constant-sum game")
        si = np.asarray(profile[i], dtype=float)
        for j in pg.neighbors(i):
            row = si @ pg.matrix(i, j)
            total += float(row @ np.asarray(profile[j], dtype=float)) - float(row.min())
        return total
    raise TypeError("expected a PolymatrixGame or PolyEFG")


def simplex_grid(k: int, resolution: float) -> np.ndarray:
    """All points of the ``k``-action simplex with coordinates on a ``resolution`` grid."""
    steps = int(round(1.0 / resolution))
    if steps < 1:
        steps = 1
    pts = [c for c in itertools.product(range(steps + 1), repeat=k) if sum(c) == steps]
    return np.array(pts, dtype=float) / steps


def vulnerability_grid_oracle(g: NormalFormGame, i: int, s_i, resolution: float = 0.05,
                              profile=None) -> float:
    """Grid-search estimate of worst-case vulnerability against independent opponents.

    Opponent mixed strategies range over a simplex grid of the given step.
    ``profile`` supplies the training profile (defaults to ``s_i`` with
    uniform opponents); the result is ``u_i(profile) - min_grid``.
    """
    n = g.num_players
    if n > MAX_GRID_PLAYERS or any(g.shape[j] > MAX_GRID_ACTIONS for j in range(n) if j != i):
        raise ValueError("grid oracle supports at most 3 players and 4 actions per opponent")
    if profile is None:
        profile = [np.full(k, 1.0 / k) for k in g.shape]
        profile[i] = np.asarray(s_i, dtype=float)
    grids = [simplex_grid(g.shape[j], resolution) for j in range(n) if j != i]
    sets = [None] * n
    k = 0
    for j in range(n):
        if j != i:
            sets[j] = list(grids[k])
            k += 1
    return vulnerability_finite(g, i, profile, sets)


def bound(edge_count: int, gamma: float, delta: float) -> float:
    """Vulnerability ceiling ``|E_i| * gamma + 2 * delta``."""
    if gamma < -1e-9 or delta < -1e-9:
        raise ValueError("gamma and delta must be nonnegative")
    return edge_count * max(gamma, 0.0) + 2.0 * max(delta, 0.0)


def loose_bound(num_players: int, gamma: float, delta: float) -> float:
    """``(n - 1) * gamma + 2 * delta``, valid for any edge set."""
    return bound(num_players - 1, gamma, delta)


@dataclass
class VulnerabilityReport:
    vulnerability: list  # per player
    opponent_model: str  # "finite-set" | "polymatrix-worst-case" | "grid-oracle"
    bound: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def max_vulnerability(self) -> float:
        return float(max(self.vulnerability))

    @property
    def ratio(self) -> float | None:
        v = self.max_vulnerability
        if self.bound is None or v <= 0:
            return None
        return self.bound / v

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["ratio"] = self.ratio
        return doc

    def csv_rows(self, run) -> list[dict]:
        return [{"run": run, "player": i, "vulnerability": float(v), "bound": self.bound,
                 "opponent_model": self.opponent_model} for i, v in enumerate(self.vulnerability)]

    def to_csv(self, run) -> str:
        buf = io.StringIO()
        rows = self.csv_rows(run)
        w = csv.DictWriter(buf, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json())
