"""Polymatrix games in normal form and over a shared extensive-form tree.

A :class:`PolymatrixGame` stores one payoff matrix per ordered pair of
adjacent players; a player's utility is the sum over its incident edges.

A :class:`PolyEFG` shares one extensive-form game tree between all pairwise
subgames.  For each unordered edge ``(i, j)`` with ``i < j`` it stores a
terminal-indexed vector ``u_ij(z)`` and a constant ``c_ij``; the other side is
``u_ji(z) = c_ij - u_ij(z)``, so every subgame is constant-sum by
construction.  In subgame ``(i, j)`` every other player is replaced by a
chance player that plays uniformly (original chance nodes keep their
distribution); its reach probabilities are precomputed per edge.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .games.builtin import OFFENSE_DEFENSE_ACTIONS, offense_defense_edges
from .games.efg import ExtensiveFormGame
from .games.nf import NormalFormGame

CONST_SUM_TOL = 1e-10
MAX_POLY_PURE = 1000


def all_edges(n: int) -> list[tuple[int, int]]:
    """Edges of the complete graph on ``n`` players, as sorted pairs."""
    return list(itertools.combinations(range(n), 2))


class PolymatrixGame:
    """Normal-form polymatrix game.

    ``payoffs`` maps each unordered edge ``(i, j)`` to a pair of matrices
    ``(u_ij, u_ji)`` with ``u_ij`` indexed ``[rho_i, rho_j]`` and ``u_ji``
    indexed ``[rho_j, rho_i]``.  ``constants`` (per edge) marks the game as
    pairwise constant-sum and is validated.
    """

    def __init__(self, shape, payoffs: dict, constants: dict | None = None,
                 action_names=None, name: str = "polymatrix"):
        self.shape = tuple(int(k) for k in shape)
        self.num_players = len(self.shape)
        self.name = name
        self.action_names = action_names
        self._pay = {}
        for (i, j), (mij, mji) in payoffs.items():
            if not (0 <= i < j < self.num_players):
                raise ValueError(f"edge {(i, j)} must be a sorted pair of distinct players")
            mij = np.array(mij, dtype=float)
            mji = np.array(mji, dtype=float)
            if mij.shape != (self.shape[i], self.shape[j]) or mji.shape != (self.shape[j], self.shape[i]):
                raise ValueError(f"edge {(i, j)}: matrix shapes do not match strategy counts")
            self._pay[(i, j)] = mij
            self._pay[(j, i)] = mji
        self.edges = sorted(e for e in self._pay if e[0] < e[1])
        self.constants = None
        if constants is not None:
            self.constants = {tuple(e): float(c) for e, c in constants.items()}
            for e in self.edges:
                i, j = e
                if e not in self.constants:
                    raise ValueError(f"missing constant for edge {e}")
                dev = np.abs(self._pay[(i, j)] + self._pay[(j, i)].T - self.constants[e]).max()
                if dev > CONST_SUM_TOL:
                    raise ValueError(f"edge {e} is not constant-sum (deviation {dev:.3g})")

    def __repr__(self):
        return f"PolymatrixGame({self.name!r}, shape={self.shape}, edges={self.edges})"

    @property
    def is_constant_sum(self) -> bool:
        return self.constants is not None

    def matrix(self, i: int, j: int) -> np.ndarray:
        """``u_ij`` indexed ``[rho_i, rho_j]``."""
        if (i, j) not in self._pay:
            raise KeyError(f"no edge between players {i} and {j}")
        return self._pay[(i, j)]

    def neighbors(self, i: int) -> list[int]:
        return sorted(j for (a, j) in self._pay if a == i)

    def subgame_utility(self, i: int, j: int, s_i, s_j) -> tuple[float, float]:
        si, sj = np.asarray(s_i, float), np.asarray(s_j, float)
        return float(si @ self.matrix(i, j) @ sj), float(sj @ self.matrix(j, i) @ si)

    def global_utility(self, profile) -> np.ndarray:
        u = np.zeros(self.num_players)
        for (i, j), m in self._pay.items():
            u[i] += float(np.asarray(profile[i], float) @ m @ np.asarray(profile[j], float))
        return u

    def to_normal_form(self) -> NormalFormGame:
        n = self.num_players
        u = np.zeros(self.shape + (n,))
        for (i, j), m in self._pay.items():
            mm = m if i < j else m.T  # axes in player order
            u[..., i] += _broadcast(mm, i, j, self.shape)
        return NormalFormGame(u, self.action_names, name=self.name)

    def to_json(self) -> dict:
        return {
            "kind": "polymatrix",
            "shape": list(self.shape),
            "edges": [
                {"players": [i, j], "u_ij": self._pay[(i, j)].tolist(), "u_ji": self._pay[(j, i)].tolist(),
                 **({"constant": self.constants[(i, j)]} if self.constants else {})}
                for i, j in self.edges
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PolymatrixGame":
        payoffs, consts = {}, {}
        for e in doc["edges"]:
            i, j = e["players"]
            payoffs[(i, j)] = (e["u_ij"], e["u_ji"])
            if "constant" in e:
                consts[(i, j)] = e["constant"]
        return cls(doc["shape"], payoffs, consts or None)


def _broadcast(m_sorted: np.ndarray, i: int, j: int, shape) -> np.ndarray:
    """Broadcast a matrix over axes ``(min(i,j), max(i,j))`` to the full profile shape."""
    a, b = min(i, j), max(i, j)
    view = [1] * len(shape)
    view[a], view[b] = shape[a], shape[b]
    return np.broadcast_to(m_sorted.reshape(view), shape)


def offense_defense_polymatrix(beta: float = 1.0) -> PolymatrixGame:
    """Offense-Defense as a zero-sum 3-clique polymatrix game."""
    payoffs = {e: (m, -m.T) for e, m in offense_defense_edges(beta).items()}
    return PolymatrixGame((2, 2, 2), payoffs, {e: 0.0 for e in payoffs},
                          action_names=OFFENSE_DEFENSE_ACTIONS, name="offense_defense")


# ---------------------------------------------------------------------------
# poly-EFG
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubgameChance:
    """Chance player of subgame ``(i, j)``: original chance plus uniform outsiders."""

    players: tuple[int, int]
    outsider_strategies: dict  # player -> uniform behavior strategy
    reach: np.ndarray  # p'_c(z) per terminal


def default_subgame_chance(g: ExtensiveFormGame, i: int, j: int) -> SubgameChance:
    """Original chance distribution, with every player other than ``i`` and ``j`` uniform."""
    if i == j or not (0 <= i < g.num_players and 0 <= j < g.num_players):
        raise ValueError(f"invalid player pair {(i, j)}")
    strategies = {k: g.uniform_strategy(k) for k in range(g.num_players) if k not in (i, j)}
    reach = g.chance_reach.copy()
    for k, b in strategies.items():
        reach *= g.player_reach(k, b)
    reach.setflags(write=False)
    return SubgameChance((min(i, j), max(i, j)), strategies, reach)


class PolyEFG:
    """Constant-sum polymatrix decomposition over a shared game tree.

    ``U[e]`` holds ``u_ij(z)`` for edge ``edges[e] = (i, j)`` (``i < j``) in
    the game's depth-first terminal order and ``C[e]`` holds ``c_ij``.
    """

    def __init__(self, game: ExtensiveFormGame, edges=None, U=None, C=None, name=None):
        self.game = game
        self.name = name or game.name
        n = game.num_players
        self.edges = [tuple(sorted(e)) for e in (edges if edges is not None else all_edges(n))]
        if len(set(self.edges)) != len(self.edges) or any(a == b for a, b in self.edges):
            raise ValueError("edges must be distinct pairs of distinct players")
        self._eidx = {e: k for k, e in enumerate(self.edges)}
        ne, nz = len(self.edges), game.num_terminals
        self.U = np.zeros((ne, nz)) if U is None else np.array(U, dtype=float).reshape(ne, nz)
        self.C = np.zeros(ne) if C is None else np.array(C, dtype=float).reshape(ne)
        self.chance = [default_subgame_chance(game, i, j) for i, j in self.edges]
        self.chance_reach = np.array([c.reach for c in self.chance]).reshape(ne, nz)
        self.chance_reach.setflags(write=False)

    def __repr__(self):
        return f"PolyEFG({self.name!r}, edges={self.edges})"

    @property
    def num_players(self) -> int:
        return self.game.num_players

    def copy(self) -> "PolyEFG":
        out = object.__new__(PolyEFG)
        out.__dict__.update(self.__dict__)
        out.U = self.U.copy()
        out.C = self.C.copy()
        return out

    def edge_index(self, i: int, j: int) -> int:
        e = (min(i, j), max(i, j))
        if e not in self._eidx:
            raise KeyError(f"no edge between players {i} and {j}")
        return self._eidx[e]

    def neighbors(self, i: int) -> list[int]:
        return sorted(b if a == i else a for a, b in self.edges if i in (a, b))

    def terminal_utility(self, i: int, j: int) -> np.ndarray:
        """``u_ij(z)`` for player ``i`` in subgame ``(i, j)``."""
        e = self.edge_index(i, j)
        return self.U[e] if i < j else self.C[e] - self.U[e]

    def subgame_utility(self, i: int, j: int, b_i, b_j) -> tuple[float, float]:
        """Values of players ``i`` and ``j`` in their subgame; they sum to ``c_ij``."""
        e = self.edge_index(i, j)
        g = self.game
        p = g.player_reach(i, b_i) * g.player_reach(j, b_j) * self.chance_reach[e]
        v = float(p @ self.U[e])
        mass = float(p.sum())
        other = self.C[e] * mass - v
        return (v, other) if i < j else (other, v)

    def global_utility(self, profile) -> np.ndarray:
        g = self.game
        reach = [g.player_reach(k, b) for k, b in enumerate(profile)]
        u = np.zeros(g.num_players)
        for e, (i, j) in enumerate(self.edges):
            p = reach[i] * reach[j] * self.chance_reach[e]
            v = float(p @ self.U[e])
            u[i] += v
            u[j] += self.C[e] * float(p.sum()) - v
        return u

    def subgame_best_response(self, i: int, j: int, b_j) -> tuple[float, np.ndarray]:
        """Best response of ``i`` to ``b_j`` in subgame ``(i, j)`` (ties to lowest action)."""
        g = self.game
        e = self.edge_index(i, j)
        w = g.player_reach(j, b_j) * self.chance_reach[e] * self.terminal_utility(i, j)
        _, _, value, choice = g.backup(i, w)
        return value, g.choice_to_strategy(i, choice)

    def subgame_worst_case(self, i: int, j: int, b_i) -> float:
        """``min`` over ``j``'s strategies of ``i``'s subgame value against ``b_i``."""
        # j minimizing i's value is j maximizing c_ij - u_ij, i.e. j's best response
        value_j, _ = self.subgame_best_response(j, i, b_i)
        e = self.edge_index(i, j)
        return self.C[e] - value_j

    def to_json(self) -> dict:
        return {
            "kind": "poly_efg",
            "game": self.game.name,
            "params": dict(self.game.params),
            "terminal_order": "depth-first",
            "num_terminals": self.game.num_terminals,
            "edges": [{"players": list(e), "u": self.U[k].tolist(), "constant": float(self.C[k])}
                      for k, e in enumerate(self.edges)],
        }

    @classmethod
    def from_json(cls, game: ExtensiveFormGame, doc: dict) -> "PolyEFG":
        if int(doc["num_terminals"]) != game.num_terminals:
            raise ValueError("decomposition does not match the game's terminal count")
        edges = [tuple(e["players"]) for e in doc["edges"]]
        U = [e["u"] for e in doc["edges"]]
        C = [e["constant"] for e in doc["edges"]]
        return cls(game, edges, U, C)

    def save(self, path, metadata: dict | None = None) -> None:
        doc = self.to_json()
        if metadata:
            doc["metadata"] = metadata
        Path(path).write_text(json.dumps(doc))


def subgame_utility(pg, i: int, j: int, s_i, s_j) -> tuple[float, float]:
    return pg.subgame_utility(i, j, s_i, s_j)


def global_utility_poly(pg, profile) -> np.ndarray:
    return pg.global_utility(profile)


def induced_normal_form_polymatrix(pg: PolyEFG, max_pure: int = MAX_POLY_PURE) -> PolymatrixGame:
    """Normal-form polymatrix game over each player's pure strategies."""
    g = pg.game
    counts = [g.num_pure_strategies(i) for i in range(g.num_players)]
    if max(counts) > max_pure:
        raise ValueError(f"a player has {max(counts)} pure strategies (limit {max_pure})")
    R = [g.pure_reach_matrix(i) for i in range(g.num_players)]
    payoffs, consts = {}, {}
    for e, (i, j) in enumerate(pg.edges):
        w = pg.chance_reach[e]
        mij = (R[i] * (w * pg.U[e])) @ R[j].T
        mass = (R[i] * w) @ R[j].T
        payoffs[(i, j)] = (mij, (pg.C[e] * mass - mij).T)
        consts[(i, j)] = pg.C[e]
    # pure profiles reach terminals with total probability one, so mass == 1
    return PolymatrixGame(counts, payoffs, consts, name=f"{pg.name}_induced_polymatrix")
