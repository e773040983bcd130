"""Random game generators shared by the test suites."""

from __future__ import annotations

import numpy as np

from polyvuln.games.efg import CHANCE, build_efg
from polyvuln.games.nf import NormalFormGame
from polyvuln.polymatrix import PolymatrixGame, all_edges


def random_csp_polymatrix(rng, shape, scale=1.0) -> PolymatrixGame:
    """Random pairwise constant-sum polymatrix game on the complete graph."""
    payoffs, consts = {}, {}
    for i, j in all_edges(len(shape)):
        m = rng.uniform(-scale, scale, size=(shape[i], shape[j]))
        c = float(rng.uniform(-scale, scale))
        payoffs[(i, j)] = (m, c - m.T)
        consts[(i, j)] = c
    return PolymatrixGame(shape, payoffs, consts)


def random_nf(rng, shape, scale=1.0) -> NormalFormGame:
    shape = tuple(shape)
    return NormalFormGame(rng.uniform(-scale, scale, size=shape + (len(shape),)))


class RandomTreeState:
    """Node of a randomly generated perfect-information tree (each node its own infoset)."""

    def __init__(self, node, hist=()):
        self.node, self.hist = node, hist

    def is_terminal(self):
        return self.node[0] == "leaf"

    def returns(self):
        return self.node[1]

    def current_player(self):
        return CHANCE if self.node[0] == "chance" else self.node[1]

    def legal_actions(self):
        return [str(k) for k in range(len(self.node[2]))]

    def chance_outcomes(self):
        return [(str(k), p) for k, p in enumerate(self.node[1])]

    def infoset_key(self):
        return "/".join(self.hist) or "root"

    def child(self, action):
        return RandomTreeState(self.node[2][int(action)], self.hist + (action,))


def random_tree(rng, n, depth, branching=2, chance_prob=0.2, integer=True):
    if depth == 0:
        u = rng.integers(-3, 4, size=n) if integer else rng.uniform(-1, 1, size=n)
        return ("leaf", [float(x) for x in u])
    kids = [random_tree(rng, n, depth - 1, branching, chance_prob, integer) for _ in range(branching)]
    if rng.random() < chance_prob:
        p = rng.dirichlet(np.ones(branching))
        return ("chance", list(p), kids)
    return ("player", int(rng.integers(n)), kids)


def random_perfect_info_game(rng, n=3, depth=3, branching=2, name="random_tree"):
    node = random_tree(rng, n, depth, branching)
    return build_efg(RandomTreeState(node), n, name)


def random_profile(rng, g):
    """Random behavior profile of an extensive-form game."""
    profile = []
    for i in range(g.num_players):
        tree = g.trees[i]
        b = np.zeros(tree.num_slots)
        for h in range(tree.num_infosets):
            sl = tree.slot_range(h)
            b[sl] = rng.dirichlet(np.ones(sl.stop - sl.start))
        profile.append(b)
    return profile
