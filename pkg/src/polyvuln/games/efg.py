"""Compiled extensive-form games.

A game is built once from a root state (see :class:`GameState`) by a depth-first
walk and then stored as flat arrays.  Everything downstream works on the
sequence-form view of the tree:

* terminals are indexed in depth-first order, with a utility row and a chance
  reach probability each;
* every player owns a list of infosets, each with a contiguous block of
  *slots* (one slot per infoset action, i.e. one sequence);
* ``terminal_seq[z]`` is the player's last own sequence on the path to ``z``.

A behavior strategy for player ``i`` is a flat float array over that player's
slots.  Infosets are sorted by the length of the owner's action sequence, so a
single pass over levels computes realization plans (forward) or values
(backward) without recursion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

CHANCE = -1
TERMINAL = -2

PROB_TOL = 1e-12
# reach products below this are treated as exactly zero
UNDERFLOW = 1e-15


class GameState(Protocol):
    """What the tree builder needs from a game's state objects."""

    def is_terminal(self) -> bool: ...

    def returns(self) -> Sequence[float]: ...

    def current_player(self) -> int:
        """Acting player index, or ``CHANCE``."""
        ...

    def legal_actions(self) -> Sequence[str]: ...

    def chance_outcomes(self) -> Sequence[tuple[str, float]]: ...

    def infoset_key(self) -> str: ...

    def child(self, action: str) -> "GameState": ...


@dataclass(frozen=True)
class PlayerTree:
    """Sequence-form structure of one player."""

    infoset_keys: tuple[str, ...]
    infoset_actions: tuple[tuple[str, ...], ...]
    num_actions: np.ndarray
    slot_start: np.ndarray  # len num_infosets + 1
    slot_infoset: np.ndarray
    infoset_parent: np.ndarray  # parent slot, num_slots for the empty sequence
    slot_parent: np.ndarray  # parent slot of each slot's infoset
    levels: tuple[tuple[int, int], ...]  # infoset index ranges per level
    terminal_seq: np.ndarray  # per terminal, num_slots for the empty sequence

    @property
    def num_infosets(self) -> int:
        return len(self.infoset_keys)

    @property
    def num_slots(self) -> int:
        return int(self.slot_start[-1])

    def slot_range(self, infoset: int) -> slice:
        return slice(int(self.slot_start[infoset]), int(self.slot_start[infoset + 1]))

    def index(self, key: str) -> int:
        return self._index[key]

    def __post_init__(self):
        object.__setattr__(self, "_index", {k: n for n, k in enumerate(self.infoset_keys)})


class ExtensiveFormGame:
    """An immutable, compiled extensive-form game.

    Build instances with :func:`build_efg`; the constructor takes the
    already-compiled arrays.
    """

    def __init__(self, name, num_players, trees, utilities, chance_reach,
                 node_parent, node_player, node_infoset, node_label, labels,
                 terminal_node, perfect_recall, params=None):
        self.name = name
        self.num_players = num_players
        self.trees: tuple[PlayerTree, ...] = tuple(trees)
        self.utilities = utilities  # (|Z|, n)
        self.chance_reach = chance_reach  # (|Z|,)
        self.node_parent = node_parent
        self.node_player = node_player
        self.node_infoset = node_infoset  # local infoset index of the owner, -1 otherwise
        self.node_label = node_label
        self.labels = labels
        self.terminal_node = terminal_node
        self.perfect_recall = perfect_recall
        self.params = dict(params or {})
        for arr in (utilities, chance_reach, node_parent, node_player, node_infoset,
                    node_label, terminal_node):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"ExtensiveFormGame({self.name!r}, players={self.num_players}, "
                f"terminals={self.num_terminals}, nodes={self.num_nodes})")

    @property
    def num_terminals(self) -> int:
        return self.utilities.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.node_parent.shape[0]

    def history(self, node: int) -> tuple[str, ...]:
        path = []
        while self.node_parent[node] >= 0:
            path.append(self.labels[self.node_label[node]])
            node = self.node_parent[node]
        return tuple(reversed(path))

    def terminal_history(self, z: int) -> tuple[str, ...]:
        return self.history(int(self.terminal_node[z]))

    def terminal_index(self, history: Sequence[str]) -> int:
        """Index of the terminal reached by an action-label history."""
        lookup = getattr(self, "_terminal_lookup", None)
        if lookup is None:
            lookup = {self.terminal_history(z): z for z in range(self.num_terminals)}
            self._terminal_lookup = lookup
        return lookup[tuple(history)]

    def is_perfect_information(self) -> bool:
        """True when every infoset contains a single decision node."""
        owned = self.node_player >= 0
        for i in range(self.num_players):
            mask = owned & (self.node_player == i)
            counts = np.bincount(self.node_infoset[mask], minlength=self.trees[i].num_infosets)
            if np.any(counts > 1):
                return False
        return True

    # -- strategies ---------------------------------------------------------

    def uniform_strategy(self, i: int) -> np.ndarray:
        pt = self.trees[i]
        return 1.0 / np.repeat(pt.num_actions, pt.num_actions).astype(float)

    def uniform_profile(self) -> list[np.ndarray]:
        return [self.uniform_strategy(i) for i in range(self.num_players)]

    def pure_strategy(self, i: int, choices: Sequence[int]) -> np.ndarray:
        """Behavior strategy playing action ``choices[I]`` at every infoset ``I``."""
        pt = self.trees[i]
        b = np.zeros(pt.num_slots)
        b[pt.slot_start[:-1] + np.asarray(choices, dtype=int)] = 1.0
        return b

    def strategy_from_dict(self, i: int, table: dict, default_uniform: bool = False) -> np.ndarray:
        pt = self.trees[i]
        b = np.empty(pt.num_slots)
        for I, key in enumerate(pt.infoset_keys):
            sl = pt.slot_range(I)
            if key in table:
                probs = np.asarray(table[key], dtype=float)
                if probs.shape != (sl.stop - sl.start,):
                    raise ValueError(f"infoset {key!r}: expected {sl.stop - sl.start} probabilities")
                b[sl] = probs
            elif default_uniform:
                b[sl] = 1.0 / (sl.stop - sl.start)
            else:
                raise KeyError(f"missing distribution for infoset {key!r}")
        return b

    def strategy_to_dict(self, i: int, b: np.ndarray) -> dict[str, list[float]]:
        pt = self.trees[i]
        return {key: [float(v) for v in b[pt.slot_range(I)]] for I, key in enumerate(pt.infoset_keys)}

    def check_strategy(self, i: int, b: np.ndarray, tol: float = 1e-9) -> None:
        pt = self.trees[i]
        b = np.asarray(b)
        if b.shape != (pt.num_slots,):
            raise ValueError(f"player {i}: strategy has shape {b.shape}, expected ({pt.num_slots},)")
        if pt.num_slots == 0:
            return
        if np.any(b < -tol) or not np.all(np.isfinite(b)):
            raise ValueError(f"player {i}: negative or non-finite probabilities")
        sums = np.add.reduceat(b, pt.slot_start[:-1])
        if np.any(np.abs(sums - 1.0) > tol):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"player {i}: infoset {pt.infoset_keys[bad]!r} sums to {sums[bad]}")

    def check_profile(self, profile, skip: int | None = None) -> None:
        if len(profile) != self.num_players:
            raise ValueError(f"profile covers {len(profile)} players, game has {self.num_players}")
        for i, b in enumerate(profile):
            if i == skip:
                continue
            if b is None:
                raise ValueError(f"profile is missing player {i}")
            self.check_strategy(i, b)

    # -- sequence form ------------------------------------------------------

    def realization_plan(self, i: int, b: np.ndarray) -> np.ndarray:
        """Probability player ``i`` plays to each of its sequences.

        The returned array has one extra trailing entry, the empty sequence,
        fixed at 1.
        """
        pt = self.trees[i]
        ns = pt.num_slots
        x = np.empty(ns + 1)
        x[ns] = 1.0
        for lo, hi in pt.levels:
            s0, s1 = pt.slot_start[lo], pt.slot_start[hi]
            x[s0:s1] = x[pt.slot_parent[s0:s1]] * b[s0:s1]
        x[x < UNDERFLOW] = 0.0
        return x

    def player_reach(self, i: int, b: np.ndarray) -> np.ndarray:
        """``p_i(z, b)`` for every terminal."""
        return self.realization_plan(i, b)[self.trees[i].terminal_seq]

    def backup(self, i: int, weights: np.ndarray, b: np.ndarray | None = None):
        """Backward pass over player ``i``'s sequences.

        ``weights[z]`` is everything but player ``i``'s own reach at terminal
        ``z`` (opponents, chance, utility).  With a strategy ``b`` this
        computes expected counterfactual values; with ``b=None`` it computes
        best-response values.

        Returns ``(seq_values, infoset_values, root_value, choice)`` where
        ``choice`` is the best-response action per infoset (lowest index among
        ties) or ``None`` for the expectation pass.
        """
        pt = self.trees[i]
        ns = pt.num_slots
        acc = np.bincount(pt.terminal_seq, weights=weights, minlength=ns + 1)
        ivals = np.zeros(pt.num_infosets)
        choice = np.zeros(pt.num_infosets, dtype=int) if b is None else None
        for lo, hi in reversed(pt.levels):
            s0, s1 = int(pt.slot_start[lo]), int(pt.slot_start[hi])
            starts = pt.slot_start[lo:hi] - s0
            v = acc[s0:s1]
            if b is None:
                iv = np.maximum.reduceat(v, starts)
                nact = pt.num_actions[lo:hi]
                local = np.arange(s1 - s0) - np.repeat(starts, nact)
                big = np.iinfo(np.int64).max
                masked = np.where(v == np.repeat(iv, nact), local, big)
                choice[lo:hi] = np.minimum.reduceat(masked, starts)
            else:
                iv = np.add.reduceat(v * b[s0:s1], starts)
            ivals[lo:hi] = iv
            acc += np.bincount(pt.infoset_parent[lo:hi], weights=iv, minlength=ns + 1)
        return acc[:ns], ivals, float(acc[ns]), choice

    def choice_to_strategy(self, i: int, choice: np.ndarray) -> np.ndarray:
        return self.pure_strategy(i, choice)

    # -- profile-level evaluation ---------------------------------------------

    def reach(self, profile) -> tuple[np.ndarray, list[np.ndarray]]:
        """Terminal reach probabilities and the per-player factors."""
        factors = [self.player_reach(i, b) for i, b in enumerate(profile)]
        p = self.chance_reach.copy()
        for f in factors:
            p *= f
        return p, factors

    def expected_utility(self, profile) -> np.ndarray:
        p, _ = self.reach(profile)
        return p @ self.utilities

    def opponent_reach(self, factors, i: int) -> np.ndarray:
        p = self.chance_reach.copy()
        for j, f in enumerate(factors):
            if j != i:
                p *= f
        return p

    # -- pure strategies --------------------------------------------------

    def num_pure_strategies(self, i: int) -> int:
        return int(np.prod(self.trees[i].num_actions.astype(object))) if self.trees[i].num_infosets else 1

    def pure_strategies(self, i: int):
        """Iterate player ``i``'s pure strategies as tuples of action indices.

        Order is lexicographic with the first infoset most significant.
        """
        return itertools.product(*(range(int(k)) for k in self.trees[i].num_actions))

    def pure_reach_matrix(self, i: int) -> np.ndarray:
        """Rows ``p_i(z, rho_i)`` for every pure strategy, in enumeration order."""
        rows = [self.player_reach(i, self.pure_strategy(i, c)) for c in self.pure_strategies(i)]
        return np.array(rows).reshape(-1, self.num_terminals)


class _Build:
    """Mutable bookkeeping used while walking the tree."""

    def __init__(self, n):
        self.n = n
        self.keys = [dict() for _ in range(n)]  # key -> provisional id
        self.actions = [[] for _ in range(n)]
        self.parent = [[] for _ in range(n)]  # provisional (infoset, action) or None
        self.recall_ok = True


def build_efg(root: GameState, num_players: int, name: str, params=None,
              max_nodes: int = 20_000_000) -> ExtensiveFormGame:
    """Walk a game from ``root`` and compile it.

    Raises ``ValueError`` on malformed chance distributions or infosets whose
    nodes disagree on their action sets.  Perfect recall is checked and
    recorded on the result rather than enforced.
    """
    n = num_players
    bk = _Build(n)
    node_parent, node_player, node_infoset, node_label = [], [], [], []
    labels: dict[str, int] = {}
    term_nodes, term_utils, term_chance, term_seq = [], [], [], []

    def label_id(a):
        k = labels.get(a)
        if k is None:
            k = labels[a] = len(labels)
        return k

    # iterative DFS; frame = (state, parent node, label id, chance prob, last seq per player)
    stack = [(root, -1, -1, 1.0, (None,) * n)]
    while stack:
        state, parent, lab, cprob, last = stack.pop()
        node = len(node_parent)
        if node >= max_nodes:
            raise ValueError(f"game tree exceeds {max_nodes} nodes")
        node_parent.append(parent)
        node_label.append(lab)
        if state.is_terminal():
            r = list(state.returns())
            if len(r) != n:
                raise ValueError(f"terminal returns have length {len(r)}, expected {n}")
            node_player.append(TERMINAL)
            node_infoset.append(-1)
            term_nodes.append(node)
            term_utils.append(r)
            term_chance.append(cprob)
            term_seq.append(last)
            continue
        player = state.current_player()
        children = []
        if player == CHANCE:
            outcomes = list(state.chance_outcomes())
            total = sum(p for _, p in outcomes)
            if abs(total - 1.0) > PROB_TOL or any(p < 0 for _, p in outcomes):
                raise ValueError(f"chance probabilities at {state!r} sum to {total}")
            node_player.append(CHANCE)
            node_infoset.append(-1)
            for a, p in outcomes:
                children.append((state.child(a), label_id(a), cprob * p, last))
        else:
            if not 0 <= player < n:
                raise ValueError(f"invalid acting player {player}")
            acts = tuple(state.legal_actions())
            if not acts:
                raise ValueError("decision node without actions")
            key = state.infoset_key()
            ids = bk.keys[player]
            I = ids.get(key)
            if I is None:
                I = ids[key] = len(ids)
                bk.actions[player].append(acts)
                bk.parent[player].append(last[player])
            else:
                if bk.actions[player][I] != acts:
                    raise ValueError(f"infoset {key!r} has inconsistent action sets")
                if bk.parent[player][I] != last[player]:
                    bk.recall_ok = False
            node_player.append(player)
            node_infoset.append(I)
            for k, a in enumerate(acts):
                new_last = last[:player] + ((I, k),) + last[player + 1:]
                children.append((state.child(a), label_id(a), cprob, new_last))
        for child, lab_c, cp, lst in reversed(children):
            stack.append((child, node, lab_c, cp, lst))

    # compile players: sort infosets by own-sequence depth
    trees, remaps = [], []
    for i in range(n):
        m = len(bk.actions[i])
        depth = [0] * m
        for I in range(m):  # parents always have smaller provisional ids
            par = bk.parent[i][I]
            depth[I] = 0 if par is None else depth[par[0]] + 1
        order = sorted(range(m), key=lambda I: (depth[I], I))
        new_id = {old: new for new, old in enumerate(order)}
        acts = [bk.actions[i][old] for old in order]
        num_actions = np.array([len(a) for a in acts], dtype=np.int64)
        slot_start = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(num_actions, out=slot_start[1:])
        ns = int(slot_start[-1])

        def slot_of(par):
            return ns if par is None else int(slot_start[new_id[par[0]]] + par[1])

        infoset_parent = np.array([slot_of(bk.parent[i][old]) for old in order], dtype=np.int64)
        slot_infoset = np.repeat(np.arange(m), num_actions)
        levels = []
        d_sorted = [depth[old] for old in order]
        lo = 0
        for I in range(1, m + 1):
            if I == m or d_sorted[I] != d_sorted[lo]:
                levels.append((lo, I))
                lo = I
        tseq = np.array([slot_of(s[i]) for s in term_seq], dtype=np.int64)
        key_list = [None] * m
        for key, old in bk.keys[i].items():
            key_list[new_id[old]] = key
        trees.append(PlayerTree(
            infoset_keys=tuple(key_list),
            infoset_actions=tuple(acts),
            num_actions=num_actions,
            slot_start=slot_start,
            slot_infoset=slot_infoset,
            infoset_parent=infoset_parent,
            slot_parent=infoset_parent[slot_infoset],
            levels=tuple(levels),
            terminal_seq=tseq,
        ))
        remaps.append(new_id)

    node_player_arr = np.array(node_player, dtype=np.int64)
    node_infoset_arr = np.array(node_infoset, dtype=np.int64)
    for i in range(n):
        mask = node_player_arr == i
        if mask.any():
            remap = np.array([remaps[i][old] for old in range(len(remaps[i]))], dtype=np.int64)
            node_infoset_arr[mask] = remap[node_infoset_arr[mask]]

    label_list = [None] * len(labels)
    for a, k in labels.items():
        label_list[k] = a
    return ExtensiveFormGame(
        name=name,
        num_players=n,
        trees=trees,
        utilities=np.array(term_utils, dtype=float).reshape(-1, n),
        chance_reach=np.array(term_chance, dtype=float),
        node_parent=np.array(node_parent, dtype=np.int64),
        node_player=node_player_arr,
        node_infoset=node_infoset_arr,
        node_label=np.array(node_label, dtype=np.int64),
        labels=tuple(label_list),
        terminal_node=np.array(term_nodes, dtype=np.int64),
        perfect_recall=bk.recall_ok,
        params=params,
    )
