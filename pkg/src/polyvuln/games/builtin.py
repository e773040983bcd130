"""Builtin games: small normal-form examples and extensive-form card games.

Extensive-form games are described by lightweight state classes that
implement :class:`~polyvuln.games.efg.GameState` and are compiled with
:func:`~polyvuln.games.efg.build_efg`.  Compiled games are cached per
parameter set since they are immutable.
"""

from __future__ import annotations

import functools
import itertools
import numpy as np

from .efg import CHANCE, ExtensiveFormGame, build_efg
from .nf import NormalFormGame

# ---------------------------------------------------------------------------
# normal-form games
# ---------------------------------------------------------------------------


def coordination() -> NormalFormGame:
    """Two players pick ``a`` or ``b``; matching pays both 1, otherwise 0."""
    u = np.zeros((2, 2, 2))
    u[0, 0] = (1, 1)
    u[1, 1] = (1, 1)
    return NormalFormGame(u, [["a", "b"], ["a", "b"]], name="coordination")


def matching_pennies() -> NormalFormGame:
    """Zero-sum: player 0 wins 1 on a match, player 1 wins 1 otherwise."""
    u = np.zeros((2, 2, 2))
    for r, c in itertools.product(range(2), range(2)):
        v = 1.0 if r == c else -1.0
        u[r, c] = (v, -v)
    return NormalFormGame(u, [["h", "t"], ["h", "t"]], name="matching_pennies")


def appendix_a() -> NormalFormGame:
    """Symmetric 2x2 game whose CCE marginals are not a CCE.

    ``u(a,a)=1``, ``u(a,b)=u(b,a)=-1``, ``u(b,b)=0`` for both players.  The
    half/half mixture of ``(a,a)`` and ``(b,b)`` is a CCE worth 0.5, but its
    uniform marginals are worth -0.25 and ``a`` is a profitable deviation.
    """
    u = np.zeros((2, 2, 2))
    u[0, 0] = (1, 1)
    u[0, 1] = (-1, -1)
    u[1, 0] = (-1, -1)
    u[1, 1] = (0, 0)
    return NormalFormGame(u, [["a", "b"], ["a", "b"]], name="appendix_a")


OFFENSE_DEFENSE_ACTIONS = (("r", "d"), ("a_0", "a_2"), ("a_0", "a_1"))


def offense_defense_edges(beta: float = 1.0) -> dict[tuple[int, int], np.ndarray]:
    """Row-player payoff matrices of the three zero-sum subgames.

    Player 0 relaxes (``r``) or defends (``d``); players 1 and 2 attack player
    0 (``a_0``) or each other.  Returned matrices ``M[(i, j)]`` give ``u_ij``
    indexed ``[rho_i, rho_j]``; the column player's payoff is ``-M``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    m01 = np.array([[-beta, 0.0], [0.0, 0.0]])  # relaxing while attacked costs beta
    m02 = m01.copy()
    m12 = np.zeros((2, 2))
    m12[1, 0] = beta  # 1 attacks 2 while 2 attacks 0
    m12[0, 1] = -beta  # 2 attacks 1 while 1 attacks 0
    return {(0, 1): m01, (0, 2): m02, (1, 2): m12}


def offense_defense(beta: float = 1.0) -> NormalFormGame:
    """Three-player zero-sum polymatrix game, flattened to normal form."""
    edges = offense_defense_edges(beta)
    u = np.zeros((2, 2, 2, 3))
    for rho in itertools.product(range(2), repeat=3):
        for (i, j), m in edges.items():
            v = m[rho[i], rho[j]]
            u[rho + (i,)] += v
            u[rho + (j,)] -= v
    return NormalFormGame(u, OFFENSE_DEFENSE_ACTIONS, name="offense_defense")


# ---------------------------------------------------------------------------
# extensive-form state classes
# ---------------------------------------------------------------------------


class _OneShotState:
    """Players move one after another without observing earlier moves."""

    __slots__ = ("g", "hist")

    def __init__(self, g: NormalFormGame, hist=()):
        self.g = g
        self.hist = hist

    def is_terminal(self):
        return len(self.hist) == self.g.num_players

    def returns(self):
        return self.g.utilities[tuple(self.hist)]

    def current_player(self):
        return len(self.hist)

    def legal_actions(self):
        return self.g.action_names[len(self.hist)]

    def chance_outcomes(self):
        return ()

    def infoset_key(self):
        return f"p{len(self.hist)}"

    def child(self, action):
        i = len(self.hist)
        return _OneShotState(self.g, self.hist + (self.g.action_index(i, action),))


def nf_to_efg(g: NormalFormGame) -> ExtensiveFormGame:
    """Represent a normal-form game as a one-shot extensive-form game.

    Players move in index order and every player has a single infoset, so
    behavior strategies coincide with mixed strategies.
    """
    return build_efg(_OneShotState(g), g.num_players, name=g.name)


class _BadCardState:
    """Dealer (last player) gives one of players 0..2 a bad card."""

    __slots__ = ("beta", "pruned", "chance_dealer", "hist")
    DEALER = 3

    def __init__(self, beta, pruned, chance_dealer, hist=()):
        self.beta = beta
        self.pruned = pruned
        self.chance_dealer = chance_dealer
        self.hist = hist

    def _responders(self):
        bad = int(self.hist[0])
        return [p for p in range(3) if p != bad]

    def is_terminal(self):
        h = self.hist
        return (len(h) == 2 and h[1] == "f") or len(h) == 4

    def returns(self):
        beta = self.beta
        h = self.hist
        bad = int(h[0])
        r = [0.0] * (3 if self.chance_dealer else 4)
        if h[1] == "f":
            return r
        g1, g2 = self._responders()
        calls = (h[2] == "c", h[3] == "c")
        if not any(calls):
            r[bad], r[g1], r[g2] = beta, -beta / 2, -beta / 2
        elif all(calls):
            r[bad], r[g1], r[g2] = -beta, beta / 2, beta / 2
        elif calls[0]:
            r[bad], r[g1], r[g2] = -beta, beta, 0.0
        else:
            r[bad], r[g1], r[g2] = -beta, 0.0, beta
        return r

    def current_player(self):
        h = self.hist
        if not h:
            return CHANCE if self.chance_dealer else self.DEALER
        if len(h) == 1:
            return int(h[0])
        return self._responders()[len(h) - 2]

    def legal_actions(self):
        h = self.hist
        if not h:
            return ("0", "1", "2")
        if len(h) >= 2 and self.pruned:
            return ("c",)
        return ("f", "c")

    def chance_outcomes(self):
        return (("0", 1 / 3), ("1", 1 / 3), ("2", 1 / 3))

    def infoset_key(self):
        return ",".join(self.hist) if self.hist else "root"

    def child(self, action):
        return _BadCardState(self.beta, self.pruned, self.chance_dealer, self.hist + (action,))


def bad_card(beta: float = 1.0, pruned: bool = False, dealer: str = "player") -> ExtensiveFormGame:
    """Perfect-information card game with a dealer who always gets 0.

    The dealer picks who of players 0..2 gets the bad card.  That player
    folds (everyone gets 0) or calls; then the two good-card players, in
    index order, fold or call.  Each good-card caller splits the pot of
    ``beta``; if both fold the bad-card player wins it.  ``pruned`` removes
    the dominated folds of good-card players.

    With ``dealer="player"`` the dealer is a fourth decision-making player
    (index 3) with utility 0; with ``dealer="chance"`` the deal is a uniform
    chance event and the game has three players.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if dealer not in ("player", "chance"):
        raise ValueError(f"dealer must be 'player' or 'chance', got {dealer!r}")
    chance_dealer = dealer == "chance"
    name = "bad_card_pruned" if pruned else "bad_card"
    return build_efg(_BadCardState(float(beta), pruned, chance_dealer), 3 if chance_dealer else 4,
                     name=name, params={"beta": float(beta), "dealer": dealer})


class _TinyHanabiState:
    """Chance deals A/B to player 0, who signals; players 1 and 2 guess."""

    __slots__ = ("hist",)

    def __init__(self, hist=()):
        self.hist = hist

    def is_terminal(self):
        return len(self.hist) == 4

    def returns(self):
        deal, _, a1, a2 = self.hist
        want = deal.lower()
        v = 1.0 if (a1 == want and a2 == want) else 0.0
        return (v, v, v)

    def current_player(self):
        return CHANCE if not self.hist else len(self.hist) - 1

    def legal_actions(self):
        return ("s1", "s2") if len(self.hist) == 1 else ("a", "b")

    def chance_outcomes(self):
        return (("A", 0.5), ("B", 0.5))

    def infoset_key(self):
        h = self.hist
        # player 0 sees the deal; player 1 sees the signal; player 2 sees
        # the signal and player 1's action
        if len(h) == 1:
            return f"deal={h[0]}"
        if len(h) == 2:
            return f"signal={h[1]}"
        return f"signal={h[1]},p1={h[2]}"

    def child(self, action):
        return _TinyHanabiState(self.hist + (action,))


def tiny_hanabi() -> ExtensiveFormGame:
    """Three-player cooperative signalling game (all payoffs 1 or 0)."""
    return build_efg(_TinyHanabiState(), 3, name="tiny_hanabi")


class _KuhnState:
    """n-player Kuhn poker with an (n+1)-card deck, ante 1, one bet of 1."""

    __slots__ = ("n", "cards", "hist")

    def __init__(self, n, cards=(), hist=""):
        self.n = n
        self.cards = cards
        self.hist = hist

    def _first_bet(self):
        return self.hist.find("b")

    def is_terminal(self):
        if len(self.cards) < self.n:
            return False
        fb = self._first_bet()
        if fb < 0:
            return len(self.hist) == self.n
        return len(self.hist) == fb + self.n

    def returns(self):
        n = self.n
        fb = self._first_bet()
        contrib = [1.0] * n
        if fb < 0:
            live = list(range(n))
        else:
            live = []
            for t, a in enumerate(self.hist):
                if a == "b":
                    p = t % n
                    contrib[p] += 1.0
                    live.append(p)
        pot = sum(contrib)
        winner = max(live, key=lambda p: self.cards[p])
        return [(pot if p == winner else 0.0) - contrib[p] for p in range(n)]

    def current_player(self):
        if len(self.cards) < self.n:
            return CHANCE
        return len(self.hist) % self.n

    def legal_actions(self):
        return ("p", "b")

    def chance_outcomes(self):
        rest = [c for c in range(self.n + 1) if c not in self.cards]
        return tuple((str(c), 1.0 / len(rest)) for c in rest)

    def infoset_key(self):
        p = self.current_player()
        return f"{self.cards[p]}{self.hist}"

    def child(self, action):
        if len(self.cards) < self.n:
            return _KuhnState(self.n, self.cards + (int(action),), self.hist)
        return _KuhnState(self.n, self.cards, self.hist + action)


def kuhn_poker(players: int = 2) -> ExtensiveFormGame:
    if players not in (2, 3):
        raise ValueError(f"kuhn_poker supports 2 or 3 players, got {players}")
    return build_efg(_KuhnState(players), players, name=f"kuhn_poker_{players}",
                     params={"players": players})


class _LeducState:
    """Multi-player Leduc hold'em.

    Deck of ``2 * (n + 1)`` cards (rank = card // 2), ante 1, one private card
    each, one public card after the first betting round.  Raise sizes are 2
    and 4 in the two rounds, with at most two raises per round.  Fold is only
    offered when facing a bet.  Each round starts with the lowest-indexed
    player still in the hand.  A pair with the public card beats any
    non-pair; otherwise higher rank wins, and ties split the pot.
    """

    __slots__ = ("n", "cards", "public", "round", "contrib", "folded", "to_act",
                 "needed", "raises", "hist")

    RAISE = (2.0, 4.0)
    MAX_RAISES = 2

    def __init__(self, n):
        self.n = n
        self.cards = ()
        self.public = -1
        self.round = 0
        self.contrib = (1.0,) * n
        self.folded = (False,) * n
        self.to_act = 0
        self.needed = n
        self.raises = 0
        self.hist = ("", "")

    def _copy(self):
        s = object.__new__(_LeducState)
        for f in _LeducState.__slots__:
            setattr(s, f, getattr(self, f))
        return s

    def _live(self):
        return [p for p in range(self.n) if not self.folded[p]]

    def is_terminal(self):
        if len(self.cards) < self.n or (self.round == 1 and self.public < 0):
            return False
        return len(self._live()) == 1 or self.round == 2

    def returns(self):
        live = self._live()
        if len(live) == 1:
            winners = live
        else:
            pub = self.public // 2

            def strength(p):
                r = self.cards[p] // 2
                return (1 if r == pub else 0, r)

            best = max(strength(p) for p in live)
            winners = [p for p in live if strength(p) == best]
        pot = sum(self.contrib)
        share = pot / len(winners)
        return [(share if p in winners else 0.0) - self.contrib[p] for p in range(self.n)]

    def current_player(self):
        if len(self.cards) < self.n or (self.round == 1 and self.public < 0):
            return CHANCE
        return self.to_act

    def chance_outcomes(self):
        used = set(self.cards)
        rest = [c for c in range(2 * (self.n + 1)) if c not in used]
        return tuple((str(c), 1.0 / len(rest)) for c in rest)

    def _facing(self):
        return max(self.contrib) > self.contrib[self.to_act]

    def legal_actions(self):
        acts = []
        if self._facing():
            acts.append("f")
        acts.append("c")
        if self.raises < self.MAX_RAISES:
            acts.append("r")
        return tuple(acts)

    def infoset_key(self):
        p = self.to_act
        pub = "" if self.public < 0 else str(self.public)
        return f"{p}|{self.cards[p]}|{pub}|{self.hist[0]}/{self.hist[1]}"

    def _next_live(self, p):
        for k in range(1, self.n + 1):
            q = (p + k) % self.n
            if not self.folded[q]:
                return q
        return p

    def child(self, action):
        s = self._copy()
        if len(self.cards) < self.n:
            s.cards = self.cards + (int(action),)
            return s
        if self.round == 1 and self.public < 0:
            s.public = int(action)
            return s
        p = self.to_act
        contrib = list(self.contrib)
        if action == "f":
            folded = list(self.folded)
            folded[p] = True
            s.folded = tuple(folded)
            s.needed = self.needed - 1
        elif action == "c":
            contrib[p] = max(contrib)
            s.needed = self.needed - 1
        else:
            contrib[p] = max(contrib) + self.RAISE[self.round]
            s.raises = self.raises + 1
            s.needed = sum(1 for q in range(self.n) if not s.folded[q]) - 1
        s.contrib = tuple(contrib)
        h = list(self.hist)
        h[self.round] += action
        s.hist = tuple(h)
        live = s._live()
        if len(live) == 1:
            return s
        if s.needed == 0:
            s.round = self.round + 1
            s.raises = 0
            s.needed = len(live)
            s.to_act = live[0]
        else:
            s.to_act = s._next_live(p)
        return s


def leduc_poker(players: int = 3) -> ExtensiveFormGame:
    if players < 2 or players > 3:
        raise ValueError(f"leduc_poker supports 2 or 3 players, got {players}")
    return build_efg(_LeducState(players), players, name=f"leduc_poker_{players}",
                     params={"players": players})


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_NF_BUILDERS = {
    "coordination": (coordination, ()),
    "matching_pennies": (matching_pennies, ()),
    "appendix_a": (appendix_a, ()),
    "offense_defense": (offense_defense, ("beta",)),
}

_EFG_BUILDERS = {
    "bad_card": (lambda beta=1.0, dealer="player": bad_card(beta, False, dealer), ("beta", "dealer")),
    "bad_card_pruned": (lambda beta=1.0, dealer="player": bad_card(beta, True, dealer),
                        ("beta", "dealer")),
    "tiny_hanabi": (tiny_hanabi, ()),
    "kuhn_poker": (kuhn_poker, ("players",)),
    "leduc_poker": (leduc_poker, ("players",)),
}

BUILTIN_NAMES = tuple(sorted(list(_NF_BUILDERS) + list(_EFG_BUILDERS)))


@functools.lru_cache(maxsize=32)
def _build_cached(name, form, items):
    params = dict(items)
    if name in _NF_BUILDERS:
        fn, _ = _NF_BUILDERS[name]
        g = fn(**params)
        return nf_to_efg(g) if form == "efg" else g
    fn, _ = _EFG_BUILDERS[name]
    return fn(**params)


def build_builtin(name: str, form: str | None = None, **params):
    """Construct a builtin game by name.

    Normal-form games (``coordination``, ``matching_pennies``, ``appendix_a``,
    ``offense_defense``) are returned as :class:`NormalFormGame` unless
    ``form="efg"`` asks for the one-shot extensive-form version.  The other
    names return :class:`ExtensiveFormGame`.  Accepted parameters: ``beta``
    for offense_defense and the bad_card variants, ``dealer`` (``"player"`` or
    ``"chance"``) for the bad_card variants, ``players`` for the poker games.
    """
    if name in _NF_BUILDERS:
        allowed = _NF_BUILDERS[name][1]
        if form not in (None, "nf", "efg"):
            raise ValueError(f"unknown form {form!r}; use 'nf' or 'efg'")
    elif name in _EFG_BUILDERS:
        allowed = _EFG_BUILDERS[name][1]
        if form not in (None, "efg"):
            raise ValueError(f"{name} is only available in extensive form")
    else:
        raise ValueError(f"unknown game {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"{name} does not take parameters {sorted(extra)}")
    if "players" in params:
        params["players"] = int(params["players"])
    if "beta" in params:
        params["beta"] = float(params["beta"])
    return _build_cached(name, form or "nf", tuple(sorted(params.items())))

