"""Stochastic subgradient fitting of a constant-sum poly-EFG near given profiles.

Given a neighborhood -- a list of self-play profiles ``Pi'`` whose per-player
strategies ``Pi'_i`` span the cross product ``Pi^x`` -- the optimizer fits
per-edge terminal utilities ``u_ij(z)`` and constants ``c_ij`` by minimizing

    L = (lam / |batch|) * sum_{pi in batch} L_delta(pi)
        + ((1 - lam) / |Pi'|) * sum_{pi in Pi'} sum_{pi* in Pi*} L_gamma(pi, pi*)

where ``L_delta`` is the total absolute error between the game's and the
decomposition's utilities, ``L_gamma`` sums positive subgame advantages of
the deviations in ``pi*`` and ``Pi*`` is the cross product of per-player
subgame best responses, refreshed every epoch.  Each step moves along the
normalized subgradient.  After training, ``delta`` is the largest
utility error over ``Pi^x`` and ``gamma`` the largest subgame best-response
advantage over ``Pi'`` under fresh best responses.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .games.efg import ExtensiveFormGame
from .polymatrix import PolyEFG
from .regret import make_rng

GRAD_NORM_EPS = 1e-12


@dataclass
class SGConfig:
    lam: float = 0.5
    batch_size: int = 30
    epochs: int = 200
    lr_start: float = 2.0 ** -6
    lr_floor: float = 2.0 ** -17
    lr_halve_every: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.batch_size < 1 or self.epochs < 1 or self.lr_halve_every < 1:
            raise ValueError("batch_size, epochs and lr_halve_every must be at least 1")
        if not (self.lr_start > 0 and self.lr_floor > 0):
            raise ValueError("learning rates must be positive")

    def to_json(self) -> dict:
        return asdict(self)


def lr_schedule(epoch: int, start: float = 2.0 ** -6, floor: float = 2.0 ** -17,
                halve_every: int = 5) -> float:
    """Step size for a 1-based epoch: halves every ``halve_every`` epochs down to ``floor``."""
    if epoch < 1:
        raise ValueError("epochs are numbered from 1")
    return max(start * 2.0 ** -((epoch - 1) // halve_every), floor)


@dataclass
class Neighborhood:
    """Self-play profiles whose per-player strategies span the cross product."""

    profiles: list  # list of behavior profiles

    def __post_init__(self):
        if not self.profiles:
            raise ValueError("the neighborhood needs at least one profile")
        n = len(self.profiles[0])
        if any(len(p) != n for p in self.profiles):
            raise ValueError("all profiles must cover the same players")

    @property
    def num_players(self) -> int:
        return len(self.profiles[0])

    def strategy_set(self, i: int) -> list:
        return [p[i] for p in self.profiles]

    @property
    def cross_size(self) -> int:
        return len(self.profiles) ** self.num_players

    def cross_product(self):
        """Iterate the profiles of ``Pi^x`` in lexicographic index order."""
        sets = [self.strategy_set(i) for i in range(self.num_players)]
        for combo in itertools.product(*sets):
            yield list(combo)


@dataclass
class SGResult:
    decomposition: PolyEFG
    delta: float
    gamma: float
    config: SGConfig
    history: list = field(default_factory=list)  # per-epoch mean batch loss


# ---------------------------------------------------------------------------
# reference (direct) evaluation of the losses and subgradient
# ---------------------------------------------------------------------------


def _edge_coef(pg: PolyEFG, i: int, j: int, b_i, b_j):
    """Edge index and the gradient of ``u_ij(b_i, b_j)`` w.r.t. ``U[e]`` and ``C[e]``."""
    g = pg.game
    e = pg.edge_index(i, j)
    w = g.player_reach(i, b_i) * g.player_reach(j, b_j) * pg.chance_reach[e]
    if i < j:
        return e, w, 0.0
    return e, -w, float(w.sum())


def loss_delta(pg: PolyEFG, profile) -> float:
    """``sum_i |u_i(pi) - u^_i(pi)|`` between game and decomposition utilities."""
    return float(np.abs(pg.global_utility(profile) - pg.game.expected_utility(profile)).sum())


def loss_gamma(pg: PolyEFG, profile, deviation) -> float:
    """Sum over edges of the positive subgame advantages of ``deviation`` against ``profile``."""
    total = 0.0
    for i, j in pg.edges:
        for a, b in ((i, j), (j, i)):
            dev = pg.subgame_utility(a, b, deviation[a], profile[b])[0]
            cur = pg.subgame_utility(a, b, profile[a], profile[b])[0]
            total += max(dev - cur, 0.0)
    return total


def batch_loss(pg: PolyEFG, batch, profiles, deviations, lam: float) -> float:
    """Weighted batch loss; ``deviations`` is the explicit list of ``Pi*`` profiles."""
    ld = sum(loss_delta(pg, p) for p in batch) / len(batch)
    lg = sum(loss_gamma(pg, p, d) for p in profiles for d in deviations) / len(profiles)
    return lam * ld + (1.0 - lam) * lg


def subgradient(pg: PolyEFG, batch, profiles, deviations, lam: float):
    """Exact subgradient of :func:`batch_loss` as ``(dU, dC)``.

    Conventions at kinks: ``sign(0) = 0`` and an inactive ``max(x, 0)`` at
    ``x = 0`` contributes nothing.
    """
    g = pg.game
    gU = np.zeros_like(pg.U)
    gC = np.zeros_like(pg.C)
    scale = lam / len(batch)
    for p in batch:
        err = pg.global_utility(p) - g.expected_utility(p)
        for i in range(g.num_players):
            s = np.sign(err[i])
            if s == 0:
                continue
            for j in pg.neighbors(i):
                e, cu, cc = _edge_coef(pg, i, j, p[i], p[j])
                gU[e] += scale * s * cu
                gC[e] += scale * s * cc
    scale = (1.0 - lam) / len(profiles)
    for p in profiles:
        for d in deviations:
            for i, j in pg.edges:
                for a, b in ((i, j), (j, i)):
                    dev = pg.subgame_utility(a, b, d[a], p[b])[0]
                    cur = pg.subgame_utility(a, b, p[a], p[b])[0]
                    if dev - cur > 0:
                        e, cu1, cc1 = _edge_coef(pg, a, b, d[a], p[b])
                        _, cu0, cc0 = _edge_coef(pg, a, b, p[a], p[b])
                        gU[e] += scale * (cu1 - cu0)
                        gC[e] += scale * (cc1 - cc0)
    return gU, gC


def get_brs(pg: PolyEFG, strategy_sets) -> list[list[np.ndarray]]:
    """Per-player sets of subgame best responses.

    For every ordered pair ``(i, j)`` of adjacent players and every strategy
    of ``j`` in ``strategy_sets[j]``, add ``i``'s best response in subgame
    ``(i, j)`` (ties to the lowest action).  Exact duplicates are collapsed.
    The deviation set ``Pi*`` is the cross product of the returned lists.
    """
    n = pg.num_players
    out = [[] for _ in range(n)]
    seen = [set() for _ in range(n)]
    for i in range(n):
        for j in pg.neighbors(i):
            for b_j in strategy_sets[j]:
                _, br = pg.subgame_best_response(i, j, b_j)
                key = br.tobytes()
                if key not in seen[i]:
                    seen[i].add(key)
                    out[i].append(br)
    return out


# ---------------------------------------------------------------------------
# vectorized optimizer
# ---------------------------------------------------------------------------


def cross_utilities(g: ExtensiveFormGame, reach_sets) -> np.ndarray:
    """Game utilities of every profile in the cross product of strategy sets.

    ``reach_sets[i]`` is an ``(m_i, Z)`` matrix of player reach vectors;
    returns an array of shape ``(m_0, ..., m_{n-1}, n)``.
    """
    w = g.chance_reach[:, None] * g.utilities  # (Z, n)

    def rec(k, acc):
        if k == len(reach_sets) - 1:
            return reach_sets[k] @ (acc[:, None] * w) if acc is not None else reach_sets[k] @ w
        rows = []
        for r in reach_sets[k]:
            rows.append(rec(k + 1, r if acc is None else acc * r))
        return np.array(rows)

    return rec(0, None)


class _Fitter:
    """Holds reach matrices and evaluates batch losses and subgradients."""

    def __init__(self, pg: PolyEFG, nb: Neighborhood):
        self.pg = pg
        g = pg.game
        self.n = g.num_players
        self.K = len(nb.profiles)
        self.base = [np.array([g.player_reach(i, p[i]) for p in nb.profiles]) for i in range(self.n)]
        self.true = cross_utilities(g, self.base)  # (K,)*n + (n,)
        self.set_deviations([[] for _ in range(self.n)])

    def set_deviations(self, brs):
        g = self.pg.game
        self.q = [len(b) for b in brs]
        self.S = []
        for i in range(self.n):
            extra = [g.player_reach(i, b) for b in brs[i]]
            self.S.append(np.vstack([self.base[i]] + ([np.array(extra)] if extra else [])))
        self.mass = [(self.S[a] * self.pg.chance_reach[e]) @ self.S[b].T
                     for e, (a, b) in enumerate(self.pg.edges)]

    def edge_values(self):
        pg = self.pg
        return [(self.S[a] * (pg.chance_reach[e] * pg.U[e])) @ self.S[b].T
                for e, (a, b) in enumerate(pg.edges)]

    def _value(self, V, e, i, x, y):
        """Player ``i``'s value on edge ``e`` for index arrays ``x`` (of ``a``) and ``y`` (of ``b``)."""
        a, _ = self.pg.edges[e]
        v = V[e][x, y]
        return v if i == a else self.pg.C[e] * self.mass[e][x, y] - v

    def predicted(self, V, idx):
        """Decomposition utilities for profiles given as index arrays ``idx[i]``."""
        hat = np.zeros((self.n, idx[0].size))
        for e, (a, b) in enumerate(self.pg.edges):
            va = V[e][idx[a], idx[b]]
            hat[a] += va
            hat[b] += self.pg.C[e] * self.mass[e][idx[a], idx[b]] - va
        return hat

    def loss_and_grad(self, batch_idx, lam, want_grad=True):
        pg = self.pg
        V = self.edge_values()
        ne = len(pg.edges)
        Kmat = [np.zeros_like(V[e]) for e in range(ne)]
        gC = np.zeros(ne)
        # delta term
        nb = batch_idx[0].size
        hat = self.predicted(V, batch_idx)
        true = self.true[tuple(batch_idx)].T  # (n, batch)
        err = hat - true
        loss = lam / nb * float(np.abs(err).sum())
        s = np.sign(err) * (lam / nb)
        for e, (a, b) in enumerate(pg.edges):
            np.add.at(Kmat[e], (batch_idx[a], batch_idx[b]), s[a] - s[b])
            gC[e] += float(s[b] @ self.mass[e][batch_idx[a], batch_idx[b]])
        # gamma term
        if lam < 1.0 and any(self.q):
            diag = np.arange(self.K)
            for e, (a, b) in enumerate(pg.edges):
                for i, j in ((a, b), (b, a)):
                    if self.q[i] == 0:
                        continue
                    w = (1.0 - lam) / self.K * float(np.prod([self.q[k] for k in range(self.n) if k != i]))
                    if w == 0.0:
                        continue
                    devs = self.K + np.arange(self.q[i])
                    X, P = np.meshgrid(devs, diag, indexing="ij")  # (q_i, K)
                    if i == a:
                        dev_v = self._value(V, e, i, X, P)
                    else:
                        dev_v = self._value(V, e, i, P, X)
                    cur_v = self._value(V, e, i, diag, diag)[None, :]
                    adv = dev_v - cur_v
                    act = adv > 0
                    loss += w * float(adv[act].sum())
                    if not want_grad or not act.any():
                        continue
                    sign = 1.0 if i == a else -1.0
                    Xa, Pa = X[act], P[act]
                    if i == a:
                        np.add.at(Kmat[e], (Xa, Pa), sign * w)
                    else:
                        np.add.at(Kmat[e], (Pa, Xa), sign * w)
                        gC[e] += w * float(self.mass[e][Pa, Xa].sum())
                    np.add.at(Kmat[e], (Pa, Pa), -sign * w)
                    if i == b:
                        gC[e] -= w * float(self.mass[e][Pa, Pa].sum())
        if not want_grad:
            return loss, None, None
        gU = np.zeros_like(pg.U)
        for e, (a, b) in enumerate(pg.edges):
            rows = np.nonzero(np.any(Kmat[e] != 0, axis=1))[0]
            if rows.size:
                X = Kmat[e][rows] @ self.S[b]
                gU[e] = pg.chance_reach[e] * np.einsum("kz,kz->z", self.S[a][rows], X)
        return loss, gU, gC

    def final_delta(self) -> float:
        V = self.edge_values()
        grids = np.indices((self.K,) * self.n).reshape(self.n, -1)
        hat = self.predicted(V, list(grids))
        true = self.true.reshape(-1, self.n).T
        return float(np.abs(hat - true).max())


def final_gamma(pg: PolyEFG, nb: Neighborhood) -> float:
    """Largest subgame best-response advantage over the neighborhood's own profiles."""
    best = -np.inf
    for p in nb.profiles:
        for i, j in pg.edges:
            for a, b in ((i, j), (j, i)):
                br_value, _ = pg.subgame_best_response(a, b, p[b])
                cur = pg.subgame_utility(a, b, p[a], p[b])[0]
                best = max(best, br_value - cur)
    return float(best)


def sg_decompose(g: ExtensiveFormGame, neighborhood: Neighborhood, cfg: SGConfig | None = None,
                 edges=None) -> SGResult:
    """Fit a constant-sum poly-EFG to ``g`` around ``neighborhood``.

    Parameters start at zero.  Every epoch recomputes the best-response sets,
    shuffles the cross product with the seeded generator and takes one
    normalized subgradient step per batch.
    """
    cfg = cfg or SGConfig()
    if not g.perfect_recall:
        raise ValueError("sg_decompose requires a perfect-recall game")
    if neighborhood.num_players != g.num_players:
        raise ValueError("neighborhood does not match the game's player count")
    for p in neighborhood.profiles:
        g.check_profile(p)
    pg = PolyEFG(g, edges)
    fit = _Fitter(pg, neighborhood)
    rng = make_rng(cfg.seed)
    n, K = g.num_players, len(neighborhood.profiles)
    total = K ** n
    history = []
    sets = [neighborhood.strategy_set(i) for i in range(n)]
    for epoch in range(1, cfg.epochs + 1):
        fit.set_deviations(get_brs(pg, sets))
        eta = lr_schedule(epoch, cfg.lr_start, cfg.lr_floor, cfg.lr_halve_every)
        order = rng.permutation(total)
        losses = []
        for start in range(0, total, cfg.batch_size):
            flat = order[start: start + cfg.batch_size]
            idx = list(np.unravel_index(flat, (K,) * n))
            loss, gU, gC = fit.loss_and_grad(idx, cfg.lam)
            losses.append(loss)
            norm = float(np.sqrt(np.sum(gU * gU) + np.sum(gC * gC)))
            if norm <= GRAD_NORM_EPS:
                continue
            pg.U -= (eta / norm) * gU
            pg.C -= (eta / norm) * gC
        history.append(float(np.mean(losses)))
    delta = fit.final_delta()
    gamma = final_gamma(pg, neighborhood)
    return SGResult(pg, delta, gamma, cfg, history)
