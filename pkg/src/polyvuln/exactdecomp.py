"""Exact linear-programming decompositions and equilibrium LPs.

* :func:`compute_cce` -- a coarse correlated equilibrium of a normal-form game.
* :func:`compute_gamma` -- smallest ``gamma`` such that a constant-sum
  polymatrix game is ``(0, gamma)``-subgame stable: for each ordered edge
  ``(i, j)`` and pure deviation ``rho'_i``, maximize the subgame advantage of
  the deviation over all CCEs.
* :func:`min_delta_nf` -- smallest ``delta`` such that a normal-form game is
  within ``delta`` of a pairwise constant-sum polymatrix game.
* :func:`min_delta_perfect_info` -- the same for perfect-information
  extensive-form games, with one utility variable per terminal and edge.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .games.efg import ExtensiveFormGame
from .games.nf import NormalFormGame
from .linprog import LinearProgram, solve
from .polymatrix import PolyEFG, PolymatrixGame, all_edges

log = logging.getLogger(__name__)

MAX_PROFILES = 100_000
MAX_TERMINALS = 100_000


@dataclass
class DecompositionResult:
    """A constant-sum decomposition with its quality measures."""

    game: object  # PolymatrixGame or PolyEFG
    delta: float
    gamma: float | None = None
    method: str = ""
    source: str = ""
    params: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {"delta": float(self.delta),
                "gamma": None if self.gamma is None else float(self.gamma),
                "method": self.method, "game": self.source, "params": self.params,
                **self.info}

    def to_json(self) -> dict:
        doc = self.game.to_json()
        doc["metadata"] = self.metadata()
        return doc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


# ---------------------------------------------------------------------------
# CCE machinery
# ---------------------------------------------------------------------------


def deviation_matrix(g: NormalFormGame, i: int) -> np.ndarray:
    """Rows ``rho'_i``, columns flattened profiles ``rho``: ``u_i(rho'_i, rho_-i) - u_i(rho)``.

    ``row @ mu`` is the advantage ``a_i(rho'_i, mu)`` of committing to ``rho'_i``.
    """
    ui = g.utilities[..., i]
    rows = []
    for k in range(g.shape[i]):
        dev = np.take(ui, [k], axis=i)  # broadcast along player i's axis
        rows.append((np.broadcast_to(dev, ui.shape) - ui).ravel())
    return np.array(rows)


def cce_constraints(g: NormalFormGame) -> np.ndarray:
    """All external-deviation advantage rows, stacked over players."""
    return np.vstack([deviation_matrix(g, i) for i in range(g.num_players)])


def _guard(g: NormalFormGame):
    if g.num_profiles > MAX_PROFILES:
        raise ValueError(f"game has {g.num_profiles} pure profiles (limit {MAX_PROFILES})")


def compute_cce(g: NormalFormGame) -> np.ndarray:
    """A coarse correlated equilibrium, as weights shaped like the profile grid."""
    _guard(g)
    P = g.num_profiles
    lp = LinearProgram(np.zeros(P), A_ub=cce_constraints(g), b_ub=np.zeros(sum(g.shape)),
                       A_eq=np.ones((1, P)), b_eq=[1.0])
    sol = solve(lp)
    if not sol.optimal:
        raise RuntimeError(f"CCE linear program reported {sol.status}")
    mu = np.maximum(sol.x, 0.0)
    return (mu / mu.sum()).reshape(g.shape)


def compute_gamma(pg: PolymatrixGame) -> float:
    """Smallest ``gamma`` making the constant-sum polymatrix game ``(0, gamma)``-subgame stable."""
    if not pg.is_constant_sum:
        raise ValueError("compute_gamma needs a pairwise constant-sum polymatrix game")
    g = pg.to_normal_form()
    _guard(g)
    P = g.num_profiles
    A_cce = cce_constraints(g)
    b_cce = np.zeros(A_cce.shape[0])
    n = g.num_players
    idx = np.indices(g.shape).reshape(n, -1)  # pure strategy of each player per profile
    best = None
    for i, j in itertools.chain(pg.edges, ((b, a) for a, b in pg.edges)):
        m = pg.matrix(i, j)
        current = m[idx[i], idx[j]]
        for k in range(g.shape[i]):
            adv = m[k, idx[j]] - current
            lp = LinearProgram(adv, A_ub=A_cce, b_ub=b_cce, A_eq=np.ones((1, P)), b_eq=[1.0],
                               maximize=True)
            sol = solve(lp)
            if not sol.optimal:
                continue
            best = sol.objective if best is None else max(best, sol.objective)
    if best is None:
        log.warning("every subgame-advantage LP was infeasible; reporting gamma = 0")
        return 0.0
    return max(float(best), 0.0)


# ---------------------------------------------------------------------------
# minimum-delta decompositions
# ---------------------------------------------------------------------------


def min_delta_nf(g: NormalFormGame, method: str = "auto") -> DecompositionResult:
    """Closest pairwise constant-sum polymatrix game in max-norm.

    Variables are ``u_ij(rho_i, rho_j)`` for every edge ``i < j``, the edge
    constants ``c_ij`` and ``delta``; the reverse side is substituted as
    ``u_ji = c_ij - u_ij^T`` so the constant-sum equalities hold by
    construction.
    """
    _guard(g)
    n, shape, P = g.num_players, g.shape, g.num_profiles
    edges = all_edges(n)
    offs, nv = {}, 0
    for e in edges:
        offs[e] = nv
        nv += shape[e[0]] * shape[e[1]]
    c_off = {e: nv + k for k, e in enumerate(edges)}
    d_var = nv + len(edges)
    nv = d_var + 1
    idx = np.indices(shape).reshape(n, -1)
    prof = np.arange(P)

    rows, cols, vals = [], [], []
    for i in range(n):
        base = i * P
        for j in range(n):
            if j == i:
                continue
            e = (min(i, j), max(i, j))
            a, b = e
            var = offs[e] + idx[a] * shape[b] + idx[b]
            if i < j:
                rows.append(base + prof); cols.append(var); vals.append(np.ones(P))
            else:
                rows.append(base + prof); cols.append(var); vals.append(-np.ones(P))
                rows.append(base + prof); cols.append(np.full(P, c_off[e])); vals.append(np.ones(P))
    fit = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n * P, nv))
    rhs = np.concatenate([g.utilities[..., i].ravel() for i in range(n)])
    dcol = sp.csr_matrix((np.ones(n * P), (np.arange(n * P), np.full(n * P, d_var))), shape=(n * P, nv))
    # fit - delta <= u  and  -fit - delta <= -u
    A = sp.vstack([fit - dcol, -fit - dcol]).tocsr()
    b = np.concatenate([rhs, -rhs])
    c = np.zeros(nv)
    c[d_var] = 1.0
    bounds = [(None, None)] * d_var + [(0.0, None)]
    sol = solve(LinearProgram(c, A_ub=A, b_ub=b, bounds=bounds), method=method)
    if not sol.optimal:
        raise RuntimeError(f"decomposition LP reported {sol.status}")
    x = sol.x
    payoffs, consts = {}, {}
    for e in edges:
        a, b_ = e
        mij = x[offs[e]: offs[e] + shape[a] * shape[b_]].reshape(shape[a], shape[b_])
        payoffs[e] = (mij, x[c_off[e]] - mij.T)
        consts[e] = x[c_off[e]]
    pm = PolymatrixGame(shape, payoffs, consts, action_names=g.action_names, name=f"{g.name}_csp")
    delta = float(np.abs(pm.to_normal_form().utilities - g.utilities).max())
    return DecompositionResult(pm, delta, method="lp-nf", source=g.name,
                               info={"lp_objective": float(sol.objective), "backend": sol.backend})


def reduced_pure_reach(g: ExtensiveFormGame, i: int) -> np.ndarray:
    """Distinct rows of player ``i``'s pure-strategy reach matrix.

    Pure strategies that differ only at unreachable infosets reach the same
    terminals and are collapsed.
    """
    R = g.pure_reach_matrix(i)
    return np.unique(R, axis=0)


def min_delta_perfect_info(g: ExtensiveFormGame, formulation: str = "profile",
                           method: str = "auto") -> DecompositionResult:
    """Closest constant-sum poly-EFG of a perfect-information game.

    Variables are ``u_ij(z)`` per edge and terminal, the edge constants and
    ``delta``.  With ``formulation="profile"`` (default) the fit is measured
    the way a poly-EFG is evaluated: for every reduced pure profile ``rho``,
    ``sum_j sum_z p_i(z, rho_i) p_j(z, rho_j) p'_c(z) u_ij(z)`` must be within
    ``delta`` of ``u_i(rho)``, where ``p'_c`` is the subgame chance reach.
    ``formulation="terminal"`` instead requires ``sum_j u_ij(z)`` to be within
    ``delta`` of ``u_i(z)`` at every terminal, which ignores how subgames
    evaluate other players' moves and is only a relaxation.
    """
    if not g.is_perfect_information():
        raise ValueError("min_delta_perfect_info requires a perfect-information game")
    if g.num_terminals > MAX_TERMINALS:
        raise ValueError(f"game has {g.num_terminals} terminals (limit {MAX_TERMINALS})")
    if formulation not in ("profile", "terminal"):
        raise ValueError(f"unknown formulation {formulation!r}")
    n, nz = g.num_players, g.num_terminals
    pe = PolyEFG(g)
    edges = pe.edges
    ne = len(edges)
    d_var = ne * nz + ne
    nv = d_var + 1

    blocks, rhs = [], []
    if formulation == "terminal":
        for i in range(n):
            coef = np.zeros((nz, nv))
            for e, (a, b) in enumerate(edges):
                if i not in (a, b):
                    continue
                sgn = 1.0 if i == a else -1.0
                coef[np.arange(nz), e * nz + np.arange(nz)] = sgn
                if i == b:
                    coef[:, ne * nz + e] = 1.0
            blocks.append(coef)
            rhs.append(g.utilities[:, i])
    else:
        R = [reduced_pure_reach(g, i) for i in range(n)]
        counts = [r.shape[0] for r in R]
        total = int(np.prod(counts))
        if total > MAX_PROFILES:
            raise ValueError(f"{total} reduced pure profiles (limit {MAX_PROFILES})")
        grid = np.indices(counts).reshape(n, -1)
        reach = np.ones((total, nz)) * g.chance_reach
        for k in range(n):
            reach = reach * R[k][grid[k]]
        values = reach @ g.utilities  # (profiles, n)
        for i in range(n):
            coef = np.zeros((total, nv))
            for e, (a, b) in enumerate(edges):
                if i not in (a, b):
                    continue
                w = R[a][grid[a]] * R[b][grid[b]] * pe.chance_reach[e]
                sgn = 1.0 if i == a else -1.0
                coef[:, e * nz: (e + 1) * nz] = sgn * w
                if i == b:
                    coef[:, ne * nz + e] = w.sum(axis=1)
            # identical rows give identical constraints
            full = np.hstack([coef, values[:, i:i + 1]])
            full = np.unique(full, axis=0)
            blocks.append(full[:, :-1])
            rhs.append(full[:, -1])
    fit = np.vstack(blocks)
    u = np.concatenate(rhs)
    m = fit.shape[0]
    fit[:, d_var] = 0.0
    A = np.vstack([fit, -fit])
    A[:, d_var] = -1.0
    b = np.concatenate([u, -u])
    c = np.zeros(nv)
    c[d_var] = 1.0
    bounds = [(None, None)] * d_var + [(0.0, None)]
    sol = solve(LinearProgram(c, A_ub=sp.csr_matrix(A) if m > 2000 else A, b_ub=b, bounds=bounds),
                method=method)
    if not sol.optimal:
        raise RuntimeError(f"decomposition LP reported {sol.status}")
    x = sol.x
    pe.U[:] = x[: ne * nz].reshape(ne, nz)
    pe.C[:] = x[ne * nz: ne * nz + ne]
    residual = float(np.abs(fit[:, :d_var] @ x[:d_var] - u).max()) if m else 0.0
    return DecompositionResult(pe, residual, method=f"lp-efg-{formulation}", source=g.name,
                               params=dict(g.params),
                               info={"lp_objective": float(sol.objective), "constraints": int(2 * m),
                                     "backend": sol.backend})
