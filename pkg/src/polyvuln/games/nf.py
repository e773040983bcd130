"""Dense normal-form games and mixed-strategy evaluation."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np


class NormalFormGame:
    """A finite normal-form game with dense utilities.

    ``utilities`` has shape ``(|P_1|, ..., |P_n|, n)``; entry ``[rho][i]`` is
    ``u_i(rho)``.
    """

    def __init__(self, utilities, action_names: Sequence[Sequence[str]] | None = None,
                 name: str = "normal_form"):
        u = np.array(utilities, dtype=float)
        if u.ndim < 2 or u.shape[-1] != u.ndim - 1:
            raise ValueError(f"utilities of shape {u.shape} do not describe an n-player game")
        if any(k < 1 for k in u.shape[:-1]):
            raise ValueError("every player needs at least one pure strategy")
        if not np.all(np.isfinite(u)):
            raise ValueError("utilities must be finite")
        u.setflags(write=False)
        self.utilities = u
        self.name = name
        if action_names is None:
            action_names = [[str(a) for a in range(k)] for k in u.shape[:-1]]
        if [len(a) for a in action_names] != list(u.shape[:-1]):
            raise ValueError("action_names do not match the utility shape")
        self.action_names = tuple(tuple(a) for a in action_names)

    def __repr__(self):
        return f"NormalFormGame({self.name!r}, shape={self.shape})"

    @property
    def num_players(self) -> int:
        return self.utilities.ndim - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.utilities.shape[:-1]

    @property
    def num_profiles(self) -> int:
        return int(np.prod(self.shape))

    def action_index(self, i: int, name: str) -> int:
        return self.action_names[i].index(name)

    def profile_index(self, names: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.action_index(i, a) for i, a in enumerate(names))

    def pure_mixed(self, i: int, action) -> np.ndarray:
        k = self.action_index(i, action) if isinstance(action, str) else int(action)
        s = np.zeros(self.shape[i])
        s[k] = 1.0
        return s

    def pure_profile(self, names: Sequence) -> list[np.ndarray]:
        return [self.pure_mixed(i, a) for i, a in enumerate(names)]

    def uniform_profile(self) -> list[np.ndarray]:
        return [np.full(k, 1.0 / k) for k in self.shape]

    def check_profile(self, profile, skip: int | None = None) -> None:
        if len(profile) != self.num_players:
            raise ValueError(f"profile has {len(profile)} strategies, game has {self.num_players} players")
        for i, s in enumerate(profile):
            if i == skip:
                continue
            s = np.asarray(s)
            if s.shape != (self.shape[i],):
                raise ValueError(f"player {i}: strategy shape {s.shape}, expected ({self.shape[i]},)")

    # -- JSON interchange ---------------------------------------------------

    def to_json(self) -> dict:
        utils = {}
        for rho in np.ndindex(*self.shape):
            utils[",".join(map(str, rho))] = [float(v) for v in self.utilities[rho]]
        return {"players": self.num_players, "actions": list(self.shape), "utilities": utils,
                "action_names": [list(a) for a in self.action_names]}

    @classmethod
    def from_json(cls, doc: dict, name: str = "normal_form") -> "NormalFormGame":
        n = int(doc["players"])
        shape = tuple(int(k) for k in doc["actions"])
        if len(shape) != n:
            raise ValueError(f"'actions' lists {len(shape)} players, 'players' says {n}")
        u = np.full(shape + (n,), np.nan)
        for key, vals in doc["utilities"].items():
            rho = tuple(int(t) for t in key.split(","))
            if len(rho) != n or len(vals) != n:
                raise ValueError(f"bad utility entry {key!r}")
            u[rho] = vals
        if np.isnan(u).any():
            raise ValueError("utilities must be given for every pure profile")
        names = doc.get("action_names")
        return cls(u, action_names=names, name=name)

    @classmethod
    def load(cls, path) -> "NormalFormGame":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text()), name=path.stem)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def _contract(u: np.ndarray, profile, skip: int | None = None) -> np.ndarray:
    """Contract all player axes of ``u`` with the profile, except ``skip``."""
    out = u
    # contract from the last player axis so earlier axis numbers stay valid
    for j in reversed(range(len(profile))):
        if j == skip:
            continue
        out = np.tensordot(out, np.asarray(profile[j], dtype=float), axes=([j], [0]))
    return out


def expected_utility_nf(g: NormalFormGame, profile) -> np.ndarray:
    """Per-player expected utility of a mixed profile."""
    g.check_profile(profile)
    return _contract(g.utilities, profile)


def deviation_values(g: NormalFormGame, i: int, profile) -> np.ndarray:
    """``u_i(rho_i, s_-i)`` for every pure strategy ``rho_i`` of player ``i``."""
    g.check_profile(profile, skip=i)
    ui = g.utilities[..., i]
    return _contract(ui, profile, skip=i)


def nash_gap_nf(g: NormalFormGame, profile) -> float:
    """Largest unilateral gain over players: ``max_i max_rho u_i(rho, s_-i) - u_i(s)``."""
    u = expected_utility_nf(g, profile)
    return max(float(deviation_values(g, i, profile).max() - u[i]) for i in range(g.num_players))

