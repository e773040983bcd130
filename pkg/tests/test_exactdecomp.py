import numpy as np
import pytest

from helpers import random_csp_polymatrix, random_nf
from polyvuln.analysis import cce_gap
from polyvuln.exactdecomp import (DecompositionResult, compute_cce, compute_gamma, min_delta_nf,
                                  min_delta_perfect_info)
from polyvuln.games import build_builtin, induced_normal_form
from polyvuln.games.nf import NormalFormGame


def test_cce_satisfies_constraints():
    rng = np.random.default_rng(0)
    for _ in range(10):
        g = random_nf(rng, (2, 3, 2))
        mu = compute_cce(g)
        assert mu.shape == g.shape
        assert mu.min() >= 0 and mu.sum() == pytest.approx(1.0)
        assert cce_gap(g, mu) <= 1e-9


def test_constant_sum_game_has_zero_delta():
    rng = np.random.default_rng(1)
    pm = random_csp_polymatrix(rng, (2, 2, 3))
    res = min_delta_nf(pm.to_normal_form())
    assert res.delta <= 1e-9
    assert res.game.is_constant_sum


def test_delta_is_bounded_by_perturbation():
    rng = np.random.default_rng(2)
    pm = random_csp_polymatrix(rng, (2, 2, 2))
    noise = rng.uniform(-0.1, 0.1, size=pm.to_normal_form().utilities.shape)
    g = NormalFormGame(pm.to_normal_form().utilities + noise)
    res = min_delta_nf(g)
    assert res.delta <= np.abs(noise).max() + 1e-9
    # the reported delta is the achieved max-norm error
    assert res.delta == pytest.approx(np.abs(res.game.to_normal_form().utilities - g.utilities).max())


def test_backends_agree():
    rng = np.random.default_rng(3)
    g = random_nf(rng, (2, 2, 2))
    assert min_delta_nf(g, method="simplex").delta == pytest.approx(
        min_delta_nf(g, method="highs").delta, abs=1e-7)


def test_two_player_zero_sum_delta_zero():
    assert min_delta_nf(build_builtin("matching_pennies")).delta <= 1e-9


def test_offense_defense_gamma_and_delta():
    g = build_builtin("offense_defense")
    assert min_delta_nf(g).delta <= 1e-9
    from polyvuln.polymatrix import offense_defense_polymatrix
    assert compute_gamma(offense_defense_polymatrix()) == pytest.approx(1.0, abs=1e-6)


def test_gamma_rejects_general_sum():
    from polyvuln.polymatrix import PolymatrixGame
    m = np.eye(2)
    pm = PolymatrixGame((2, 2), {(0, 1): (m, m)})
    with pytest.raises(ValueError):
        compute_gamma(pm)


def test_pruned_bad_card_with_chance_dealer_is_constant_sum():
    g = build_builtin("bad_card_pruned", dealer="chance")
    assert min_delta_perfect_info(g).delta <= 1e-9
    assert min_delta_nf(induced_normal_form(g)).delta <= 1e-9


@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_pruned_bad_card_with_player_dealer_is_quarter_beta(beta):
    g = build_builtin("bad_card_pruned", beta=beta)
    assert min_delta_nf(induced_normal_form(g)).delta == pytest.approx(beta / 4, abs=1e-7)


def test_terminal_formulation_is_exact_for_per_terminal_constant_sum():
    g = build_builtin("bad_card")
    res = min_delta_perfect_info(g, formulation="terminal")
    assert res.delta <= 1e-9


def test_result_serialization(tmp_path):
    res = min_delta_nf(build_builtin("appendix_a"))
    assert isinstance(res, DecompositionResult)
    doc = res.to_json()
    assert doc["metadata"]["delta"] == pytest.approx(res.delta)
    res.save(tmp_path / "d.json")
    assert (tmp_path / "d.json").exists()


def test_perfect_info_guard():
    with pytest.raises(ValueError):
        min_delta_perfect_info(build_builtin("kuhn_poker", players=2))
