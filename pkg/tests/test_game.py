"""Objective-game containers, induced outcome distributions, payoffs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berknash.game import (
    ObjectiveGame,
    StrategyProfile,
    objective_distribution,
    restrict_actions,
    true_expected_payoff,
    validate_game,
)


def tiny_game() -> ObjectiveGame:
    """Two players, two states; player a sees a noisy state signal.

    a's consequence is b's action; b's consequence encodes (state, own action).
    """
    law = np.array(
        [
            [[0.30], [0.10]],  # state 0: P(sig a = 0) = .3, P(sig a = 1) = .1
            [[0.12], [0.48]],  # state 1
        ]
    )
    fb_a = np.zeros((2, 2, 2), dtype=np.int64)
    fb_a[:, :, 1] = 1  # a observes b's action
    fb_b = np.zeros((2, 2, 2), dtype=np.int64)
    for w in range(2):
        for xb in range(2):
            fb_b[w, :, xb] = 2 * w + xb
    return ObjectiveGame(
        players=("a", "b"),
        states=("w0", "w1"),
        signals={"a": ("low", "high"), "b": ("none",)},
        law=law,
        actions={"a": ("l", "r"), "b": ("u", "d")},
        consequences={"a": ("b-u", "b-d"), "b": ("w0u", "w0d", "w1u", "w1d")},
        feedback={"a": fb_a, "b": fb_b},
        payoff={
            "a": np.array([[1.0, 0.0], [0.0, 2.0]]),
            "b": np.array([[1.0, 0.0, 0.0, 3.0], [0.0, 2.0, 1.0, 0.0]]),
        },
        name="tiny",
    )


def brute_outcome_table(game, profile, player):
    """Direct-enumeration oracle for the induced outcome distribution."""
    idx = game.players.index(player)
    n_sig = game.n_signals(player)
    table = np.zeros((n_sig, game.n_actions(player), game.n_consequences(player)))
    sig_mass = np.zeros(n_sig)
    it = np.ndindex(game.law.shape)
    for cell in it:
        w, sigs = cell[0], cell[1:]
        p_cell = game.law[cell]
        if p_cell == 0:
            continue
        sig_mass[sigs[idx]] += p_cell
        for xa in range(game.n_actions("a")):
            for xb in range(game.n_actions("b")):
                prob = (
                    profile.table["a"][sigs[0], xa]
                    * profile.table["b"][sigs[1], xb]
                )
                y = game.feedback[player][w, xa, xb]
                own = (xa, xb)[idx]
                table[sigs[idx], own, y] += p_cell * prob
    # Condition on own signal and action: rows are Q(y | s, x).
    out = np.zeros_like(table)
    for s in range(n_sig):
        if sig_mass[s] == 0:
            continue
        for x in range(game.n_actions(player)):
            sigma = profile.table[player][s, x]
            if sigma > 0:
                out[s, x] = table[s, x] / (sig_mass[s] * sigma)
    return out, sig_mass


def test_objective_distribution_matches_enumeration():
    game = tiny_game()
    profile = StrategyProfile(
        {
            "a": np.array([[0.25, 0.75], [0.6, 0.4]]),
            "b": np.array([[0.5, 0.5]]),
        }
    )
    dist = objective_distribution(game, profile, "a")
    oracle, sig_mass = brute_outcome_table(game, profile, "a")
    np.testing.assert_allclose(dist.table, oracle, atol=1e-12)
    np.testing.assert_allclose(dist.signal_marginal, sig_mass, atol=1e-12)
    dist_b = objective_distribution(game, profile, "b")
    oracle_b, _ = brute_outcome_table(game, profile, "b")
    np.testing.assert_allclose(dist_b.table, oracle_b, atol=1e-12)


def test_outcome_distribution_rows_sum_to_one():
    game = tiny_game()
    profile = StrategyProfile.uniform(game)
    for p in game.players:
        dist = objective_distribution(game, profile, p)
        np.testing.assert_allclose(dist.table.sum(axis=-1), 1.0, atol=1e-12)


def test_true_expected_payoff_matches_enumeration():
    game = tiny_game()
    profile = StrategyProfile(
        {
            "a": np.array([[0.25, 0.75], [0.6, 0.4]]),
            "b": np.array([[0.5, 0.5]]),
        }
    )
    for player in game.players:
        total = 0.0
        for cell in np.ndindex(game.law.shape):
            w, sigs = cell[0], cell[1:]
            for xa in range(2):
                for xb in range(2):
                    prob = (
                        game.law[cell]
                        * profile.table["a"][sigs[0], xa]
                        * profile.table["b"][sigs[1], xb]
                    )
                    y = game.feedback[player][w, xa, xb]
                    own = xa if player == "a" else xb
                    total += prob * game.payoff[player][own, y]
        assert abs(true_expected_payoff(game, profile, player) - total) < 1e-12


@settings(deadline=None, max_examples=50)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_expected_payoff_affine_in_own_mixture(t, q):
    """pi(t*sigma + (1-t)*sigma') is the t-blend of the two payoffs."""
    game = tiny_game()
    base = {"b": np.array([[q, 1.0 - q]])}
    rows0 = np.array([[1.0, 0.0], [1.0, 0.0]])
    rows1 = np.array([[0.0, 1.0], [0.3, 0.7]])
    p0 = StrategyProfile({"a": rows0, **base})
    p1 = StrategyProfile({"a": rows1, **base})
    pt = StrategyProfile({"a": t * rows1 + (1 - t) * rows0, **base})
    v0 = true_expected_payoff(game, p0, "a")
    v1 = true_expected_payoff(game, p1, "a")
    vt = true_expected_payoff(game, pt, "a")
    assert abs(vt - (t * v1 + (1 - t) * v0)) < 1e-9


def test_profile_constructors_and_distance():
    game = tiny_game()
    uni = StrategyProfile.uniform(game)
    np.testing.assert_allclose(uni.table["a"], 0.5)
    pure = StrategyProfile.pure(game, {"a": 1, "b": 0})
    np.testing.assert_allclose(pure.table["a"], [[0.0, 1.0], [0.0, 1.0]])
    pure.validate(game)  # raises on defect
    d = uni.distance(pure)
    assert abs(d - 0.5) < 1e-12
    swapped = uni.with_player("b", np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(swapped.table["b"], [[1.0, 0.0]])
    np.testing.assert_allclose(swapped.table["a"], uni.table["a"])


def test_profile_validate_flags_bad_rows():
    game = tiny_game()
    bad = StrategyProfile(
        {"a": np.array([[0.7, 0.7], [0.5, 0.5]]), "b": np.array([[1.0, 0.0]])}
    )
    with pytest.raises(ValueError):
        bad.validate(game)
    neg = StrategyProfile(
        {"a": np.array([[1.2, -0.2], [0.5, 0.5]]), "b": np.array([[1.0, 0.0]])}
    )
    with pytest.raises(ValueError):
        neg.validate(game)


def test_validate_game_accepts_tiny():
    assert not validate_game(tiny_game()).problems


def test_validate_game_flags_defects():
    game = tiny_game()
    bad_law = ObjectiveGame(
        **{
            **game.__dict__,
            "law": game.law * 2.0,
        }
    )
    assert validate_game(bad_law).problems
    fb = {k: v.copy() for k, v in game.feedback.items()}
    fb["a"][0, 0, 0] = 9  # out-of-range consequence index
    bad_fb = ObjectiveGame(**{**game.__dict__, "feedback": fb})
    assert validate_game(bad_fb).problems


def test_signal_helpers():
    game = tiny_game()
    np.testing.assert_allclose(game.signal_marginal("a"), [0.42, 0.58])
    np.testing.assert_allclose(game.signal_marginal("b"), [1.0])
    assert game.n_signals("a") == 2 and game.n_actions("b") == 2
    assert game.n_consequences("b") == 4
    assert game.player_index("b") == 1


def test_restrict_actions_consistency():
    game = tiny_game()
    sub = restrict_actions(game, "a", keep=[1])
    assert sub.n_actions("a") == 1
    assert not validate_game(sub).problems
    profile_full = StrategyProfile.pure(game, {"a": 1, "b": 0})
    profile_sub = StrategyProfile.pure(sub, {"a": 0, "b": 0})
    for p in game.players:
        assert abs(
            true_expected_payoff(game, profile_full, p)
            - true_expected_payoff(sub, profile_sub, p)
        ) < 1e-12
