"""Verification, homotopy solver, perturbations, cross-checks."""

import numpy as np
import pytest

from berknash.equilibrium import (
    PerturbationStructure,
    SolveConfig,
    VerifyConfig,
    abee_perceived_payoffs,
    belief_expected_payoff,
    cross_check,
    solve,
    verify_berk_nash,
)
from berknash.game import StrategyProfile
from berknash.subjective import DiscreteBelief

from oracles import perturbed_choice_quadrature

# ---------------------------------------------------------------------------
# payoff perturbations


def test_perturbation_single_action_is_degenerate():
    p = PerturbationStructure(scale=0.1)
    np.testing.assert_allclose(p.perturbed_strategy(np.array([4.2])), [1.0])


def test_perturbation_two_actions_closed_form():
    from scipy.special import expit
    from scipy.special import ndtr

    u = np.array([0.3, 0.5])
    logi = PerturbationStructure(family="logistic", scale=0.05)
    np.testing.assert_allclose(
        logi.perturbed_strategy(u)[1], expit((u[1] - u[0]) / 0.05), atol=1e-14
    )
    norm = PerturbationStructure(family="normal", scale=0.05)
    np.testing.assert_allclose(
        norm.perturbed_strategy(u)[1], ndtr((u[1] - u[0]) / 0.05), atol=1e-14
    )


@pytest.mark.parametrize("family", ["logistic", "normal"])
def test_perturbation_many_actions_matches_quadrature(family):
    u = np.array([0.10, 0.00, 0.06])
    scale = 0.05
    p = PerturbationStructure(family=family, scale=scale, n_mc=4096)
    got = p.perturbed_strategy(u)
    oracle = perturbed_choice_quadrature(u, scale, family)
    np.testing.assert_allclose(got, oracle, atol=5e-3)


def test_perturbation_deterministic_and_validated():
    p = PerturbationStructure(scale=0.02)
    u = np.array([0.0, 0.1, 0.2, 0.05])
    np.testing.assert_array_equal(p.perturbed_strategy(u), p.perturbed_strategy(u))
    with pytest.raises(ValueError):
        PerturbationStructure(family="gumbel")
    with pytest.raises(ValueError):
        PerturbationStructure(scale=0.0)


def test_perturbation_concentrates_as_scale_vanishes():
    u = np.array([0.0, 0.3, 0.1, 0.25])
    winners = [
        PerturbationStructure(scale=s).perturbed_strategy(u)[np.argmax(u)]
        for s in (0.05, 0.01, 0.002)
    ]
    assert winners[0] < winners[1] < winners[2]
    assert winners[2] >= 0.98


# ---------------------------------------------------------------------------
# verification


def test_verify_accepts_monopoly_equilibrium(monopoly):
    result = verify_berk_nash(monopoly.game, monopoly.models, monopoly.known_equilibria[0])
    assert result.accepted
    cert = result.certificate
    assert cert.worst_violation <= 1e-6
    np.testing.assert_allclose(
        cert.beliefs["monopolist"].mean(), [40.0, 10.0 / 3.0], atol=1e-6
    )
    # At (35/36, 1/36) the divergence at (40, 10/3) is 14/27 by hand.
    assert abs(cert.k_values["monopolist"] - 14.0 / 27.0) < 1e-8


def test_verify_rejects_uniform_monopoly_profile(monopoly):
    profile = StrategyProfile({"monopolist": np.array([[0.5, 0.5]])})
    result = verify_berk_nash(monopoly.game, monopoly.models, profile)
    assert not result.accepted
    assert result.worst_violation > 1e-3
    assert result.witness is not None


def test_verify_flags_continuum_on_pure_high_price(monopoly):
    profile = StrategyProfile({"monopolist": np.array([[0.0, 1.0]])})
    result = verify_berk_nash(monopoly.game, monopoly.models, profile)
    assert not result.accepted
    assert result.continuum_flags.get("monopolist", False)


def test_verify_accepts_candidate_beliefs_path(monopoly):
    belief = DiscreteBelief.point(np.array([40.0, 10.0 / 3.0]))
    result = verify_berk_nash(
        monopoly.game,
        monopoly.models,
        monopoly.known_equilibria[0],
        candidate_beliefs={"monopolist": belief},
    )
    assert result.accepted


def test_verify_rejects_wrong_candidate_beliefs(monopoly):
    belief = DiscreteBelief.point(np.array([37.0, 3.2]))
    result = verify_berk_nash(
        monopoly.game,
        monopoly.models,
        monopoly.known_equilibria[0],
        candidate_beliefs={"monopolist": belief},
    )
    assert not result.accepted


def test_verify_coordination_mixed_equilibrium(coordination):
    mixed = StrategyProfile(
        {"row": np.array([[0.4, 0.6]]), "col": np.array([[0.4, 0.6]])}
    )
    result = verify_berk_nash(coordination.game, coordination.models, mixed)
    assert result.accepted
    off = StrategyProfile(
        {"row": np.array([[0.5, 0.5]]), "col": np.array([[0.5, 0.5]])}
    )
    assert not verify_berk_nash(coordination.game, coordination.models, off).accepted


def test_belief_expected_payoff_hand_computed(coordination):
    """U(x) = sum_y Q_belief(y) payoff[x, y] for the opponent-marginal model."""
    belief = DiscreteBelief.point(np.array([0.25, 0.75]))
    u = belief_expected_payoff(
        coordination.game, coordination.models["row"], belief, "row"
    )
    pay = coordination.game.payoff["row"]
    oracle = np.array(
        [[0.25 * pay[x, 0] + 0.75 * pay[x, 1] for x in range(2)]]
    )
    np.testing.assert_allclose(u, oracle, atol=1e-12)


# ---------------------------------------------------------------------------
# solver


def test_solve_coordination_finds_all_three(coordination):
    result = solve(coordination.game, coordination.models, SolveConfig(seed=0))
    certs = result.certificates
    assert len(certs) == 3
    rows = sorted(round(float(c.profile.table["row"][0, 0]), 4) for c in certs)
    assert rows == [0.0, 0.4, 1.0]
    for c in certs:
        assert c.worst_violation <= 1e-6


def test_solve_reports_nonexistence_as_empty(nonexistence):
    result = solve(nonexistence.game, nonexistence.models, SolveConfig(seed=0))
    assert result.certificates == []
    assert result.diagnostics


# ---------------------------------------------------------------------------
# cross-checks and analogy payoffs


def test_monopoly_equilibrium_is_not_nash_and_not_sce(monopoly):
    eq = monopoly.known_equilibria[0]
    assert not cross_check(monopoly.game, eq, "nash").passed
    assert not cross_check(monopoly.game, eq, "sce").passed


def test_coordination_equilibria_are_nash(coordination):
    for eq in coordination.known_equilibria:
        report = cross_check(coordination.game, eq, "nash")
        assert report.passed


def test_trading_equilibrium_cross_checks(trading):
    eq = trading.known_equilibria[0]
    assert cross_check(trading.game, eq, "nash").passed
    report = cross_check(trading.game, eq, "abee", analogy=trading.analogy)
    assert report.passed


def test_abee_perceived_payoffs_match_classwise_formula(trading):
    """Analogy-based values equal the two-class pooled-ask expectation."""
    eq = trading.known_equilibria[0]
    got = abee_perceived_payoffs(trading.game, eq, "buyer", trading.analogy)
    inst = trading.extras["instance"]
    bids = trading.extras["bids"]
    oracle = np.array([[inst.pi_classwise(b) for b in bids]])
    np.testing.assert_allclose(got, oracle, atol=1e-12)


def test_cross_check_rejects_unknown_mode(trading):
    with pytest.raises(ValueError):
        cross_check(trading.game, trading.known_equilibria[0], "qre")
