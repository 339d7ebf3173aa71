"""Worked example builders: registries, closed forms, frozen values."""

import numpy as np
import pytest
from scipy.stats import norm

from berknash.examples import (
    EXAMPLES,
    InvalidScheduleError,
    NoCutoffError,
    build,
    build_monetary,
    build_monopoly,
    cutoff_fixed_point,
    cutoff_response,
    monetary_believed_response,
    selection_estimates,
    tax_estimators,
    tax_estimators_continuous,
    tax_fixed_points,
)
from berknash.game import validate_game
from berknash.subjective import validate_model

from .oracles import outcome_rows


def test_registry_contents_and_build():
    assert set(EXAMPLES) == {
        "coordination",
        "monetary",
        "monopoly",
        "nonexistence",
        "regression",
        "taxation",
        "trading-classwise",
        "trading-classwise-trade-conditioned",
        "trading-independent",
        "trading-trade-conditioned",
    }
    with pytest.raises((KeyError, ValueError)):
        build("no-such-example")


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_bundles_are_internally_valid(name):
    bundle = build(name)
    assert bundle.name == name
    assert not validate_game(bundle.game).problems
    for player, model in bundle.models.items():
        assert player in bundle.game.players
        assert not validate_model(model, bundle.game, player).problems
    for profile in bundle.known_equilibria:
        profile.validate(bundle.game)


# ---------------------------------------------------------------------------
# monopoly


def test_monopoly_true_demand_means(monopoly):
    game = monopoly.game
    values = np.asarray(game.consequence_values["monopolist"], float)
    for action, price in enumerate((2.0, 10.0)):
        row = np.zeros((1, 2))
        row[0, action] = 1.0
        weights, rows = outcome_rows(game, {"monopolist": row}, "monopolist")
        mean = float(weights @ rows @ values)
        assert mean == pytest.approx(42.0 - 4.0 * price, abs=1e-9)


def test_monopoly_known_equilibrium_row(monopoly):
    row = monopoly.known_equilibria[0].table["monopolist"][0]
    np.testing.assert_allclose(row, [35.0 / 36.0, 1.0 / 36.0], atol=1e-6)


def test_build_monopoly_respects_overrides():
    bundle = build_monopoly(prices=(3, 8), true_intercept=30, true_slope=2)
    game = bundle.game
    values = np.asarray(game.consequence_values["monopolist"], float)
    for action, price in enumerate((3.0, 8.0)):
        row = np.zeros((1, 2))
        row[0, action] = 1.0
        weights, rows = outcome_rows(game, {"monopolist": row}, "monopolist")
        assert float(weights @ rows @ values) == pytest.approx(30.0 - 2.0 * price, abs=1e-9)


# ---------------------------------------------------------------------------
# taxation


def test_tax_estimators_exact_on_quadratic_schedule():
    for x in (0.5, 1.5, 10.0 / 7.0):
        ratio, (icept, slope) = tax_estimators(x)
        assert ratio == pytest.approx(0.1 * x, abs=1e-12)
        assert slope == pytest.approx(0.2 * x, abs=1e-12)
        assert icept < 0  # convexity makes the fitted line undercut at zero


def test_tax_estimators_continuous_matches_discrete_closed_form():
    ratio, slope = tax_estimators_continuous(1.5)
    assert ratio == pytest.approx(0.15, abs=1e-9)
    assert slope == pytest.approx(0.30, abs=1e-9)
    with pytest.raises(InvalidScheduleError):
        tax_estimators_continuous(1.5, schedule=lambda z: -z)


def test_tax_fixed_points_frozen():
    fp = tax_fixed_points()
    assert fp["ratio"] == pytest.approx(5.0 / 3.0, abs=1e-9)
    assert fp["linear"] == pytest.approx(10.0 / 7.0, abs=1e-9)
    assert fp["optimum"] == pytest.approx(10.0 / 7.0, abs=1e-9)
    assert fp["ratio"] > fp["optimum"]


# ---------------------------------------------------------------------------
# regression with selective attrition


def test_selection_estimates_match_mills_ratios():
    for c in (0.3, 1.0, 2.5):
        theta_c, theta_p = selection_estimates(c)
        assert theta_c == pytest.approx(norm.pdf(c) / norm.cdf(c), abs=1e-10)
        assert theta_p == pytest.approx(-norm.pdf(c) / norm.sf(c), abs=1e-10)


def test_selection_estimates_against_monte_carlo(rng):
    c = 0.8825058697168535
    draws = rng.standard_normal(400_000)
    kept = draws[draws <= c]
    dropped = draws[draws > c]
    theta_c, theta_p = selection_estimates(c)
    for sample, target in ((kept, -theta_c), (dropped, -theta_p)):
        se = sample.std(ddof=1) / np.sqrt(sample.size)
        assert abs(sample.mean() - target) < 4 * se


def test_cutoff_response_is_scaled_estimate_gap():
    c, kappa = 1.0, 2.0
    theta_c, theta_p = selection_estimates(c)
    assert cutoff_response(c, kappa) == pytest.approx((theta_c - theta_p) / kappa, abs=1e-12)


def test_cutoff_fixed_points_frozen_and_consistent():
    # [DERIVED] frozen from an independent bisection of c = gap(c)/kappa.
    frozen = {1.5: 1.3106147866935525, 2.0: 0.8825058697168535, 3.0: 0.554226723994292}
    for kappa, expected in frozen.items():
        c = cutoff_fixed_point(kappa)
        assert c == pytest.approx(expected, abs=1e-9)
        theta_c, theta_p = selection_estimates(c)
        assert abs(c - (theta_c - theta_p) / kappa) < 1e-8
    cuts = [cutoff_fixed_point(k) for k in (1.5, 2.0, 3.0)]
    assert cuts[0] > cuts[1] > cuts[2]


def test_cutoff_fixed_point_missing_for_weak_scaling():
    for kappa in (0.5, 1.0):
        with pytest.raises(NoCutoffError):
            cutoff_fixed_point(kappa)


# ---------------------------------------------------------------------------
# bilateral trading


def test_trading_instance_marginals_and_classes(trading):
    inst = trading.extras["instance"]
    np.testing.assert_allclose(inst.ask_marginal, [0.3, 0.35, 0.35])
    np.testing.assert_allclose(inst.value_marginal, [0.3, 0.35, 0.35])
    assert inst.classes == ((0, 1), (2,))
    assert inst.joint.sum() == pytest.approx(1.0)


def test_trading_payoffs_frozen(trading):
    inst = trading.extras["instance"]
    assert inst.pi_rational(1.0) == pytest.approx(0.1, abs=1e-12)
    assert inst.pi_independent(1.0) == pytest.approx(0.33, abs=1e-12)
    assert inst.pi_classwise(1.0) == pytest.approx(11.0 / 65.0, abs=1e-12)
    assert inst.pi_trade_conditioned(1.0, 2.0) == pytest.approx(27.0 / 130.0, abs=1e-12)
    assert inst.pi_classwise_trade_conditioned(1.0, 2.0) == pytest.approx(0.15, abs=1e-12)


def test_trading_rational_payoff_by_hand(trading):
    # Bid 1 trades only at ask 1: value column (0, 2, 4) against joint row 0.
    inst = trading.extras["instance"]
    gross = 0.0 * 0.15 + 2.0 * 0.10 + 4.0 * 0.05
    assert inst.pi_rational(1.0) == pytest.approx(gross - 1.0 * 0.3, abs=1e-12)


def test_trading_fitted_distributions(trading):
    inst = trading.extras["instance"]
    np.testing.assert_allclose(inst.fitted_value_given_trade(1.0), [0.5, 1 / 3, 1 / 6], atol=1e-12)
    rows = inst.fitted_ask_given_class()
    np.testing.assert_allclose(rows[0], [5 / 13, 5 / 13, 3 / 13], atol=1e-12)
    np.testing.assert_allclose(rows[1], [1 / 7, 2 / 7, 4 / 7], atol=1e-12)


def test_trading_equilibrium_bids_all_variants(trading):
    inst = trading.extras["instance"]
    full = trading.extras["bids"]
    tc = build("trading-trade-conditioned").extras["bids"]
    assert full == (0.0, 1.0, 2.0, 3.0)
    assert tc == (1.0, 2.0, 3.0)
    for variant, bids in (
        ("rational", full),
        ("independent", full),
        ("classwise", full),
        ("trade-conditioned", tc),
        ("classwise-trade-conditioned", tc),
    ):
        assert inst.equilibrium_bids(variant, bids) == [1.0]


def test_trading_bundle_analogy_matches_instance(trading):
    cells = trading.analogy.cells
    assert cells["buyer"] == ((0, 1), (2,))
    assert cells["seller"] == ((0,), (1,), (2,))


# ---------------------------------------------------------------------------
# monetary policy


def test_monetary_believed_response_closed_form():
    # Optimal announcement under a believed linear response U = t1 - t2 e.
    assert monetary_believed_response(6.25, 0.5) == pytest.approx(2.5, abs=1e-12)


def test_monetary_bundle_equilibrium_support(monetary):
    x_grid = np.asarray(monetary.extras["x_grid"], float)
    row = monetary.known_equilibria[0].table["authority"][0]
    support = x_grid[row > 0.5]
    assert support.shape == (1,)
    assert support[0] == pytest.approx(monetary.extras["target"], abs=1e-12)
    assert monetary.extras["target"] == pytest.approx(2.5, abs=1e-12)
    np.testing.assert_allclose(monetary.extras["theta_star"], [6.25, 0.5], atol=1e-12)


def test_build_monetary_rescales_with_primitives():
    bundle = build_monetary(u_star=4.0, lam=0.25)
    assert bundle.extras["target"] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(bundle.extras["theta_star"], [4.0 + 0.25 * 1.0, 0.25], atol=1e-12)
