"""Weighted KL divergence, minimizer search, beliefs, diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berknash.domains import FiniteDomain, box_domain
from berknash.examples import monopoly_minimizer_oracle
from berknash.game import StrategyProfile
from berknash.subjective import (
    CategoricalModel,
    DiscreteBelief,
    GaussianMeanModel,
    InfeasibleModelError,
    MinimizerConfig,
    diagnose,
    minimizer_set,
    predictive,
    predictive_distance,
    validate_model,
    wkld,
)

from oracles import (
    box_qp_minimize,
    fixed_kernel_model,
    kl_divergence,
    outcome_rows,
    random_single_agent_game,
)

DUMMY_THETA = np.array([0.0])


def random_gaussian_instance(rng, n_actions=3, n_components=2, dim=2):
    """Random quadratic-divergence model over a random single-agent game."""
    game = random_single_agent_game(rng, n_states=2, n_actions=n_actions)
    lo = rng.uniform(-3.0, -0.5, size=dim)
    hi = rng.uniform(0.5, 3.0, size=dim)
    shape = (1, n_actions, n_components)
    model = GaussianMeanModel(
        domain=box_domain(lo, hi),
        true_mean=rng.normal(size=shape),
        offset=rng.normal(size=shape),
        coef=rng.normal(size=(*shape, dim)),
        weight=rng.uniform(0.5, 2.0, size=shape),
        scale=rng.uniform(0.5, 2.0, size=shape),
        payoff_of_mean=lambda s, x, mean: 0.0,
        mean_lipschitz=100.0,
        name="random-quadratic",
    )
    return game, model, (lo, hi)


def gaussian_quadratic_terms(game, model, profile, player):
    """(hess, lin, const) with wkld(theta) = 0.5 t'Ht + lin't + const."""
    weights, _ = outcome_rows(game, profile, player)
    w = (weights[..., None] * model.weight / model.scale**2)
    r = model.true_mean - model.offset
    c = model.coef
    wf = w.reshape(-1)
    rf = r.reshape(-1)
    cf = c.reshape(-1, c.shape[-1])
    hess = cf.T @ (wf[:, None] * cf)
    lin = -cf.T @ (wf * rf)
    const = 0.5 * float(np.sum(wf * rf * rf))
    return hess, lin, const


# ---------------------------------------------------------------------------
# wkld values and conventions


def test_categorical_wkld_matches_direct_kl_sum():
    rng = np.random.default_rng(3)
    game = random_single_agent_game(rng, n_states=4, n_actions=2, n_consequences=3)
    profile = StrategyProfile({"agent": np.array([[0.3, 0.7]])})
    weights, rows = outcome_rows(game, profile, "agent")
    table = np.stack([rng.dirichlet(np.ones(3)) for _ in range(2)])[None]
    model = fixed_kernel_model(table)
    oracle = sum(
        weights[s, x] * kl_divergence(rows[s, x], table[s, x])
        for s in range(1)
        for x in range(2)
    )
    got = wkld(game, model, profile, DUMMY_THETA, "agent")
    assert abs(got - oracle) < 1e-12


def test_wkld_zero_probability_consequence_contributes_nothing():
    """Cells the profile never reaches and model mass on unseen outcomes are free."""
    rng = np.random.default_rng(4)
    game = random_single_agent_game(rng, n_states=3, n_actions=2, n_consequences=3)
    profile = StrategyProfile({"agent": np.array([[1.0, 0.0]])})
    weights, rows = outcome_rows(game, profile, "agent")
    match = np.array(rows)
    match[:, 1] = rng.dirichlet(np.ones(3))  # unplayed action: arbitrary
    # Model may move mass *onto* consequences the truth never produces.
    free = np.array(match)
    row = np.array(rows[0, 0])
    zero = np.argmin(row)
    if row[zero] == 0.0:
        shift = np.zeros(3)
        shift[zero] = 0.5 * row.max()
        shift[np.argmax(row)] = -0.5 * row.max()
        free[0, 0] = row + shift
    k_match = wkld(game, fixed_kernel_model(match), profile, DUMMY_THETA, "agent")
    assert abs(k_match) < 1e-12
    k_free = wkld(game, fixed_kernel_model(free), profile, DUMMY_THETA, "agent")
    assert np.isfinite(k_free)


def test_wkld_infinite_when_support_is_missed():
    rng = np.random.default_rng(5)
    game = random_single_agent_game(rng, n_states=3, n_actions=2, n_consequences=2)
    profile = StrategyProfile({"agent": np.array([[0.5, 0.5]])})
    weights, rows = outcome_rows(game, profile, "agent")
    s, x = 0, int(np.argmax(weights[0]))
    y = int(np.argmax(rows[s, x]))
    table = np.array(rows)
    table[s, x, y] = 0.0
    table[s, x] /= table[s, x].sum()
    got = wkld(game, fixed_kernel_model(table), profile, DUMMY_THETA, "agent")
    assert got == np.inf


@settings(deadline=None, max_examples=60)
@given(st.integers(0, 10_000))
def test_wkld_nonnegative_and_zero_iff_match(seed):
    rng = np.random.default_rng(seed)
    n_y = int(rng.integers(2, 5))
    game = random_single_agent_game(
        rng, n_states=int(rng.integers(2, 5)), n_actions=2, n_consequences=n_y
    )
    sigma = rng.dirichlet(np.ones(2))
    profile = StrategyProfile({"agent": sigma[None, :]})
    weights, rows = outcome_rows(game, profile, "agent")
    table = np.stack([rng.dirichlet(np.ones(n_y)) + 1e-3 for _ in range(2)])[None]
    table /= table.sum(axis=-1, keepdims=True)
    k = wkld(game, fixed_kernel_model(table), profile, DUMMY_THETA, "agent")
    assert k >= -1e-15
    exact = wkld(game, fixed_kernel_model(rows), profile, DUMMY_THETA, "agent")
    assert abs(exact) < 1e-12
    mismatched = any(
        weights[s, x] > 1e-9 and np.max(np.abs(table[s, x] - rows[s, x])) > 1e-6
        for s in range(weights.shape[0])
        for x in range(weights.shape[1])
    )
    if mismatched:
        assert k > 1e-13


def test_gaussian_wkld_matches_hand_formula():
    rng = np.random.default_rng(6)
    game, model, (lo, hi) = random_gaussian_instance(rng)
    profile = StrategyProfile({"agent": rng.dirichlet(np.ones(3))[None, :]})
    hess, lin, const = gaussian_quadratic_terms(game, model, profile, "agent")
    for _ in range(5):
        th = lo + (hi - lo) * rng.random(2)
        direct = 0.5 * th @ hess @ th + lin @ th + const
        assert abs(wkld(game, model, profile, th, "agent") - direct) < 1e-10


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 10_000))
def test_gaussian_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    game, model, _ = random_gaussian_instance(rng)
    profile = StrategyProfile({"agent": rng.dirichlet(np.ones(3))[None, :]})
    from berknash.subjective import _cell_weights, _gaussian_wkld_closure

    weights = _cell_weights(game, profile, "agent")
    f, grad, _ = _gaussian_wkld_closure(model, weights)
    th = rng.normal(size=2)
    g = grad(th)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (f(th + e) - f(th - e)) / (2 * h)
        denom = max(1.0, abs(fd))
        assert abs(g[k] - fd) / denom < 1e-6


# ---------------------------------------------------------------------------
# minimizer_set


def test_finite_domain_enumeration_keeps_ties():
    rng = np.random.default_rng(7)
    game = random_single_agent_game(rng, n_states=2, n_actions=2, n_consequences=2)
    profile = StrategyProfile({"agent": np.array([[0.5, 0.5]])})
    _, rows = outcome_rows(game, profile, "agent")
    # Two identical atoms (both exact) and one bad atom.
    tbl = rows

    def kernel(th, s, x):
        if th[0] < 2.0:
            return tbl[s, x]
        return np.array([0.9, 0.1])

    model = CategoricalModel(
        domain=FiniteDomain(points=((0.0,), (1.0,), (5.0,))),
        kernel=kernel,
        shape=(1, 2, 2),
        name="tied-atoms",
    )
    ms = minimizer_set(game, model, profile, "agent")
    assert ms.method == "enumeration"
    assert len(ms.points) == 2
    assert abs(ms.k_min) < 1e-12
    np.testing.assert_allclose(sorted(p[0] for p in ms.points), [0.0, 1.0])


def test_finite_domain_infeasible_raises():
    for seed in range(32):  # first draw where both consequences are reachable
        rng = np.random.default_rng(seed)
        game = random_single_agent_game(rng, n_states=2, n_actions=1, n_consequences=2)
        profile = StrategyProfile({"agent": np.array([[1.0]])})
        _, rows = outcome_rows(game, profile, "agent")
        if np.min(rows[0, 0]) > 0.0:
            break
    assert np.min(rows[0, 0]) > 0.0
    model = CategoricalModel(
        domain=FiniteDomain(points=((0.0,), (1.0,))),
        kernel=lambda th, s, x: np.array([1.0, 0.0]),
        shape=(1, 1, 2),
        name="zero-likelihood",
    )
    with pytest.raises(InfeasibleModelError):
        minimizer_set(game, model, profile, "agent")


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 10_000))
def test_box_quadratic_minimizer_matches_active_set_oracle(seed):
    rng = np.random.default_rng(seed)
    game, model, (lo, hi) = random_gaussian_instance(rng)
    sigma = rng.dirichlet(np.ones(3))
    profile = StrategyProfile({"agent": sigma[None, :]})
    hess, lin, const = gaussian_quadratic_terms(game, model, profile, "agent")
    t_star, v_star = box_qp_minimize(hess, lin, lo, hi)
    ms = minimizer_set(game, model, profile, "agent")
    assert abs(ms.k_min - (v_star + const)) < 1e-8
    gap = float(np.min(np.max(np.abs(ms.points - t_star), axis=1)))
    if np.linalg.det(hess) > 1e-8:
        assert gap < 1e-6


def test_monopoly_minimizer_oracle_spot_checks(monopoly):
    for s_low in (0.125, 0.5, 35 / 36):
        profile = StrategyProfile({"monopolist": np.array([[s_low, 1 - s_low]])})
        ms = minimizer_set(monopoly.game, monopoly.models["monopolist"], profile, "monopolist")
        assert len(ms.points) == 1
        np.testing.assert_allclose(
            ms.points[0], monopoly_minimizer_oracle(s_low), atol=1e-8
        )


def test_monopoly_pure_high_price_flags_continuum(monopoly):
    profile = StrategyProfile({"monopolist": np.array([[0.0, 1.0]])})
    ms = minimizer_set(monopoly.game, monopoly.models["monopolist"], profile, "monopolist")
    assert ms.continuum_suspected
    assert len(ms.points) >= MinimizerConfig().continuum_threshold


# ---------------------------------------------------------------------------
# beliefs, predictives, diagnostics


def test_discrete_belief_point_and_mean():
    b = DiscreteBelief.point(np.array([1.0, 2.0]))
    np.testing.assert_allclose(b.mean(), [1.0, 2.0])
    two = DiscreteBelief(
        atoms=np.array([[0.0, 0.0], [2.0, 4.0]]), weights=np.array([0.25, 0.75])
    )
    np.testing.assert_allclose(two.mean(), [1.5, 3.0])


def test_categorical_predictive_is_mixture_of_kernels():
    rng = np.random.default_rng(9)
    tbl0 = np.stack([rng.dirichlet(np.ones(3)) for _ in range(2)])[None]
    tbl1 = np.stack([rng.dirichlet(np.ones(3)) for _ in range(2)])[None]

    def kernel(th, s, x):
        return tbl0[s, x] if th[0] == 0.0 else tbl1[s, x]

    model = CategoricalModel(
        domain=FiniteDomain(points=((0.0,), (1.0,))),
        kernel=kernel,
        shape=(1, 2, 3),
        name="two-atom",
    )
    belief = DiscreteBelief(
        atoms=np.array([[0.0], [1.0]]), weights=np.array([0.3, 0.7])
    )
    mix = predictive(model, belief)
    np.testing.assert_allclose(mix, 0.3 * tbl0 + 0.7 * tbl1, atol=1e-12)
    d = predictive_distance(model, belief, DiscreteBelief.point(np.array([0.0])))
    assert d > 0
    assert predictive_distance(model, belief, belief) < 1e-15


def test_diagnose_monopoly_misspecified_at_equilibrium(monopoly):
    profile = monopoly.known_equilibria[0]
    rep = diagnose(monopoly.game, monopoly.models["monopolist"], profile, "monopolist")
    assert not rep.correctly_specified
    assert rep.k_min > 0.1
    assert rep.n_minimizers == 1
    assert rep.weakly_identified and rep.strongly_identified


def test_diagnose_monopoly_pure_high_identification_split(monopoly):
    """Minimizer continuum: same prediction on path, different off path."""
    profile = StrategyProfile({"monopolist": np.array([[0.0, 1.0]])})
    rep = diagnose(monopoly.game, monopoly.models["monopolist"], profile, "monopolist")
    assert rep.continuum_suspected
    assert rep.weakly_identified
    assert not rep.strongly_identified


def test_diagnose_coordination_correctly_specified(coordination):
    profile = StrategyProfile(
        {"row": np.array([[0.4, 0.6]]), "col": np.array([[0.4, 0.6]])}
    )
    rep = diagnose(coordination.game, coordination.models["row"], profile, "row")
    assert rep.correctly_specified
    assert rep.k_min < 1e-10
    assert rep.strongly_identified


def test_diagnose_monetary_at_solution(monetary):
    x_grid = monetary.extras["x_grid"]
    j = int(np.argmin(np.abs(x_grid - monetary.extras["target"])))
    profile = StrategyProfile(
        {"authority": np.eye(len(x_grid))[j][None, :]}
    )
    rep = diagnose(monetary.game, monetary.models["authority"], profile, "authority")
    assert rep.correctly_specified
    assert rep.strongly_identified
    ms = minimizer_set(monetary.game, monetary.models["authority"], profile, "authority")
    np.testing.assert_allclose(ms.points[0], monetary.extras["theta_star"], atol=1e-8)


def test_validate_model_passes_examples_and_flags_defects(monopoly):
    assert validate_model(monopoly.models["monopolist"]) == []
    bad = CategoricalModel(
        domain=FiniteDomain(points=((0.0,),)),
        kernel=lambda th, s, x: np.array([0.9, 0.9]),
        shape=(1, 1, 2),
        name="unnormalized",
    )
    assert validate_model(bad) != []
    m = monopoly.models["monopolist"]
    import dataclasses

    shrunk = dataclasses.replace(m, scale=0.0 * m.scale)
    assert validate_model(shrunk) != []
