"""Worked environment families with closed-form oracles.

Each builder returns an ``ExampleBundle``: a finite objective game, subjective
models per player, optional analogy classes, and any known equilibria.  The
module also exposes the closed-form objects the bundles are tested against:
piecewise divergence minimizers, estimator formulas, cutoff responses, and
bilateral-trade payoff tables under several belief disciplines.

Conventions shared by the builders: standard normal noise is discretized by
Gauss-Hermite nodes (moment-exact up to order 2n-1) or by truncated symmetric
grids with normalized weights; signals and actions are ordered exactly as the
label tuples list them; all randomness-free tables are built deterministically
so documents round-trip bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .domains import BoxBlock, FiniteDomain, ProductDomain, SimplexBlock, box_domain
from .equilibrium import AnalogyStructure
from .game import ObjectiveGame, StrategyProfile
from .subjective import CategoricalModel, GaussianMeanModel, Model

__all__ = [
    "ExampleBundle",
    "build_monopoly",
    "monopoly_minimizer_oracle",
    "build_taxation",
    "tax_estimators",
    "tax_estimators_continuous",
    "InvalidScheduleError",
    "tax_fixed_points",
    "build_regression",
    "selection_estimates",
    "cutoff_response",
    "cutoff_fixed_point",
    "NoCutoffError",
    "build_monetary",
    "monetary_believed_response",
    "build_trading",
    "TradingInstance",
    "build_nonexistence",
    "build_coordination",
    "EXAMPLES",
    "build",
]


@dataclass(frozen=True)
class ExampleBundle:
    """A ready-to-run environment: game, models, and reference objects."""

    name: str
    game: ObjectiveGame
    models: dict[str, Model]
    analogy: AnalogyStructure | None = None
    known_equilibria: tuple[StrategyProfile, ...] = ()
    notes: str = ""
    extras: dict = field(default_factory=dict)


def _gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a standard normal (weights sum to 1)."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / w.sum()


def _truncated_normal_grid(lo: float, hi: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric grid with normalized standard-normal weights."""
    x = np.round(np.arange(lo, hi + step / 2, step), 10)
    w = norm.pdf(x)
    return x, w / w.sum()


# ---------------------------------------------------------------------------
# Two-price monopoly with misperceived demand slope


def build_monopoly(
    prices: tuple[float, float] = (2.0, 10.0),
    true_intercept: float = 42.0,
    true_slope: float = 4.0,
    intercept_range: tuple[float, float] = (33.0, 40.0),
    slope_range: tuple[float, float] = (3.0, 3.5),
    noise_nodes: int = 7,
) -> ExampleBundle:
    """Monopolist choosing between two prices under linear demand.

    True demand is y = 42 - 4 x + noise; the seller entertains intercepts up
    to 40 only, so the model is misspecified and the unique equilibrium mixes:
    the low price with probability 35/36, supported by the boundary belief
    (intercept 40, slope 10/3) that leaves both prices believed-equivalent.
    """
    nodes, weights = _gauss_hermite(noise_nodes)
    player = "monopolist"
    pl, ph = prices
    y_values = []
    fb = np.empty((noise_nodes, 2), dtype=np.int64)
    for k, eps in enumerate(nodes):
        for j, p in enumerate(prices):
            y_values.append(true_intercept - true_slope * p + eps)
    y_values = np.array(sorted(set(np.round(y_values, 12))))
    for k, eps in enumerate(nodes):
        for j, p in enumerate(prices):
            val = round(true_intercept - true_slope * p + eps, 12)
            fb[k, j] = int(np.argmin(np.abs(y_values - val)))
    pay = np.array([[p * y for y in y_values] for p in prices])
    game = ObjectiveGame(
        players=(player,),
        states=tuple(f"shock={v:+.6f}" for v in nodes),
        signals={player: ("s0",)},
        law=weights[:, None],
        actions={player: tuple(f"price={p:g}" for p in prices)},
        consequences={player: tuple(f"q={v:.6f}" for v in y_values)},
        feedback={player: fb},
        payoff={player: pay},
        action_values={player: np.array(prices)},
        consequence_values={player: y_values},
        name="monopoly",
    )
    domain = box_domain(
        (intercept_range[0], slope_range[0]), (intercept_range[1], slope_range[1])
    )
    true_mean = np.array([[[true_intercept - true_slope * pl], [true_intercept - true_slope * ph]]])
    coef = np.array([[[[1.0, -pl]], [[1.0, -ph]]]])
    model = GaussianMeanModel(
        domain=domain,
        true_mean=true_mean,
        offset=np.zeros((1, 2, 1)),
        coef=coef,
        weight=np.ones((1, 2, 1)),
        scale=np.ones((1, 2, 1)),
        payoff_of_mean=lambda s, x, mean: prices[x] * float(mean[0]),
        mean_lipschitz=max(prices),
        name="linear-demand",
        params={"prices": list(prices)},
    )
    sigma_low = 35.0 / 36.0
    eq = StrategyProfile({player: np.array([[sigma_low, 1.0 - sigma_low]])})
    slope_only_domain = box_domain((2.5,), (4.5,))
    slope_only = GaussianMeanModel(
        domain=slope_only_domain,
        true_mean=true_mean,
        offset=np.full((1, 2, 1), intercept_range[1]),
        coef=np.array([[[[-pl]], [[-ph]]]]),
        weight=np.ones((1, 2, 1)),
        scale=np.ones((1, 2, 1)),
        payoff_of_mean=lambda s, x, mean: prices[x] * float(mean[0]),
        mean_lipschitz=max(prices),
        name="linear-demand-slope-only",
        params={"prices": list(prices), "intercept": intercept_range[1]},
    )
    return ExampleBundle(
        name="monopoly",
        game=game,
        models={player: model},
        known_equilibria=(eq,),
        notes="misspecified intercept; unique mixed equilibrium (35/36, 1/36)",
        extras={"slope_only_model": slope_only, "player": player},
    )


def monopoly_minimizer_oracle(sigma_low: float) -> tuple[float, float]:
    """Closed-form divergence minimizer for the default monopoly bundle.

    ``sigma_low`` is the probability of the low price (2); the piecewise
    solution projects the least-squares fit onto the box [33,40] x [3,3.5]:

        sigma_low <= 3/4          -> (4*sigma_low + 37, 3.5)
        3/4 <= sigma_low <= 15/16 -> (40, 3.5)
        sigma_low >= 15/16        -> (40, (380 - 368*sigma_low)/(100 - 96*sigma_low))

    Raises:
        ValueError: at the pure strategies (0 or 1), where the minimizer is a
            segment rather than a point.
    """
    if sigma_low <= 0.0 or sigma_low >= 1.0:
        raise ValueError("pure strategies admit a continuum of minimizers")
    if sigma_low <= 0.75:
        return (4.0 * sigma_low + 37.0, 3.5)
    if sigma_low <= 15.0 / 16.0:
        return (40.0, 3.5)
    return (40.0, (380.0 - 368.0 * sigma_low) / (100.0 - 96.0 * sigma_low))


# ---------------------------------------------------------------------------
# Effort choice under a misperceived tax schedule


def _tax_design():
    rate = 0.1
    cost = 0.25
    x_grid = np.round(np.arange(1.1, 3.0 + 1e-9, 0.05), 10)
    w_grid, w_weights = _truncated_normal_grid(-1.0, 1.0, 0.02)
    return rate, cost, x_grid, w_grid, w_weights


def build_taxation() -> ExampleBundle:
    """Worker choosing effort under a quadratic tax believed to be linear.

    Output is z = x + W (W a symmetric truncated-normal grid, so z > 0); the
    actual tax is 0.1 z^2 and effort costs 0.25 x^2.  Two subjective models
    are bundled: a ratio model (tax = theta * z, fitted by the output-weighted
    average rate) and a linear model (tax = theta1 + theta2 * z, fitted by
    least squares).  The symmetric noise makes the linear model's slope equal
    the average marginal tax exactly, so its effort fixed point reproduces the
    true optimum; the ratio model biases effort upward.
    """
    rate, cost, x_grid, w_grid, w_weights = _tax_design()
    player = "worker"
    n_x, n_w = len(x_grid), len(w_grid)
    z = x_grid[None, :] + w_grid[:, None]  # (w, x)
    tax = rate * z**2
    fb = np.arange(n_w * n_x, dtype=np.int64).reshape(n_w, n_x)
    y_labels = tuple(f"z={z[k, j]:.4f}" for k in range(n_w) for j in range(n_x))
    pay = np.zeros((n_x, n_w * n_x))
    for k in range(n_w):
        for j in range(n_x):
            net = z[k, j] - tax[k, j] - cost * x_grid[j] ** 2
            pay[j, fb[k, j]] = net
    game = ObjectiveGame(
        players=(player,),
        states=tuple(f"w={v:+.2f}" for v in w_grid),
        signals={player: ("s0",)},
        law=w_weights[:, None],
        actions={player: tuple(f"x={v:.2f}" for v in x_grid)},
        consequences={player: y_labels},
        feedback={player: fb},
        payoff={player: pay},
        action_values={player: x_grid},
        name="taxation",
    )
    ratios = (tax / z).T[None, :, :]  # (1, x, w-components)
    model_ratio = GaussianMeanModel(
        domain=box_domain((-10.0,), (10.0,)),
        true_mean=ratios,
        offset=np.zeros_like(ratios),
        coef=np.ones((1, n_x, n_w, 1)),
        weight=np.broadcast_to(w_weights, (1, n_x, n_w)).copy(),
        scale=np.ones((1, n_x, n_w)),
        payoff_of_mean=_ratio_payoff(x_grid, w_grid, w_weights, cost),
        mean_lipschitz=float(np.max(np.abs(z))),
        name="tax-ratio",
    )
    levels = tax.T[None, :, :]
    coef_lin = np.empty((1, n_x, n_w, 2))
    coef_lin[..., 0] = 1.0
    coef_lin[..., 1] = z.T[None, :, :]
    model_linear = GaussianMeanModel(
        domain=box_domain((-10.0, -10.0), (10.0, 10.0)),
        true_mean=levels,
        offset=np.zeros_like(levels),
        coef=coef_lin,
        weight=np.broadcast_to(w_weights, (1, n_x, n_w)).copy(),
        scale=np.ones((1, n_x, n_w)),
        payoff_of_mean=_level_payoff(x_grid, w_grid, w_weights, cost),
        mean_lipschitz=1.0,
        name="tax-linear",
    )
    return ExampleBundle(
        name="taxation",
        game=game,
        models={player: model_ratio},
        notes="quadratic tax, linear belief; symmetric noise debiases the slope",
        extras={
            "model_ratio": model_ratio,
            "model_linear": model_linear,
            "player": player,
            "rate": rate,
            "cost": cost,
            "x_grid": x_grid,
        },
    )


def _ratio_payoff(x_grid, w_grid, w_weights, cost):
    z = x_grid[None, :] + w_grid[:, None]

    def payoff(s: int, x: int, mean: np.ndarray) -> float:
        zx = z[:, x]
        return float(np.sum(w_weights * (zx - mean * zx))) - cost * x_grid[x] ** 2

    return payoff


def _level_payoff(x_grid, w_grid, w_weights, cost):
    z = x_grid[None, :] + w_grid[:, None]

    def payoff(s: int, x: int, mean: np.ndarray) -> float:
        zx = z[:, x]
        return float(np.sum(w_weights * (zx - mean))) - cost * x_grid[x] ** 2

    return payoff


class InvalidScheduleError(ValueError):
    """The supplied tax schedule is not increasing on its domain."""


def tax_estimators(x: float) -> tuple[float, tuple[float, float]]:
    """Fitted parameters at a pure effort level on the bundled noise grid.

    Returns (ratio estimate E[tax/z], (intercept, slope) of the least-squares
    line).  With the symmetric noise grid and a quadratic tax, the slope is
    exactly the mean marginal rate 0.2 x and the ratio is exactly 0.1 x.
    """
    rate, _, _, w_grid, w_weights = _tax_design()
    z = x + w_grid
    tax = rate * z**2
    theta_ratio = float(np.sum(w_weights * tax / z))
    ez = float(np.sum(w_weights * z))
    var = float(np.sum(w_weights * (z - ez) ** 2))
    cov = float(np.sum(w_weights * (tax - np.sum(w_weights * tax)) * (z - ez)))
    slope = cov / var
    icept = float(np.sum(w_weights * tax)) - slope * ez
    return theta_ratio, (icept, slope)


def tax_estimators_continuous(
    x: float,
    schedule=None,
    truncation: float = 1.0,
    stein_tol: float = 1e-6,
) -> tuple[float, float]:
    """Quadrature version of the fitted parameters under truncated-normal noise.

    Integrates against the standard normal truncated to [-truncation,
    truncation].  Returns (ratio estimate, least-squares slope); the slope is
    also computed via the mean marginal rate E[schedule'(z)] and the two are
    required to agree within ``stein_tol`` (they coincide exactly for a
    quadratic schedule under symmetric noise).

    Raises:
        InvalidScheduleError: schedule is not increasing on the support.
    """
    from scipy.integrate import quad

    if schedule is None:
        schedule = lambda z: 0.1 * z**2
    a = truncation
    mass = norm.cdf(a) - norm.cdf(-a)
    dens = lambda w: norm.pdf(w) / mass
    probe = np.linspace(x - a, x + a, 257)
    vals = np.array([schedule(z) for z in probe])
    if np.any(np.diff(vals) <= 0):
        raise InvalidScheduleError("tax schedule must be strictly increasing")

    def mean(f):
        return quad(lambda w: f(x + w) * dens(w), -a, a, epsabs=1e-12, epsrel=1e-12)[0]

    theta_ratio = mean(lambda z: schedule(z) / z)
    ez = mean(lambda z: z)
    et = mean(schedule)
    var = mean(lambda z: (z - ez) ** 2)
    cov = mean(lambda z: (schedule(z) - et) * (z - ez))
    slope = cov / var
    h = 1e-6
    marginal = mean(lambda z: (schedule(z + h) - schedule(z - h)) / (2 * h))
    if abs(slope - marginal) > stein_tol:
        raise InvalidScheduleError(
            f"least-squares slope {slope:.9g} and mean marginal rate "
            f"{marginal:.9g} disagree beyond {stein_tol}"
        )
    return float(theta_ratio), float(slope)


def tax_fixed_points() -> dict[str, float]:
    """Continuous effort fixed points and the true optimum.

    Believed best response to a fitted linear tax (slope b) or ratio tax
    (rate a) is argmax x(1-b) - 0.25 x^2 = 2(1-b) and 2(1-a) respectively;
    fixed points solve effort = response(estimate at that effort).
    """
    rate, cost, _, w_grid, w_weights = _tax_design()

    def ratio_resid(x):
        return 2.0 * (1.0 - tax_estimators(x)[0]) - x

    def linear_resid(x):
        return 2.0 * (1.0 - tax_estimators(x)[1][1]) - x

    def opt_resid(x):
        z = x + w_grid
        marginal = float(np.sum(w_weights * 2 * rate * z))
        return 1.0 - marginal - 2 * cost * x

    # income z = x + W must stay positive: W lives on [-1, 1], so x > 1
    out = {}
    out["ratio"] = float(optimize.brentq(ratio_resid, 1.05, 2.95, xtol=1e-13))
    out["linear"] = float(optimize.brentq(linear_resid, 1.05, 2.95, xtol=1e-13))
    out["optimum"] = float(optimize.brentq(opt_resid, 1.05, 2.95, xtol=1e-13))
    return out


# ---------------------------------------------------------------------------
# Outcome evaluation with selection on a noisy score


class NoCutoffError(RuntimeError):
    """The cutoff response never crosses the diagonal: no finite fixed point."""


def selection_estimates(c: float) -> tuple[float, float]:
    """Group-mean estimates under selection at cutoff c.

    Scores W are standard normal; group one is selected when W <= c, group
    two otherwise; outcomes load on -W.  Naive group means are then
    theta_1(c) = pdf(c)/cdf(c) and theta_2(c) = -pdf(c)/(1-cdf(c)), evaluated
    in log space so extreme cutoffs neither overflow nor lose the tail.
    """
    log_pdf = norm.logpdf(c)
    theta_1 = float(np.exp(log_pdf - norm.logcdf(c)))
    theta_2 = -float(np.exp(log_pdf - norm.logsf(c)))
    return theta_1, theta_2


def cutoff_response(c: float, kappa: float) -> float:
    """Best-response cutoff to the selection-biased estimates at c."""
    t1, t2 = selection_estimates(c)
    return (t1 - t2) / kappa


def cutoff_fixed_point(
    kappa: float, lo: float = 1e-8, hi: float = 50.0, xtol: float = 1e-12
) -> float:
    """Fixed point of the cutoff response, when one exists.

    The residual response(c) - c decays like ((1-kappa) c + 1/c)/kappa for
    large c, so a finite crossing exists only for kappa > 1; below that the
    response stays above the diagonal everywhere.

    Raises:
        NoCutoffError: no sign change on [lo, hi]; the message reports the
            extremal residual so the failure is diagnosable.
    """
    f = lambda c: cutoff_response(c, kappa) - c
    grid = np.linspace(lo, hi, 512)
    vals = np.array([f(c) for c in grid])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if len(sign_change) == 0:
        extremal = vals[np.argmin(np.abs(vals))]
        raise NoCutoffError(
            f"cutoff response minus identity has no sign change on "
            f"[{lo}, {hi}] at kappa={kappa}: residual closest to zero is "
            f"{extremal:.6g} (asymptotically ~ ((1-kappa)c + 1/c)/kappa)"
        )
    k = sign_change[0]
    return float(optimize.brentq(f, grid[k], grid[k + 1], xtol=xtol))


def build_regression(
    signal_step: float = 0.05,
    noise_step: float = 0.2,
    span: float = 4.0,
) -> ExampleBundle:
    """Evaluator assigning one of two labels based on a noisy score.

    The score signal s equals the latent W (gridded); outcomes load on -W plus
    independent noise.  Fitting one mean per label while selecting label one
    on {W <= c} produces exactly the selection-biased estimates of
    ``selection_estimates``; the bundled model reproduces them at any cutoff
    strategy up to grid discretization.
    """
    player = "evaluator"
    s_vals, s_w = _truncated_normal_grid(-span, span, signal_step)
    e_vals, e_w = _truncated_normal_grid(-span, span, noise_step)
    n_s, n_e = len(s_vals), len(e_vals)
    o_step = signal_step
    o_lo = -2 * span
    o_vals = np.round(np.arange(o_lo, 2 * span + o_step / 2, o_step), 10)
    states = []
    law = np.zeros((n_s * n_e, n_s))
    fb = np.empty((n_s * n_e, 2), dtype=np.int64)
    for i, s in enumerate(s_vals):
        for k, e in enumerate(e_vals):
            idx = i * n_e + k
            states.append(f"(w={s:+.2f}, e={e:+.2f})")
            law[idx, i] = s_w[i] * e_w[k]
            o = -s + e
            fb[idx, :] = int(round((o - o_lo) / o_step))
    pay = np.zeros((2, len(o_vals)))
    pay[0] = o_vals
    game = ObjectiveGame(
        players=(player,),
        states=tuple(states),
        signals={player: tuple(f"s={v:+.2f}" for v in s_vals)},
        law=law,
        actions={player: ("one", "two")},
        consequences={player: tuple(f"o={v:+.2f}" for v in o_vals)},
        feedback={player: fb},
        payoff={player: pay},
        consequence_values={player: o_vals},
        name="selection",
    )
    true_mean = np.repeat((-s_vals)[:, None, None], 2, axis=1)
    coef = np.zeros((n_s, 2, 1, 2))
    coef[:, 0, 0, 0] = 1.0
    coef[:, 1, 0, 1] = 1.0
    model = GaussianMeanModel(
        domain=box_domain((-5.0, -5.0), (5.0, 5.0)),
        true_mean=true_mean,
        offset=np.zeros((n_s, 2, 1)),
        coef=coef,
        weight=np.ones((n_s, 2, 1)),
        scale=np.ones((n_s, 2, 1)),
        payoff_of_mean=lambda s, x, mean: float(mean[0]) if x == 0 else 0.0,
        mean_lipschitz=1.0,
        name="two-group-means",
    )

    def cutoff_strategy(c: float) -> StrategyProfile:
        table = np.zeros((n_s, 2))
        table[:, 0] = (s_vals <= c).astype(float)
        table[:, 1] = 1.0 - table[:, 0]
        return StrategyProfile({player: table})

    return ExampleBundle(
        name="regression",
        game=game,
        models={player: model},
        notes="selection-on-score estimation; cutoff response has no fixed point for kappa <= 1",
        extras={"cutoff_strategy": cutoff_strategy, "signal_values": s_vals, "player": player},
    )


# ---------------------------------------------------------------------------
# Inflation choice against anchored forecasts


def build_monetary(
    u_star: float = 5.0,
    lam: float = 0.5,
    grid_step: float = 0.05,
    grid_max: float = 5.0,
    forecast: float | None = None,
    u_nodes: int = 7,
    e_nodes: int = 3,
    e_scale: float = 0.5,
) -> ExampleBundle:
    """Authority choosing a policy level under a correctly specified model.

    The observable is the pair (e, U): realized level e = x + eps_e and
    outcome U = u_star - lam*(e - forecast) + eps_U.  The authority fits
    (theta1, theta2) in U = theta1 - theta2 * e.  Because e varies within
    every cell (Var eps_e > 0), both parameters are pinned by data from any
    single action, so the family is correctly specified and strongly
    identified everywhere: with the forecast at its consistent value
    lam*u_star, the unique equilibrium is the pure classical level
    x = lam*u_star against the exact-fit belief (u_star + lam*forecast, lam).

    The cell divergence has the exact two-component form
    0.5*((d1 - d2*x)^2 + (d2*e_scale)^2) / u_scale^2 with d = theta* - theta,
    expanding the e-average of the squared conditional-mean gap.
    """
    if forecast is None:
        forecast = lam * u_star
    player = "authority"
    x_grid = np.round(np.arange(0.0, grid_max + 1e-9, grid_step), 10)
    n_x = len(x_grid)
    d_e, w_e = _gauss_hermite(e_nodes)
    d_u, w_u = _gauss_hermite(u_nodes)
    d_e = d_e * e_scale
    u_mean = u_star - lam * (x_grid - forecast)  # conditional U mean at e = x

    # Consequence (j, a, b): e = x_j + d_e[a], U = mean_j - lam*d_e[a] + d_u[b].
    e_pair = np.empty((n_x * e_nodes * u_nodes, 2))
    labels = []
    for j in range(n_x):
        for a in range(e_nodes):
            e_val = x_grid[j] + d_e[a]
            for b in range(u_nodes):
                u_val = u_mean[j] - lam * d_e[a] + d_u[b]
                e_pair[(j * e_nodes + a) * u_nodes + b] = (e_val, u_val)
                labels.append(f"(e={e_val:+.6f}, U={u_val:+.6f})")
    fb = np.empty((e_nodes * u_nodes, n_x), dtype=np.int64)
    law = np.empty(e_nodes * u_nodes)
    for a in range(e_nodes):
        for b in range(u_nodes):
            law[a * u_nodes + b] = w_e[a] * w_u[b]
            fb[a * u_nodes + b] = (np.arange(n_x) * e_nodes + a) * u_nodes + b
    pay = -(e_pair[None, :, 1] ** 2 + e_pair[None, :, 0] ** 2) * np.ones((n_x, 1))
    game = ObjectiveGame(
        players=(player,),
        states=tuple(
            f"shocks=({d_e[a]:+.4f},{d_u[b]:+.4f})"
            for a in range(e_nodes)
            for b in range(u_nodes)
        ),
        signals={player: ("s0",)},
        law=law[:, None],
        actions={player: tuple(f"x={v:.2f}" for v in x_grid)},
        consequences={player: tuple(labels)},
        feedback={player: fb},
        payoff={player: pay},
        action_values={player: x_grid},
        consequence_values={player: e_pair},
        name="monetary",
    )
    true_mean = np.empty((1, n_x, 2))
    true_mean[0, :, 0] = u_mean
    true_mean[0, :, 1] = lam * e_scale
    coef = np.zeros((1, n_x, 2, 2))
    coef[0, :, 0, 0] = 1.0
    coef[0, :, 0, 1] = -x_grid
    coef[0, :, 1, 1] = e_scale

    def _loglik(theta, s, x, value):
        e_val, u_val = float(value[0]), float(value[1])
        resid = u_val - theta[0] + theta[1] * e_val
        return (
            -0.5 * ((e_val - x_grid[x]) / e_scale) ** 2
            - np.log(e_scale)
            - 0.5 * resid**2
            - np.log(2.0 * np.pi)
        )

    def _believed_payoff(s, x, mean):
        # E[-(U^2+e^2)]: mean[1] = theta2*e_scale carries the slope-variance.
        return -(
            float(mean[0]) ** 2
            + float(mean[1]) ** 2
            + x_grid[x] ** 2
            + 1.0
            + e_scale**2
        )

    model = GaussianMeanModel(
        domain=box_domain((0.0, 0.0), (10.0, 2.0)),
        true_mean=true_mean,
        offset=np.zeros((1, n_x, 2)),
        coef=coef,
        weight=np.ones((1, n_x, 2)),
        scale=np.ones((1, n_x, 2)),
        payoff_of_mean=_believed_payoff,
        mean_lipschitz=2.0 * (10.0 + 2.0 * e_scale),
        name="level-rule",
        params={"forecast": forecast, "u_star": u_star, "lam": lam, "e_scale": e_scale},
        loglik=_loglik,
    )
    target = lam * u_star
    j_star = int(np.argmin(np.abs(x_grid - target)))
    table = np.zeros((1, n_x))
    table[0, j_star] = 1.0
    eq = StrategyProfile({player: table})
    theta_star = np.array([u_star + lam * forecast, lam])
    return ExampleBundle(
        name="monetary",
        game=game,
        models={player: model},
        known_equilibria=(eq,),
        notes="correctly specified and strongly identified; consistent "
        "forecast pins x = lam*u_star",
        extras={
            "player": player,
            "x_grid": x_grid,
            "theta_star": theta_star,
            "target": target,
            "e_scale": e_scale,
        },
    )


def monetary_believed_response(theta1: float, theta2: float) -> float:
    """Optimal level under the fitted rule: argmax -( (t1 - t2 x)^2 + x^2 )."""
    return theta2 * theta1 / (1.0 + theta2**2)


# ---------------------------------------------------------------------------
# Bilateral trade under coarse beliefs


@dataclass(frozen=True)
class TradingInstance:
    """Joint ask/value environment with analogy classes over values.

    ``joint[a, v]`` is the probability the seller asks ``asks[a]`` while the
    value is ``values[v]``; a bid x trades exactly when the ask is at most x.
    ``classes`` partitions value indices for the analogy-based variants.
    """

    joint: np.ndarray = field(
        default_factory=lambda: np.array(
            [[0.15, 0.10, 0.05], [0.10, 0.15, 0.10], [0.05, 0.10, 0.20]]
        )
    )
    asks: tuple[float, ...] = (1.0, 2.0, 3.0)
    values: tuple[float, ...] = (0.0, 2.0, 4.0)
    classes: tuple[tuple[int, ...], ...] = ((0, 1), (2,))

    def __post_init__(self) -> None:
        j = np.asarray(self.joint, float)
        if j.shape != (len(self.asks), len(self.values)):
            raise ValueError("joint table shape mismatch")
        if abs(float(j.sum()) - 1.0) > 1e-12 or np.any(j < 0):
            raise ValueError("joint table must be a probability distribution")

    @property
    def ask_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def value_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def _trade_rows(self, x: float) -> np.ndarray:
        return np.asarray(self.asks) <= x + 1e-12

    def expected_value(self) -> float:
        return float(self.value_marginal @ np.asarray(self.values))

    def pi_rational(self, x: float) -> float:
        """True expected surplus of bidding x."""
        rows = self._trade_rows(x)
        m = self.joint[rows]
        vals = np.asarray(self.values)
        return float((m * (vals[None, :] - x)).sum())

    def pi_independent(self, x: float) -> float:
        """Believed surplus when asks and values are treated as independent."""
        rows = self._trade_rows(x)
        return float(self.ask_marginal[rows].sum() * (self.expected_value() - x))

    def pi_trade_conditioned(self, x: float, x_eq: float) -> float:
        """Believed surplus of x when values were estimated from trades at x_eq."""
        rows_eq = self._trade_rows(x_eq)
        m = self.joint[rows_eq]
        if m.sum() <= 0:
            raise ValueError("no trades at the anchoring bid; value belief undefined")
        ev = float((m.sum(axis=0) * np.asarray(self.values)).sum() / m.sum())
        rows = self._trade_rows(x)
        return float(self.ask_marginal[rows].sum() * (ev - x))

    def pi_classwise(self, x: float) -> float:
        """Believed surplus with class-conditional ask beliefs, correct values."""
        vals = np.asarray(self.values)
        rows = self._trade_rows(x)
        total = 0.0
        for cls in self.classes:
            p_cls = self.value_marginal[list(cls)].sum()
            p_trade = self.joint[np.ix_(rows, list(cls))].sum() / p_cls
            ev_cls = float(
                (self.value_marginal[list(cls)] * vals[list(cls)]).sum() / p_cls
            )
            total += p_cls * p_trade * (ev_cls - x)
        return float(total)

    def pi_classwise_trade_conditioned(self, x: float, x_eq: float) -> float:
        """Class-conditional ask beliefs plus trade-conditioned value beliefs."""
        vals = np.asarray(self.values)
        rows = self._trade_rows(x)
        rows_eq = self._trade_rows(x_eq)
        total = 0.0
        for cls in self.classes:
            p_cls = self.value_marginal[list(cls)].sum()
            p_trade = self.joint[np.ix_(rows, list(cls))].sum() / p_cls
            m = self.joint[np.ix_(rows_eq, list(cls))]
            if m.sum() <= 0:
                raise ValueError("no trades at the anchoring bid within a class")
            ev_cls = float((m.sum(axis=0) * vals[list(cls)]).sum() / m.sum())
            total += p_cls * p_trade * (ev_cls - x)
        return float(total)

    def equilibrium_bids(self, variant: str, bids: tuple[float, ...]) -> list[float]:
        """Pure bids that best-respond to the beliefs they generate."""
        out = []
        for x_eq in bids:
            if variant == "rational":
                table = {x: self.pi_rational(x) for x in bids}
            elif variant == "independent":
                table = {x: self.pi_independent(x) for x in bids}
            elif variant == "classwise":
                table = {x: self.pi_classwise(x) for x in bids}
            elif variant == "trade-conditioned":
                table = {x: self.pi_trade_conditioned(x, x_eq) for x in bids}
            elif variant == "classwise-trade-conditioned":
                table = {x: self.pi_classwise_trade_conditioned(x, x_eq) for x in bids}
            else:
                raise ValueError(f"unknown variant {variant!r}")
            best = max(table.values())
            if table[x_eq] >= best - 1e-12:
                out.append(x_eq)
        return out

    def fitted_value_given_trade(self, x_eq: float) -> np.ndarray:
        rows = self._trade_rows(x_eq)
        m = self.joint[rows]
        return m.sum(axis=0) / m.sum()

    def fitted_ask_given_class(self) -> list[np.ndarray]:
        return [
            self.joint[:, list(cls)].sum(axis=1) / self.value_marginal[list(cls)].sum()
            for cls in self.classes
        ]

    def fitted_classwise_values(self, x_eq: float) -> list[np.ndarray]:
        """Within-class trade-conditioned value beliefs, scaled by class mass."""
        rows = self._trade_rows(x_eq)
        out = []
        for cls in self.classes:
            m = self.joint[np.ix_(rows, list(cls))]
            out.append((m.sum(axis=0) / m.sum()) * self.value_marginal[list(cls)].sum())
        return out


def build_trading(variant: str = "independent") -> ExampleBundle:
    """Bilateral-trade bundle for one belief discipline.

    Variants: ``independent`` (full feedback, independence-restricted model),
    ``trade-conditioned`` (values observed only on trades), ``classwise``
    (full feedback, ask beliefs per value class), and
    ``classwise-trade-conditioned`` (both coarsenings).  Trade-conditioned
    variants restrict bids to those that can trade, avoiding the degenerate
    no-data corner.  The seller is mechanical: it quotes from the table's
    conditional ask distribution and earns a constant payoff.
    """
    inst = TradingInstance()
    buyer, seller = "buyer", "seller"
    values = np.asarray(inst.values)
    asks = np.asarray(inst.asks)
    n_v, n_a = len(values), len(asks)
    censored = variant in ("trade-conditioned", "classwise-trade-conditioned")
    bids = (1.0, 2.0, 3.0) if censored else (0.0, 1.0, 2.0, 3.0)
    n_x = len(bids)
    if censored:
        y_labels = [f"(a={a:g}, v={v:g})" for a in asks for v in values] + [
            f"(a={a:g}, no-trade)" for a in asks
        ]
    else:
        y_labels = [f"(a={a:g}, v={v:g})" for a in asks for v in values]
    fb_buyer = np.empty((n_v, n_x, n_a), dtype=np.int64)
    pay_buyer = np.zeros((n_x, len(y_labels)))
    for vi in range(n_v):
        for xi, bid in enumerate(bids):
            for ai in range(n_a):
                trade = asks[ai] <= bid + 1e-12
                if trade or not censored:
                    fb_buyer[vi, xi, ai] = ai * n_v + vi
                else:
                    fb_buyer[vi, xi, ai] = n_a * n_v + ai
                if trade:
                    pay_buyer[xi, ai * n_v + vi] = values[vi] - bid
    law = np.zeros((n_v, 1, n_v))
    for vi in range(n_v):
        law[vi, 0, vi] = inst.value_marginal[vi]
    game = ObjectiveGame(
        players=(buyer, seller),
        states=tuple(f"v={v:g}" for v in values),
        signals={buyer: ("s0",), seller: tuple(f"v={v:g}" for v in values)},
        law=law,
        actions={buyer: tuple(f"bid={b:g}" for b in bids), seller: tuple(f"ask={a:g}" for a in asks)},
        consequences={buyer: tuple(y_labels), seller: ("done",)},
        feedback={
            buyer: fb_buyer,
            seller: np.zeros((n_v, n_x, n_a), dtype=np.int64),
        },
        payoff={buyer: pay_buyer, seller: np.zeros((n_a, 1))},
        action_values={buyer: np.asarray(bids)},
        name=f"trading-{variant}",
    )
    ask_given_value = inst.joint / inst.value_marginal[None, :]
    seller_sigma = ask_given_value.T  # (signal=v, action=a)
    buyer_model = _trading_model(inst, variant, bids, len(y_labels), censored)
    seller_model = CategoricalModel(
        domain=FiniteDomain(points=((0.0,),)),
        kernel=lambda th, s, x: np.array([1.0]),
        shape=(n_v, n_a, 1),
        name="mechanical-seller",
    )
    eq_bid = 1.0
    table = np.zeros((1, n_x))
    table[0, bids.index(eq_bid)] = 1.0
    eq = StrategyProfile({buyer: table, seller: seller_sigma})
    analogy = AnalogyStructure(
        cells={
            buyer: tuple(tuple(c) for c in inst.classes),
            seller: tuple((i,) for i in range(n_v)),
        }
    )
    return ExampleBundle(
        name=f"trading-{variant}",
        game=game,
        models={buyer: buyer_model, seller: seller_model},
        analogy=analogy,
        known_equilibria=(eq,),
        notes="unique equilibrium bid 1 across belief disciplines",
        extras={"instance": inst, "bids": bids, "buyer": buyer, "seller": seller},
    )


def _trading_model(inst, variant, bids, n_y, censored):
    values = np.asarray(inst.values)
    asks = np.asarray(inst.asks)
    n_v, n_a = len(values), len(asks)
    n_x = len(bids)
    classes = inst.classes
    class_of = np.empty(n_v, dtype=int)
    for j, cls in enumerate(classes):
        for v in cls:
            class_of[v] = j

    if variant == "independent":
        domain = ProductDomain((SimplexBlock(n_a), SimplexBlock(n_v)))

        def kernel(theta, s, x):
            ta, tv = theta[:n_a], theta[n_a:]
            return np.outer(ta, tv).ravel()

    elif variant == "trade-conditioned":
        domain = ProductDomain((SimplexBlock(n_a), SimplexBlock(n_v)))

        def kernel(theta, s, x):
            ta, tv = theta[:n_a], theta[n_a:]
            out = np.zeros(n_y)
            for ai in range(n_a):
                if asks[ai] <= bids[x] + 1e-12:
                    out[ai * n_v : (ai + 1) * n_v] = ta[ai] * tv
                else:
                    out[n_a * n_v + ai] = ta[ai]
            return out

    elif variant == "classwise":
        domain = ProductDomain(
            tuple(SimplexBlock(n_a) for _ in classes) + (SimplexBlock(n_v),)
        )

        def kernel(theta, s, x):
            parts = [theta[j * n_a : (j + 1) * n_a] for j in range(len(classes))]
            tv = theta[len(classes) * n_a :]
            out = np.empty(n_y)
            for ai in range(n_a):
                for vi in range(n_v):
                    out[ai * n_v + vi] = parts[class_of[vi]][ai] * tv[vi]
            return out

    elif variant == "classwise-trade-conditioned":
        domain = ProductDomain(
            tuple(SimplexBlock(n_a) for _ in classes) + (SimplexBlock(n_v),)
        )

        def kernel(theta, s, x):
            parts = [theta[j * n_a : (j + 1) * n_a] for j in range(len(classes))]
            tv = theta[len(classes) * n_a :]
            out = np.zeros(n_y)
            for ai in range(n_a):
                no_trade = asks[ai] > bids[x] + 1e-12
                for vi in range(n_v):
                    mass = parts[class_of[vi]][ai] * tv[vi]
                    if no_trade:
                        out[n_a * n_v + ai] += mass
                    else:
                        out[ai * n_v + vi] = mass
            return out

    else:
        raise ValueError(f"unknown variant {variant!r}")
    return CategoricalModel(
        domain=domain,
        kernel=kernel,
        shape=(1, n_x, n_y),
        name=f"trading-{variant}",
        params={"variant": variant},
    )


# ---------------------------------------------------------------------------
# A two-parameter family with no equilibrium


def build_nonexistence() -> ExampleBundle:
    """Binary choice whose belief support flips against every candidate.

    Actions A and B produce a success with probability 1/4 and 3/4.  The model
    has two points: one matches B's rate but calls A a sure failure (and makes
    A look strictly best), the other matches A's rate (and makes B strictly
    best).  Any profile playing A with positive probability forces the
    A-matching parameter (the other has infinite divergence), whose best
    response is pure B; pure B selects the B-matching parameter, whose best
    response is A.  No profile verifies, at any mixing.
    """
    player = "agent"
    law = np.full((4, 1), 0.25)
    fb = np.zeros((4, 2), dtype=np.int64)
    fb[0, 0] = 1          # action A succeeds only in the first state
    fb[:3, 1] = 1         # action B succeeds in three of four states
    pay = np.array([[1.0, -3.0], [0.0, 1.0]])
    game = ObjectiveGame(
        players=(player,),
        states=("w1", "w2", "w3", "w4"),
        signals={player: ("s0",)},
        law=law,
        actions={player: ("A", "B")},
        consequences={player: ("fail", "success")},
        feedback={player: fb},
        payoff={player: pay},
        consequence_values={player: np.array([0.0, 1.0])},
        name="nonexistence",
    )
    domain = FiniteDomain(points=((0.0, 0.75), (0.25, 0.25)), labels=("optimist", "realist"))

    def kernel(theta, s, x):
        q = float(theta[x])
        return np.array([1.0 - q, q])

    model = CategoricalModel(
        domain=domain, kernel=kernel, shape=(1, 2, 2), name="two-point-success"
    )
    return ExampleBundle(
        name="nonexistence",
        game=game,
        models={player: model},
        notes="no equilibrium: belief support flips against every candidate",
        extras={"player": player},
    )


# ---------------------------------------------------------------------------
# Correctly specified coordination benchmark


def build_coordination() -> ExampleBundle:
    """2x2 coordination game with correctly specified beliefs.

    Each player's consequence is the opponent's action and the model is the
    full simplex over it, so equilibria coincide with the mixed Nash set:
    both-first, both-second, and the interior mix (2/5, 3/5).
    """
    players = ("row", "col")
    pay = {
        "row": np.array([[3.0, 0.0], [0.0, 2.0]]),
        "col": np.array([[3.0, 0.0], [0.0, 2.0]]),
    }
    fb = {
        "row": np.zeros((1, 2, 2), dtype=np.int64),
        "col": np.zeros((1, 2, 2), dtype=np.int64),
    }
    fb["row"][0, :, 0] = 0
    fb["row"][0, :, 1] = 1
    fb["col"][0, 0, :] = 0
    fb["col"][0, 1, :] = 1
    game = ObjectiveGame(
        players=players,
        states=("w",),
        signals={p: ("s0",) for p in players},
        law=np.ones((1, 1, 1)),
        actions={p: ("first", "second") for p in players},
        consequences={p: ("opp-first", "opp-second") for p in players},
        feedback=fb,
        payoff=pay,
        name="coordination",
    )
    domain = ProductDomain((SimplexBlock(2),))
    models = {
        p: CategoricalModel(
            domain=domain,
            kernel=lambda th, s, x: np.asarray(th, float),
            shape=(1, 2, 2),
            name="opponent-marginal",
        )
        for p in players
    }
    eqs = (
        StrategyProfile.pure(game, {"row": 0, "col": 0}),
        StrategyProfile.pure(game, {"row": 1, "col": 1}),
        StrategyProfile(
            {
                "row": np.array([[0.4, 0.6]]),
                "col": np.array([[0.4, 0.6]]),
            }
        ),
    )
    return ExampleBundle(
        name="coordination",
        game=game,
        models=models,
        known_equilibria=eqs,
        notes="correct specification: equilibria = Nash set",
    )


EXAMPLES = {
    "monopoly": build_monopoly,
    "taxation": build_taxation,
    "regression": build_regression,
    "monetary": build_monetary,
    "trading-independent": lambda: build_trading("independent"),
    "trading-trade-conditioned": lambda: build_trading("trade-conditioned"),
    "trading-classwise": lambda: build_trading("classwise"),
    "trading-classwise-trade-conditioned": lambda: build_trading(
        "classwise-trade-conditioned"
    ),
    "nonexistence": build_nonexistence,
    "coordination": build_coordination,
}


def build(name: str) -> ExampleBundle:
    """Instantiates a registered bundle by name.

    Raises:
        KeyError: unknown bundle name (message lists the registry).
    """
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; known: {sorted(EXAMPLES)}")
    return EXAMPLES[name]()
