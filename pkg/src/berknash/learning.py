"""Bayesian learning dynamics inside the objective game.

Each period: nature draws a state and signals, every player draws additive
payoff shocks, acts on the current posterior (myopically or following a
near-optimal policy), observes a consequence through the feedback map, and
updates the posterior.  Histories record everything needed to audit the run:
states, signals, shocks, actions, consequences, intended strategies (the
shock-averaged action law implied by the posterior), and belief summaries.

Beliefs come in two representations: a fixed grid of parameter atoms with
log-space weights (any model family), and a conjugate normal posterior in a
single slope coordinate (the closed-form recursion for intercept-known linear
outcomes with unit-variance noise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import PerturbationStructure
from .game import ObjectiveGame, StrategyProfile
from .subjective import (
    CategoricalModel,
    DiscreteBelief,
    GaussianMeanModel,
    MinimizerConfig,
    Model,
    minimizer_set,
    predictive,
)

__all__ = [
    "GridBelief",
    "ConjugateNormalBelief",
    "Policy",
    "SimulationHistory",
    "StabilityReport",
    "ImpossibleObservationError",
    "bayes_update",
    "conjugate_update",
    "policy_action",
    "epsilon_schedule",
    "payoff_bound",
    "simulate",
    "stability_report",
]

_LOG_FLOOR = -700.0


class ImpossibleObservationError(ValueError):
    """Every belief atom assigns zero likelihood to the observation."""


@dataclass(frozen=True)
class GridBelief:
    """Belief over fixed parameter atoms, weights kept in log space."""

    atoms: np.ndarray
    log_weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", np.atleast_2d(np.asarray(self.atoms, float)))
        lw = np.asarray(self.log_weights, float)
        object.__setattr__(self, "log_weights", lw)
        if self.atoms.shape[0] != lw.shape[0]:
            raise ValueError("atoms and log_weights length mismatch")

    @staticmethod
    def from_weights(atoms, weights) -> "GridBelief":
        w = np.asarray(weights, float)
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive mass")
        lw = np.full(w.shape, -np.inf)
        nz = w > 0
        lw[nz] = np.log(w[nz] / w.sum())
        return GridBelief(atoms, lw)

    @staticmethod
    def uniform(atoms) -> "GridBelief":
        atoms = np.atleast_2d(np.asarray(atoms, float))
        return GridBelief(atoms, np.full(len(atoms), -np.log(len(atoms))))

    @property
    def weights(self) -> np.ndarray:
        return _normalize_log(self.log_weights)

    def to_discrete(self) -> DiscreteBelief:
        return DiscreteBelief(self.atoms, self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms


def _normalize_log(lw: np.ndarray) -> np.ndarray:
    m = np.max(lw)
    if not np.isfinite(m):
        raise ImpossibleObservationError("belief has no finite-likelihood atom left")
    w = np.exp(np.maximum(lw - m, _LOG_FLOOR))
    w[lw - m < _LOG_FLOOR] = 0.0
    return w / w.sum()


@dataclass(frozen=True)
class ConjugateNormalBelief:
    """Normal posterior over a scalar slope; outcome = intercept - slope*x + N(0,1)."""

    mean: float
    tau2: float

    def __post_init__(self) -> None:
        if not self.tau2 > 0:
            raise ValueError("posterior variance must be positive")


def bayes_update(model: Model, belief: GridBelief, s: int, x: int, y) -> GridBelief:
    """One-step posterior update; ``y`` is a consequence index (categorical
    families) or a scalar outcome value (gaussian-mean families).

    Raises:
        ImpossibleObservationError: the observation has zero likelihood under
            every atom with positive prior mass.
    """
    ll = np.array(
        [
            model.log_likelihood(th, s, x, y) if np.isfinite(lw) else -np.inf
            for th, lw in zip(belief.atoms, belief.log_weights)
        ]
    )
    lw = belief.log_weights + ll
    m = np.max(lw)
    if not np.isfinite(m):
        raise ImpossibleObservationError(
            f"observation y={y!r} at cell ({s},{x}) has zero likelihood everywhere"
        )
    lw = lw - m
    lw[lw < _LOG_FLOOR] = -np.inf
    finite = np.isfinite(lw)
    logz = float(np.log(np.sum(np.exp(lw[finite]))))
    return GridBelief(belief.atoms, lw - logz)


def conjugate_update(
    belief: ConjugateNormalBelief, x_value: float, y_value: float, intercept: float
) -> ConjugateNormalBelief:
    """Closed-form normal update of the slope from one (x, y) observation."""
    if x_value == 0.0:
        raise ValueError("slope update undefined at x = 0")
    prec = 1.0 / belief.tau2
    gain = x_value**2 / (x_value**2 + prec)
    obs = -(y_value - intercept) / x_value
    mean = belief.mean + (obs - belief.mean) * gain
    return ConjugateNormalBelief(mean=mean, tau2=1.0 / (x_value**2 + prec))


@dataclass(frozen=True)
class Policy:
    """Per-period action rule.

    Kinds:
        ``myopic`` — maximize current-posterior expected payoff plus shocks.
        ``fixed`` — sample a fixed strategy, ignoring beliefs and shocks.
        ``near-optimal-target`` — play the target profile's shock response
            whenever the posterior's predictive descriptor is within
            epsilon_t / (2 C) of the target belief's, else act myopically.
            The epsilon schedule starts at 3C for ``plateau`` periods, then
            decays like coeff / sqrt(t - plateau); C bounds the payoff scale,
            which makes realized play epsilon_t-optimal by construction.
    """

    kind: str = "myopic"
    fixed_sigma: np.ndarray | None = None
    target_sigma: np.ndarray | None = None
    target_belief: DiscreteBelief | None = None
    payoff_bound: float = 1.0
    plateau: int = 100
    coeff: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("myopic", "fixed", "near-optimal-target"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "fixed" and self.fixed_sigma is None:
            raise ValueError("fixed policy needs fixed_sigma")
        if self.kind == "near-optimal-target" and (
            self.target_sigma is None or self.target_belief is None
        ):
            raise ValueError("near-optimal policy needs target_sigma and target_belief")


def epsilon_schedule(t: int, payoff_bound: float, plateau: int = 100, coeff: float = 1.0) -> float:
    """Slack allowed at period t: generous burn-in, then ~ 1/sqrt decay."""
    if t <= plateau:
        return 3.0 * payoff_bound
    return coeff / np.sqrt(t - plateau)


def payoff_bound(game: ObjectiveGame, player: str) -> float:
    """C = |Y| * sup|payoff|: Lipschitz bound of believed payoffs in the
    predictive descriptor, common to both model families here."""
    return game.n_consequences(player) * float(np.max(np.abs(game.payoff[player])))


def policy_action(
    policy: Policy,
    utilities: np.ndarray,
    target_utilities: np.ndarray | None,
    predictive_gap: float,
    s: int,
    xi: np.ndarray,
    t: int,
    u_fixed: float,
) -> int:
    """Action index for one period; pure function of the decision inputs.

    ``utilities`` is the posterior payoff row at the realized signal,
    ``target_utilities`` the row under the target belief (near-optimal kind),
    ``predictive_gap`` the sup distance between posterior and target
    predictive descriptors.
    """
    if policy.kind == "fixed":
        return int(np.searchsorted(np.cumsum(policy.fixed_sigma[s]), u_fixed, side="right"))
    if policy.kind == "near-optimal-target":
        eps = epsilon_schedule(t, policy.payoff_bound, policy.plateau, policy.coeff)
        if predictive_gap <= eps / (2.0 * policy.payoff_bound):
            return int(np.argmax(target_utilities + xi))
    return int(np.argmax(utilities + xi))


@dataclass
class SimulationHistory:
    """Complete record of one learning run."""

    seed: int
    horizon: int
    players: tuple[str, ...]
    state: np.ndarray
    signal: dict[str, np.ndarray]
    shocks: dict[str, np.ndarray]
    action: dict[str, np.ndarray]
    consequence: dict[str, np.ndarray]
    intended: dict[str, np.ndarray]
    belief_summary: dict[str, dict[str, np.ndarray]]
    events: list[tuple[int, str, str]] = field(default_factory=list)

    def action_frequency(self, player: str, window: int) -> np.ndarray:
        """Empirical action law over the trailing ``window`` periods, by signal."""
        n_s, n_x = self.intended[player].shape[1:]
        counts = np.zeros((n_s, n_x))
        lo = max(self.horizon - window, 0)
        np.add.at(
            counts, (self.signal[player][lo:], self.action[player][lo:]), 1.0
        )
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            freq = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), np.nan)
        return freq


class _ConjugateEngine:
    """Per-player belief engine for the conjugate-normal slope posterior."""

    def __init__(self, game, model: GaussianMeanModel, player, prior: ConjugateNormalBelief):
        if model.domain.dim != 1:
            raise ValueError("conjugate engine requires a one-dimensional parameter")
        self.model = model
        self.m = float(prior.mean)
        self.tau2 = float(prior.tau2)
        self.x_values = np.asarray(game.action_values[player], float)
        self.y_values = np.asarray(game.consequence_values[player], float)
        self.intercept = float(model.params.get("intercept", model.offset[0, 0, 0]))
        self.n_s, self.n_x = game.n_signals(player), game.n_actions(player)

    def utilities(self) -> np.ndarray:
        means = self.model.mean_table(np.array([self.m]))
        out = np.empty((self.n_s, self.n_x))
        for s in range(self.n_s):
            for x in range(self.n_x):
                out[s, x] = self.model.payoff_of_mean(s, x, means[s, x])
        return out

    def predictive_gap(self, target: DiscreteBelief) -> float:
        a = self.model.mean_table(np.array([self.m]))
        b = self.model.mean_table(target.mean())
        return float(np.max(np.abs(a - b)))

    def update(self, s: int, x: int, y: int) -> None:
        bel = conjugate_update(
            ConjugateNormalBelief(self.m, self.tau2),
            float(self.x_values[x]),
            float(self.y_values[y]),
            self.intercept,
        )
        self.m, self.tau2 = bel.mean, bel.tau2

    def summary_slots(self, horizon: int) -> dict[str, np.ndarray]:
        return {"mean": np.empty(horizon + 1), "tau2": np.empty(horizon + 1)}

    def record(self, slots: dict[str, np.ndarray], t: int) -> None:
        slots["mean"][t] = self.m
        slots["tau2"][t] = self.tau2


class _GridEngine:
    """Per-player belief engine over fixed atoms with precomputed tables."""

    def __init__(self, game, model: Model, player, prior: GridBelief):
        self.model = model
        self.atoms = prior.atoms
        self.logw = np.array(prior.log_weights, float)
        n_s, n_x = game.n_signals(player), game.n_actions(player)
        n_y = game.n_consequences(player)
        pay = game.payoff[player]
        self.u_atoms = np.empty((len(self.atoms), n_s, n_x))
        if isinstance(model, CategoricalModel):
            self.ll = np.empty((len(self.atoms), n_s, n_x, n_y))
            for k, th in enumerate(self.atoms):
                table = model.kernel_table(th)
                with np.errstate(divide="ignore"):
                    self.ll[k] = np.where(table > 0, np.log(np.where(table > 0, table, 1.0)), -np.inf)
                self.u_atoms[k] = np.einsum("sxy,xy->sx", table, pay)
            self.pred_atoms = np.array([model.kernel_table(th) for th in self.atoms])
        elif model.loglik is not None:
            # Non-scalar observables: evaluate likelihoods lazily per period.
            self.y_vals = np.asarray(game.consequence_values[player], float)
            self.ll = None
            for k, th in enumerate(self.atoms):
                means = model.mean_table(th)
                for s in range(n_s):
                    for x in range(n_x):
                        self.u_atoms[k, s, x] = model.payoff_of_mean(s, x, means[s, x])
            self.pred_atoms = np.array([model.mean_table(th) for th in self.atoms])
        else:
            y_vals = np.asarray(game.consequence_values[player], float)
            self.ll = np.empty((len(self.atoms), n_s, n_x, n_y))
            for k, th in enumerate(self.atoms):
                means = model.mean_table(th)
                for s in range(n_s):
                    for x in range(n_x):
                        self.ll[k, s, x] = -0.5 * ((y_vals - means[s, x, 0]) / model.scale[s, x, 0]) ** 2
                        self.u_atoms[k, s, x] = model.payoff_of_mean(s, x, means[s, x])
            self.pred_atoms = np.array([model.mean_table(th) for th in self.atoms])
        self._mode = int(np.argmax(self.logw))

    def weights(self) -> np.ndarray:
        return _normalize_log(self.logw)

    def utilities(self) -> np.ndarray:
        return np.tensordot(self.weights(), self.u_atoms, axes=1)

    def predictive_gap(self, target: DiscreteBelief) -> float:
        mine = np.tensordot(self.weights(), self.pred_atoms, axes=1)
        theirs = predictive(self.model, target)
        return float(np.max(np.abs(mine - theirs)))

    def update(self, s: int, x: int, y: int) -> str | None:
        if self.ll is None:
            step = np.array(
                [
                    self.model.log_likelihood(th, s, x, self.y_vals[y])
                    if np.isfinite(lw)
                    else -np.inf
                    for th, lw in zip(self.atoms, self.logw)
                ]
            )
            self.logw = self.logw + step
        else:
            self.logw = self.logw + self.ll[:, s, x, y]
        m = np.max(self.logw)
        if not np.isfinite(m):
            raise ImpossibleObservationError(
                f"observation at cell ({s},{x}) impossible under every atom"
            )
        self.logw -= m
        self.logw[self.logw < _LOG_FLOOR] = -np.inf
        mode = int(np.argmax(self.logw))
        flipped = mode != self._mode
        self._mode = mode
        return "posterior-mode-jump" if flipped else None

    def summary_slots(self, horizon: int) -> dict[str, np.ndarray]:
        return {
            "weights": np.empty((horizon + 1, len(self.atoms))),
            "atoms": self.atoms.copy(),
        }

    def record(self, slots: dict[str, np.ndarray], t: int) -> None:
        slots["weights"][t] = self.weights()


def simulate(
    game: ObjectiveGame,
    models: dict[str, Model],
    priors: dict,
    policies: dict[str, Policy],
    perturbation: PerturbationStructure,
    horizon: int,
    seed: int,
) -> SimulationHistory:
    """Runs the learning dynamics for ``horizon`` periods.

    Randomness is split into independent streams via seed-sequence spawning:
    one nature stream for the (state, signal) draws, one stream per player for
    payoff shocks and tie-breaking uniforms, so adding a player never shifts
    nature's draws.  Histories are bit-reproducible given (seed, horizon).
    """
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(1 + len(game.players))
    nature = np.random.default_rng(children[0])

    nz = np.argwhere(game.law > 0.0)
    probs = np.array([game.law[tuple(e)] for e in nz])
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    draws = np.searchsorted(cum, nature.random(horizon), side="right")

    engines: dict[str, _ConjugateEngine | _GridEngine] = {}
    shocks: dict[str, np.ndarray] = {}
    uniforms: dict[str, np.ndarray] = {}
    for k, p in enumerate(game.players):
        rng_p = np.random.default_rng(children[1 + k])
        n_x = game.n_actions(p)
        shocks[p] = perturbation.sample_shocks(rng_p, horizon, n_x)
        uniforms[p] = rng_p.random(horizon)
        prior = priors[p]
        if isinstance(prior, ConjugateNormalBelief):
            engines[p] = _ConjugateEngine(game, models[p], p, prior)
        else:
            engines[p] = _GridEngine(game, models[p], p, prior)

    state = np.empty(horizon, dtype=np.int32)
    signal = {p: np.empty(horizon, dtype=np.int32) for p in game.players}
    action = {p: np.empty(horizon, dtype=np.int32) for p in game.players}
    consequence = {p: np.empty(horizon, dtype=np.int32) for p in game.players}
    intended = {
        p: np.empty((horizon + 1, game.n_signals(p), game.n_actions(p)))
        for p in game.players
    }
    summary = {p: engines[p].summary_slots(horizon) for p in game.players}
    events: list[tuple[int, str, str]] = []

    target_u: dict[str, np.ndarray | None] = {}
    for p in game.players:
        pol = policies[p]
        if pol.kind == "near-optimal-target":
            from .equilibrium import belief_expected_payoff

            target_u[p] = belief_expected_payoff(game, models[p], pol.target_belief, p)
        else:
            target_u[p] = None

    player_index = {p: game.player_index(p) for p in game.players}
    fb = {p: game.feedback[p] for p in game.players}

    def intended_now(p: str, utilities: np.ndarray) -> np.ndarray:
        pol = policies[p]
        if pol.kind == "fixed":
            return np.array(pol.fixed_sigma, float)
        return np.array(
            [perturbation.perturbed_strategy(utilities[s]) for s in range(utilities.shape[0])]
        )

    for p in game.players:
        engines[p].record(summary[p], 0)

    for t in range(horizon):
        entry = nz[draws[t]]
        w = int(entry[0])
        state[t] = w
        utilities = {p: engines[p].utilities() for p in game.players}
        for p in game.players:
            pol = policies[p]
            if pol.kind == "near-optimal-target":
                gap = engines[p].predictive_gap(pol.target_belief)
                eps = epsilon_schedule(t + 1, pol.payoff_bound, pol.plateau, pol.coeff)
                if gap <= eps / (2.0 * pol.payoff_bound):
                    sigma_t = np.array(
                        [
                            perturbation.perturbed_strategy(target_u[p][s])
                            for s in range(target_u[p].shape[0])
                        ]
                    )
                else:
                    sigma_t = intended_now(p, utilities[p])
            else:
                gap = 0.0
                sigma_t = intended_now(p, utilities[p])
            intended[p][t] = sigma_t
            s_i = int(entry[1 + player_index[p]])
            signal[p][t] = s_i
            action[p][t] = policy_action(
                pol,
                utilities[p][s_i],
                None if target_u[p] is None else target_u[p][s_i],
                gap,
                s_i,
                shocks[p][t],
                t + 1,
                uniforms[p][t],
            )
        full = tuple(int(action[p][t]) for p in game.players)
        for p in game.players:
            y = int(fb[p][(w, *full)])
            consequence[p][t] = y
            s_i = int(signal[p][t])
            x_i = int(action[p][t])
            flag = engines[p].update(s_i, x_i, y)
            if isinstance(flag, str):
                events.append((t, p, flag))
            engines[p].record(summary[p], t + 1)

    for p in game.players:
        utilities = engines[p].utilities()
        intended[p][horizon] = intended_now(p, utilities)

    return SimulationHistory(
        seed=seed,
        horizon=horizon,
        players=game.players,
        state=state,
        signal=signal,
        shocks=shocks,
        action=action,
        consequence=consequence,
        intended=intended,
        belief_summary=summary,
        events=events,
    )


@dataclass(frozen=True)
class StabilityReport:
    """Aggregate evidence on convergence of play to a candidate strategy."""

    player: str
    n_histories: int
    freq_deviation: tuple[float, ...]
    fraction_freq_within: float
    intended_deviation: tuple[float, ...]
    posterior_mass_near_minimizers: tuple[float, ...]
    window: int
    freq_tol: float
    radius: float

    @property
    def stable_in_distribution(self) -> bool:
        return self.fraction_freq_within > 0.0


def stability_report(
    game: ObjectiveGame,
    model: Model,
    histories: list[SimulationHistory],
    player: str,
    candidate: np.ndarray,
    window: int | None = None,
    freq_tol: float = 0.01,
    radius: float = 0.05,
    minimizer_config: MinimizerConfig = MinimizerConfig(),
) -> StabilityReport:
    """Compares trailing play and posteriors against a candidate strategy.

    Frequency check: sup distance between the trailing-window empirical action
    law and the candidate, per history.  Posterior check: terminal belief mass
    within ``radius`` (sup-norm) of the divergence-minimizer set at the
    candidate.  Intended check: sup distance of the final intended strategy.
    """
    candidate = np.asarray(candidate, float)
    if window is None:
        window = max(histories[0].horizon // 2, 1)
    base = StrategyProfile.uniform(game)
    prof = base.with_player(player, candidate)
    ms = minimizer_set(game, model, prof, player, minimizer_config)

    freq_dev, intended_dev, masses = [], [], []
    for h in histories:
        freq = h.action_frequency(player, window)
        seen = ~np.isnan(freq[:, 0])
        freq_dev.append(float(np.max(np.abs(freq[seen] - candidate[seen]))))
        intended_dev.append(float(np.max(np.abs(h.intended[player][-1] - candidate))))
        summ = h.belief_summary[player]
        if "weights" in summ:
            masses.append(
                _grid_mass_near(summ["weights"][-1], summ["atoms"], ms.points, radius)
            )
        else:
            masses.append(
                _normal_mass_near(summ["mean"][-1], summ["tau2"][-1], ms.points, radius)
            )
    within = [d <= freq_tol for d in freq_dev]
    return StabilityReport(
        player=player,
        n_histories=len(histories),
        freq_deviation=tuple(freq_dev),
        fraction_freq_within=float(np.mean(within)) if within else 0.0,
        intended_deviation=tuple(intended_dev),
        posterior_mass_near_minimizers=tuple(masses),
        window=window,
        freq_tol=freq_tol,
        radius=radius,
    )


def _normal_mass_near(mean: float, tau2: float, points: np.ndarray, radius: float) -> float:
    from scipy.stats import norm

    sd = np.sqrt(tau2)
    best = 0.0
    for p in points:
        v = float(p[0])
        best = max(best, float(norm.cdf((v + radius - mean) / sd) - norm.cdf((v - radius - mean) / sd)))
    return best


def _grid_mass_near(
    weights: np.ndarray, atoms: np.ndarray, points: np.ndarray, radius: float
) -> float:
    near = np.zeros(len(atoms), dtype=bool)
    for p in points:
        near |= np.max(np.abs(atoms - p[None, :]), axis=1) <= radius
    return float(np.sum(weights[near]))
