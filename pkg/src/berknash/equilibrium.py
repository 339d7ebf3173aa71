"""Equilibrium verification and computation.

An equilibrium of the misspecified-learning kind is a strategy profile sigma
together with, for each player, a belief supported on the weighted-KL
minimizer set at sigma, such that every action sigma plays is optimal against
that belief.  ``verify_berk_nash`` checks a candidate profile by constructing
the best supporting belief weights (closed form in the scalar case, an exact
linear program in general).  ``solve`` searches for equilibria by following
perturbed best-response fixed points down a ladder of shock scales and
polishing the zero-scale limit, plus a coarse direct grid for small games.
Cross-checks relate the concept to Nash play, self-confirming play, and
analogy-based expectations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import expit, ndtr, ndtri
from scipy.stats import qmc

from .game import ObjectiveGame, StrategyProfile, objective_distribution
from .subjective import (
    DiscreteBelief,
    InfeasibleModelError,
    MinimizerConfig,
    Model,
    minimizer_set,
    wkld,
)
from .subjective import CategoricalModel, GaussianMeanModel

__all__ = [
    "PerturbationStructure",
    "VerifyConfig",
    "SolveConfig",
    "EquilibriumCertificate",
    "VerificationResult",
    "SolveResult",
    "AnalogyStructure",
    "CrossCheckReport",
    "belief_expected_payoff",
    "verify_berk_nash",
    "solve",
    "cross_check",
    "abee_perceived_payoffs",
]


# ---------------------------------------------------------------------------
# Payoff perturbations


@dataclass(frozen=True)
class PerturbationStructure:
    """Additive i.i.d. payoff shocks, one per action, with a named family.

    ``family`` is "logistic" or "normal"; ``scale`` multiplies the standard
    shape.  Two regimes are exposed and both are part of the contract:

    * two actions — the response is the closed form F((u2 - u1)/scale) with F
      the family cdf, i.e. a single net shock on the payoff gap;
    * three or more actions — i.i.d. shocks per action, integrated by
      quasi-random (Halton) inverse-cdf sampling.

    The two regimes are distinct models at n = 2 (a difference of two i.i.d.
    logistic shocks is not logistic); each is tested in its own regime.
    """

    family: str = "logistic"
    scale: float = 0.05
    n_mc: int = 4096

    def __post_init__(self) -> None:
        if self.family not in ("logistic", "normal"):
            raise ValueError(f"unknown shock family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def gap_cdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float) / self.scale
        return expit(z) if self.family == "logistic" else ndtr(z)

    def shock_ppf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.family == "logistic":
            return self.scale * (np.log(u) - np.log1p(-u))
        return self.scale * ndtri(u)

    def sample_shocks(self, rng: np.random.Generator, n: int, n_actions: int) -> np.ndarray:
        return self.shock_ppf(rng.random((n, n_actions)))

    def perturbed_strategy(self, utilities: np.ndarray) -> np.ndarray:
        """Probability each action maximizes utility + own shock."""
        u = np.asarray(utilities, dtype=float)
        n = u.size
        if n == 1:
            return np.array([1.0])
        if n == 2:
            hi = float(self.gap_cdf(u[1] - u[0]))
            return np.array([1.0 - hi, hi])
        winners = np.argmax(u[None, :] + self._shock_block(n), axis=1)
        return np.bincount(winners, minlength=n) / float(self.n_mc)

    def _shock_block(self, n_actions: int) -> np.ndarray:
        """Deterministic (n_mc, n_actions) shock matrix, cached per shape."""
        key = (self.family, self.scale, n_actions, self.n_mc)
        if key not in _SHOCK_CACHE:
            draws = qmc.Halton(d=n_actions, scramble=False).random(self.n_mc + 1)[1:]
            _SHOCK_CACHE[key] = self.shock_ppf(draws)
        return _SHOCK_CACHE[key]


_SHOCK_CACHE: dict[tuple[str, float, int, int], np.ndarray] = {}


# ---------------------------------------------------------------------------
# Belief payoffs and optimality


def belief_expected_payoff(
    game: ObjectiveGame, model: Model, belief: DiscreteBelief, player: str
) -> np.ndarray:
    """Expected payoff table U[s, x] under a belief over model parameters."""
    n_s, n_x = game.n_signals(player), game.n_actions(player)
    out = np.zeros((n_s, n_x))
    if isinstance(model, CategoricalModel):
        pay = game.payoff[player]
        for th, w in zip(belief.atoms, belief.weights):
            if w <= 0.0:
                continue
            out += w * np.einsum("sxy,xy->sx", model.kernel_table(th), pay)
        return out
    for th, w in zip(belief.atoms, belief.weights):
        if w <= 0.0:
            continue
        means = model.mean_table(th)
        for s in range(n_s):
            for x in range(n_x):
                out[s, x] += w * model.payoff_of_mean(s, x, means[s, x])
    return out


def _point_payoff_tables(game, model, points, player) -> np.ndarray:
    """U[r, s, x] for each candidate parameter point r."""
    return np.array(
        [
            belief_expected_payoff(game, model, DiscreteBelief.point(th), player)
            for th in points
        ]
    )


def _worst_violation(u_w: np.ndarray, support: np.ndarray) -> float:
    """Largest optimality shortfall of any supported action, signal-wise."""
    worst = -np.inf
    for s in range(u_w.shape[0]):
        if not support[s].any():
            continue
        best = float(np.max(u_w[s]))
        worst = max(worst, best - float(np.min(u_w[s][support[s]])))
    return worst if np.isfinite(worst) else 0.0


def _best_weights(u_tables: np.ndarray, support: np.ndarray) -> tuple[np.ndarray, float]:
    """Belief weights minimizing the worst optimality violation.

    One candidate parameter: trivial.  Two candidates, one signal, two
    actions: the violation is a max of affine functions of the single weight,
    minimized at a vertex or at the pairwise indifference crossing — solved in
    closed form.  Otherwise: exact linear program over the weight simplex
    (min t s.t. every supported action is within t of every alternative).
    """
    m, n_s, n_x = u_tables.shape
    if m == 1:
        return np.array([1.0]), _worst_violation(u_tables[0], support)
    if m == 2 and n_s == 1 and n_x == 2:
        candidates = [0.0, 1.0]
        d0 = u_tables[0, 0, 0] - u_tables[0, 0, 1]
        d1 = u_tables[1, 0, 0] - u_tables[1, 0, 1]
        if d0 != d1:
            w_ind = d1 / (d1 - d0)
            if 0.0 <= w_ind <= 1.0:
                candidates.append(float(w_ind))
        best_w, best_v = None, np.inf
        for w in candidates:
            u_w = w * u_tables[0] + (1 - w) * u_tables[1]
            v = _worst_violation(u_w, support)
            if v < best_v:
                best_w, best_v = w, v
        return np.array([best_w, 1 - best_w]), best_v
    rows = []
    for s in range(n_s):
        for x in range(n_x):
            if not support[s, x]:
                continue
            for x2 in range(n_x):
                if x2 == x:
                    continue
                rows.append(u_tables[:, s, x2] - u_tables[:, s, x])
    if not rows:
        return np.full(m, 1.0 / m), 0.0
    a_ub = np.hstack([np.array(rows), -np.ones((len(rows), 1))])
    res = optimize.linprog(
        c=np.append(np.zeros(m), 1.0),
        A_ub=a_ub,
        b_ub=np.zeros(len(rows)),
        A_eq=np.append(np.ones(m), 0.0)[None, :],
        b_eq=np.array([1.0]),
        bounds=[(0.0, 1.0)] * m + [(None, None)],
        method="highs",
    )
    if not res.success:  # pragma: no cover - LP on a simplex is always feasible
        raise RuntimeError(f"weight program failed: {res.message}")
    w = np.clip(res.x[:m], 0.0, None)
    w /= w.sum()
    return w, float(res.x[m])


def _matched_weights(
    u_tables: np.ndarray,
    sigma: np.ndarray,
    perturbation: PerturbationStructure,
) -> tuple[np.ndarray, float]:
    """Weights minimizing the sup gap between sigma and the perturbed response."""
    m = u_tables.shape[0]

    def gap(w: np.ndarray) -> float:
        u_w = np.tensordot(w, u_tables, axes=1)
        resp = np.array([perturbation.perturbed_strategy(u_w[s]) for s in range(u_w.shape[0])])
        return float(np.max(np.abs(resp - sigma)))

    if m == 1:
        return np.array([1.0]), gap(np.array([1.0]))
    res = optimize.minimize(
        lambda v: gap(np.clip(v, 0, None) / max(np.sum(np.clip(v, 0, None)), 1e-12)),
        np.full(m, 1.0 / m),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 800},
    )
    w = np.clip(res.x, 0, None)
    w /= max(w.sum(), 1e-12)
    return w, gap(w)


@dataclass(frozen=True)
class VerifyConfig:
    """Tolerances for equilibrium verification."""

    tol_opt: float = 1e-6
    tie_tol: float = 1e-9
    support_tol: float = 1e-9
    weight_floor: float = 1e-12
    minimizer: MinimizerConfig = field(default_factory=MinimizerConfig)
    scale: float = 0.0
    perturbation_family: str = "logistic"
    perturbed_tol: float = 1e-2
    n_mc: int = 4096


@dataclass(frozen=True)
class EquilibriumCertificate:
    """A verified equilibrium: profile, supporting beliefs, and gap evidence."""

    profile: StrategyProfile
    beliefs: dict[str, DiscreteBelief]
    k_min: dict[str, float]
    k_values: dict[str, np.ndarray]
    optimality_gaps: dict[str, np.ndarray]
    worst_violation: float
    scale: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VerificationResult:
    accepted: bool
    certificate: EquilibriumCertificate | None
    worst_violation: float
    witness: str
    continuum_flags: dict[str, bool]


def verify_berk_nash(
    game: ObjectiveGame,
    models: dict[str, Model],
    profile: StrategyProfile,
    config: VerifyConfig = VerifyConfig(),
    candidate_beliefs: dict[str, DiscreteBelief] | None = None,
) -> VerificationResult:
    """Checks whether a profile is an equilibrium of the misspecified game.

    For each player the divergence-minimizer set at the profile is computed,
    then belief weights over its representatives are chosen to minimize the
    worst optimality violation of the player's supported actions.  The profile
    is accepted when every player's violation is within ``tol_opt``.  With
    ``scale > 0`` the optimality requirement is replaced by closeness of the
    profile to the shock-perturbed best response (within ``perturbed_tol``).

    ``candidate_beliefs`` supplies explicit belief atoms for some players in
    place of the weight search; each atom must still attain the minimal
    divergence (within the minimizer tolerance).  This is how equilibria with
    a continuum of minimizers are certified: the caller names the supporting
    belief instead of hoping the sampled representatives include it.
    """
    profile.validate(game)
    beliefs: dict[str, DiscreteBelief] = {}
    k_min: dict[str, float] = {}
    k_values: dict[str, np.ndarray] = {}
    gaps: dict[str, np.ndarray] = {}
    continuum: dict[str, bool] = {}
    worst, witness = 0.0, ""
    perturbation = (
        PerturbationStructure(config.perturbation_family, config.scale, config.n_mc)
        if config.scale > 0
        else None
    )
    for player in game.players:
        ms = minimizer_set(game, models[player], profile, player, config.minimizer)
        continuum[player] = ms.continuum_suspected
        supplied = candidate_beliefs.get(player) if candidate_beliefs else None
        if supplied is not None:
            atom_k = np.array(
                [wkld(game, models[player], profile, th, player) for th in supplied.atoms]
            )
            floor = min(ms.k_min, float(atom_k.min()))
            if float(atom_k.max()) - floor > config.minimizer.tol_k:
                return VerificationResult(
                    accepted=False,
                    certificate=None,
                    worst_violation=float(atom_k.max()) - floor,
                    witness=f"{player}: supplied belief atom is not a divergence minimizer",
                    continuum_flags=continuum,
                )
            points, w = supplied.atoms, supplied.weights
            ms_k = atom_k
        else:
            points, ms_k = ms.points, ms.k_values
            w = None
        u_tables = _point_payoff_tables(game, models[player], points, player)
        sigma = profile.table[player]
        if perturbation is None:
            support = sigma > config.support_tol
            if w is None:
                w, violation = _best_weights(u_tables, support)
            else:
                u_w0 = np.tensordot(w, u_tables, axes=1)
                violation = _worst_violation(u_w0, support)
            u_w = np.tensordot(w, u_tables, axes=1)
            gap = u_w - np.max(u_w, axis=1, keepdims=True)
            threshold = config.tol_opt
        else:
            if w is None:
                w, violation = _matched_weights(u_tables, sigma, perturbation)
            u_w = np.tensordot(w, u_tables, axes=1)
            resp = np.array(
                [perturbation.perturbed_strategy(u_w[s]) for s in range(u_w.shape[0])]
            )
            gap = sigma - resp
            if supplied is not None:
                violation = float(np.max(np.abs(gap)))
            threshold = config.perturbed_tol
        keep = w > config.weight_floor
        beliefs[player] = DiscreteBelief(points[keep], w[keep] / w[keep].sum())
        k_min[player] = min(ms.k_min, float(ms_k.min()))
        k_values[player] = ms_k[keep]
        gaps[player] = gap
        if violation > worst:
            worst, witness = violation, player
        if violation > threshold:
            return VerificationResult(
                accepted=False,
                certificate=None,
                worst_violation=violation,
                witness=player,
                continuum_flags=continuum,
            )
    cert = EquilibriumCertificate(
        profile=profile,
        beliefs=beliefs,
        k_min=k_min,
        k_values=k_values,
        optimality_gaps=gaps,
        worst_violation=worst,
        scale=config.scale,
        diagnostics={"continuum_flags": continuum},
    )
    return VerificationResult(True, cert, worst, witness, continuum)


# ---------------------------------------------------------------------------
# Solver


@dataclass(frozen=True)
class SolveConfig:
    """Homotopy and polishing knobs for the equilibrium search."""

    scale_start: float = 0.05
    scale_stop: float = 1e-4
    scale_factor: float = 4.0
    damping: float = 0.5
    max_fp_iters: int = 80
    fp_tol: float = 1e-10
    support_tol: float = 1e-3
    dedupe_tol: float = 1e-4
    grid_step: float = 0.25
    n_random_starts: int = 4
    seed: int = 0
    perturbation_family: str = "logistic"
    n_mc: int = 4096
    verify: VerifyConfig = field(default_factory=VerifyConfig)


@dataclass(frozen=True)
class SolveResult:
    certificates: list[EquilibriumCertificate]
    diagnostics: dict


class _MinimizerTracker:
    """Warm-started divergence minimization along a homotopy path.

    The first evaluation searches from the full seed grid; later calls reuse
    the previous representatives (plus the domain barycenter) as starts, which
    is sound because the minimizer correspondence moves continuously along the
    path and is re-anchored from the full grid at every scale rung.
    """

    def __init__(self, game, model, player, config: MinimizerConfig):
        self.game, self.model, self.player = game, model, player
        self.config = config
        self.warm: np.ndarray | None = None

    def reset(self) -> None:
        self.warm = None

    def evaluate(self, profile: StrategyProfile):
        from .domains import FiniteDomain
        from .subjective import (
            MinimizerSet,
            _categorical_wkld_closure,
            _cell_weights,
            _cluster,
            _fd_gradient,
            _gaussian_wkld_closure,
            _projected_descent,
            _quadratic_descent,
        )

        if isinstance(self.model.domain, FiniteDomain) or self.warm is None:
            ms = minimizer_set(self.game, self.model, profile, self.player, self.config)
            if not isinstance(self.model.domain, FiniteDomain):
                self.warm = ms.points
            return ms
        weights = _cell_weights(self.game, profile, self.player)
        hess = None
        if isinstance(self.model, CategoricalModel):
            q = objective_distribution(self.game, profile, self.player).table
            f = _categorical_wkld_closure(q, weights, self.model)
            grad = lambda th: _fd_gradient(f, th)
        else:
            f, grad, hess = _gaussian_wkld_closure(self.model, weights)
        terminals, values = [], []
        for s0 in self.warm:
            if hess is not None:
                th, fv, _ = _quadratic_descent(
                    f, grad, hess, self.model.domain, s0,
                    self.config.iterations, self.config.tol_grad,
                )
            else:
                th, fv, _ = _projected_descent(
                    f, grad, self.model.domain, s0,
                    self.config.iterations, self.config.tol_grad,
                )
            if np.isfinite(fv):
                terminals.append(th)
                values.append(fv)
        if not terminals:
            # Stale warm points (e.g. on a simplex face that the current
            # profile makes infinitely divergent) -- cold restart is sound.
            self.warm = None
            return self.evaluate(profile)
        pts, vals = np.array(terminals), np.array(values)
        k_min = float(vals.min())
        keep = vals <= k_min + self.config.tol_k
        reps, rep_vals = _cluster(pts[keep], vals[keep], self.config.cluster_radius)
        self.warm = reps
        return MinimizerSet(
            points=reps,
            k_values=rep_vals,
            k_min=k_min,
            continuum_suspected=False,
            method="warm-start",
            n_starts=len(pts),
            max_gradient_norm=np.nan,
        )


def _free_coords(game: ObjectiveGame, support: dict[str, np.ndarray]):
    coords = []
    for p in game.players:
        for s in range(game.n_signals(p)):
            idx = np.nonzero(support[p][s])[0]
            coords.extend((p, s, int(x)) for x in idx[:-1])
    return coords


def _profile_from_free(game, support, coords, values, base: StrategyProfile):
    table = {p: np.array(base.table[p]) for p in game.players}
    for p in game.players:
        table[p][~support[p]] = 0.0
    for (p, s, x), v in zip(coords, values):
        table[p][s, x] = v
    for p in game.players:
        for s in range(game.n_signals(p)):
            idx = np.nonzero(support[p][s])[0]
            if len(idx) == 0:
                continue
            others = [x for x in idx[:-1]]
            rest = 1.0 - sum(table[p][s, x] for x in others)
            table[p][s, idx[-1]] = rest
            row = np.clip(table[p][s], 0.0, None)
            total = row.sum()
            table[p][s] = row / total if total > 0 else np.eye(len(row))[idx[0]]
    return StrategyProfile(table)


def _perturbed_response(
    game, models, trackers, profile, perturbation
) -> StrategyProfile:
    """One Jacobi step of the shock-perturbed best-response map.

    Beliefs are uniform over the current minimizer representatives; at the
    small scales the homotopy ends on, the minimizer is unique along the path
    for the games this solver targets, and the final answer is re-verified
    from scratch by verify_berk_nash.
    """
    new = {}
    for p in game.players:
        ms = trackers[p].evaluate(profile)
        u_tables = _point_payoff_tables(game, models[p], ms.points, p)
        u = u_tables.mean(axis=0)
        new[p] = np.array(
            [perturbation.perturbed_strategy(u[s]) for s in range(u.shape[0])]
        )
    return StrategyProfile(new)


def _violation_objective(game, models, verify_cfg):
    """Worst violation over players as a function of a candidate profile.

    Uses warm-started minimizer trackers so the tight evaluation loops inside
    polishing stay cheap; call ``.reset()`` when jumping to a distant profile.
    A locally-converged tracker can only understate the violation, and every
    accepted candidate is re-verified from the full seed grid afterwards.
    """
    trackers = {
        p: _MinimizerTracker(game, models[p], p, verify_cfg.minimizer)
        for p in game.players
    }

    def evaluate(profile: StrategyProfile) -> float:
        worst = 0.0
        for p in game.players:
            ms = trackers[p].evaluate(profile)
            u_tables = _point_payoff_tables(game, models[p], ms.points, p)
            support = profile.table[p] > verify_cfg.support_tol
            _, violation = _best_weights(u_tables, support)
            worst = max(worst, violation)
        return worst

    def reset() -> None:
        for t in trackers.values():
            t.reset()

    evaluate.reset = reset
    return evaluate


def _starts(game: ObjectiveGame, config: SolveConfig) -> list[StrategyProfile]:
    starts = [StrategyProfile.uniform(game)]
    pure_sets = [range(game.n_actions(p)) for p in game.players]
    combos = list(itertools.product(*pure_sets))
    if len(combos) > 16:
        combos = combos[:: max(1, len(combos) // 16)][:16]
    for combo in combos:
        starts.append(
            StrategyProfile.pure(game, {p: c for p, c in zip(game.players, combo)})
        )
    rng = np.random.default_rng(config.seed)
    for _ in range(config.n_random_starts):
        table = {}
        for p in game.players:
            table[p] = rng.dirichlet(
                np.ones(game.n_actions(p)), size=game.n_signals(p)
            )
        starts.append(StrategyProfile(table))
    return starts


def _grid_candidates(game: ObjectiveGame, step: float) -> list[StrategyProfile]:
    """Coarse simplex grids for small games, fed straight to verification."""
    per_player: list[list[np.ndarray]] = []
    for p in game.players:
        if game.n_signals(p) != 1:
            return []
        n = game.n_actions(p)
        if n > 3:
            per_player.append([np.eye(n)[k][None, :] for k in range(n)])
            continue
        ticks = np.arange(0.0, 1.0 + 1e-12, step)
        rows = []
        if n == 1:
            rows.append(np.array([[1.0]]))
        elif n == 2:
            for a in ticks:
                rows.append(np.array([[a, 1.0 - a]]))
        else:
            for a in ticks:
                for b in ticks:
                    if a + b <= 1.0 + 1e-12:
                        rows.append(np.array([[a, b, max(1.0 - a - b, 0.0)]]))
        per_player.append(rows)
    total = np.prod([len(r) for r in per_player])
    if total > 2000:
        return []
    out = []
    for combo in itertools.product(*per_player):
        out.append(StrategyProfile({p: c for p, c in zip(game.players, combo)}))
    return out


def solve(
    game: ObjectiveGame,
    models: dict[str, Model],
    config: SolveConfig = SolveConfig(),
) -> SolveResult:
    """Search for equilibria; every returned certificate re-passes verification.

    Two routes feed the verifier: (a) a homotopy that follows damped fixed
    points of the shock-perturbed response down a geometric scale ladder,
    extrapolates the last two rungs to scale zero, and polishes the limit by
    minimizing the worst optimality violation on the detected support; (b) a
    coarse direct grid over profiles for small games.  An empty certificate
    list with a populated diagnostics trace is the honest outcome when no
    candidate passes (existence can genuinely fail).
    """
    diagnostics: dict = {"homotopy": [], "grid": {"checked": 0, "accepted": 0}}
    certificates: list[EquilibriumCertificate] = []

    def try_accept(profile: StrategyProfile) -> bool:
        result = verify_berk_nash(game, models, profile, config.verify)
        if not result.accepted:
            return False
        for cert in certificates:
            if cert.profile.distance(result.certificate.profile) < config.dedupe_tol:
                return False
        certificates.append(result.certificate)
        return True

    scales = []
    s = config.scale_start
    while s >= config.scale_stop * (1 - 1e-12):
        scales.append(s)
        s /= config.scale_factor
    scales.append(scales[-1] / config.scale_factor)  # extra rung for extrapolation

    violation_of = _violation_objective(game, models, config.verify)

    for start in _starts(game, config):
        trackers = {
            p: _MinimizerTracker(game, models[p], p, config.verify.minimizer)
            for p in game.players
        }
        profile = start
        per_scale: list[StrategyProfile] = []
        trace = {"scales": [], "residuals": []}
        try:
            for scale in scales:
                perturbation = PerturbationStructure(
                    config.perturbation_family, scale, config.n_mc
                )
                for p in game.players:
                    trackers[p].reset()
                history: list[StrategyProfile] = []
                residual = np.inf
                for _ in range(config.max_fp_iters):
                    target = _perturbed_response(game, models, trackers, profile, perturbation)
                    new = StrategyProfile(
                        {
                            p: (1 - config.damping) * profile.table[p]
                            + config.damping * target.table[p]
                            for p in game.players
                        }
                    )
                    residual = new.distance(profile)
                    profile = new
                    history.append(profile)
                    if residual < config.fp_tol:
                        break
                if residual >= config.fp_tol and len(history) >= 8:
                    avg = {
                        p: np.mean([h.table[p] for h in history[-8:]], axis=0)
                        for p in game.players
                    }
                    profile = StrategyProfile(avg)
                profile = _root_polish(
                    game, models, trackers, profile, perturbation, config
                )
                per_scale.append(profile)
                trace["scales"].append(scale)
                trace["residuals"].append(residual)
        except InfeasibleModelError as exc:
            trace["error"] = str(exc)
            diagnostics["homotopy"].append(trace)
            continue
        diagnostics["homotopy"].append(trace)

        if len(per_scale) >= 2:
            coarse, fine = per_scale[-2], per_scale[-1]
            extrap = {}
            for p in game.players:
                t = fine.table[p] + (fine.table[p] - coarse.table[p]) / (
                    config.scale_factor - 1.0
                )
                t = np.clip(t, 0.0, None)
                t /= t.sum(axis=1, keepdims=True)
                extrap[p] = t
            candidate = StrategyProfile(extrap)
        else:
            candidate = per_scale[-1]
        violation_of.reset()
        candidate = _support_polish(game, candidate, violation_of, config)
        try_accept(candidate)

    # Interior equilibria can repel the best-response homotopy, so the grid
    # route polishes one representative per support pattern (the most interior
    # candidate) toward zero violation; the rest are verified as-is.
    grid_profiles = _grid_candidates(game, config.grid_step)
    pattern_rep: dict[tuple, tuple[float, StrategyProfile]] = {}
    for grid_profile in grid_profiles:
        support = {p: grid_profile.table[p] > config.support_tol for p in game.players}
        pattern = tuple(
            tuple(support[p].ravel().tolist()) for p in game.players
        )
        uniform_on = StrategyProfile(
            {
                p: support[p] / support[p].sum(axis=1, keepdims=True)
                for p in game.players
            }
        )
        d = grid_profile.distance(uniform_on)
        if pattern not in pattern_rep or d < pattern_rep[pattern][0]:
            pattern_rep[pattern] = (d, grid_profile)
    for grid_profile in grid_profiles:
        diagnostics["grid"]["checked"] += 1
        try:
            if try_accept(grid_profile):
                diagnostics["grid"]["accepted"] += 1
        except InfeasibleModelError:
            continue
    for _, (_, rep_profile) in sorted(pattern_rep.items()):
        try:
            violation_of.reset()
            candidate = _support_polish(game, rep_profile, violation_of, config)
            if try_accept(candidate):
                diagnostics["grid"]["accepted"] += 1
        except InfeasibleModelError:
            continue

    certificates.sort(
        key=lambda c: tuple(
            np.round(np.concatenate([c.profile.table[p].ravel() for p in game.players]), 12)
        )
    )
    return SolveResult(certificates=certificates, diagnostics=diagnostics)


def _root_polish(game, models, trackers, profile, perturbation, config: SolveConfig):
    """Newton/Brent refinement of the perturbed fixed point at one scale."""
    support = {p: np.ones_like(profile.table[p], dtype=bool) for p in game.players}
    coords = _free_coords(game, support)
    if not coords or len(coords) > 24:
        return profile

    def residual(vec: np.ndarray) -> np.ndarray:
        prof = _profile_from_free(game, support, coords, vec, profile)
        target = _perturbed_response(game, models, trackers, prof, perturbation)
        return np.array(
            [target.table[p][s, x] for (p, s, x) in coords]
        ) - np.asarray(vec)

    v0 = np.array([profile.table[p][s, x] for (p, s, x) in coords])
    if len(coords) == 1:
        f = lambda v: float(residual(np.array([v]))[0])
        lo, hi = 1e-12, 1.0 - 1e-12
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            root = lo
        elif fhi == 0.0:
            root = hi
        elif np.sign(flo) != np.sign(fhi):
            root = optimize.brentq(f, lo, hi, xtol=1e-13)
        else:
            return profile
        return _profile_from_free(game, support, coords, np.array([root]), profile)
    sol = optimize.root(residual, v0, method="hybr", options={"xtol": 1e-12})
    if sol.success and np.max(np.abs(residual(sol.x))) < np.max(np.abs(residual(v0))) + 1e-15:
        vec = np.clip(sol.x, 0.0, 1.0)
        return _profile_from_free(game, support, coords, vec, profile)
    return profile


def _support_polish(game, profile, violation_of, config: SolveConfig):
    """Zero-scale refinement: minimize worst violation on the detected support."""
    support = {p: profile.table[p] > config.support_tol for p in game.players}
    base = StrategyProfile(
        {
            p: np.where(support[p], profile.table[p], 0.0)
            / np.where(support[p], profile.table[p], 0.0).sum(axis=1, keepdims=True)
            for p in game.players
        }
    )
    coords = _free_coords(game, support)
    if not coords:
        return base
    v0 = np.array([base.table[p][s, x] for (p, s, x) in coords])

    def objective(vec: np.ndarray) -> float:
        prof = _profile_from_free(game, support, coords, np.clip(vec, 0.0, 1.0), base)
        return violation_of(prof)

    if objective(v0) <= config.verify.tol_opt:
        return _profile_from_free(game, support, coords, v0, base)
    if len(coords) == 1:
        res = optimize.minimize_scalar(
            lambda v: objective(np.array([v])),
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-11},
        )
        best = np.array([res.x])
    elif len(coords) <= 8:
        res = optimize.minimize(
            objective,
            v0,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 600},
        )
        best = res.x
    else:
        return base
    if objective(best) <= objective(v0):
        return _profile_from_free(game, support, coords, np.clip(best, 0.0, 1.0), base)
    return base


# ---------------------------------------------------------------------------
# Cross-checks


@dataclass(frozen=True)
class AnalogyStructure:
    """Per-player partition of states into analogy classes (state indices)."""

    cells: dict[str, tuple[tuple[int, ...], ...]]

    def cell_of(self, player: str, state: int) -> tuple[int, ...]:
        for cell in self.cells[player]:
            if state in cell:
                return cell
        raise KeyError(f"state {state} not covered by {player!r}'s analogy classes")


def abee_perceived_payoffs(
    game: ObjectiveGame,
    profile: StrategyProfile,
    player: str,
    analogy: AnalogyStructure,
) -> np.ndarray:
    """Payoffs V[s, x] under analogy-smoothed opponent behavior.

    Opponent play at a state is perceived as its class-conditional average:
    sigma_bar(x_others | w) = sum_{w' in cell(w)} P(w' | cell) *
    prod_j sigma_j(x_j | s_j(w')).  Each player's signal must be a
    deterministic function of the state.
    """
    i = game.player_index(player)
    others = [p for p in game.players if p != player]
    sig_maps = {p: game.signal_of_state(p) for p in game.players}
    p_state = game.law.sum(axis=tuple(range(1, game.law.ndim)))
    n_s, n_x = game.n_signals(player), game.n_actions(player)
    fb = game.feedback[player]
    pay = game.payoff[player]
    out = np.zeros((n_s, n_x))
    sig_weight = np.zeros(n_s)
    opp_idx = [game.player_index(p) for p in others]
    for w in range(len(game.states)):
        s_i = sig_maps[player][w]
        cell = analogy.cell_of(player, w)
        cell_mass = sum(p_state[v] for v in cell)
        for opp_profile in (
            itertools.product(*[range(game.n_actions(p)) for p in others]) if others else [()]
        ):
            perceived = 0.0
            for v in cell:
                prob = p_state[v] / cell_mass
                for k, p_other in enumerate(others):
                    prob *= profile.table[p_other][sig_maps[p_other][v], opp_profile[k]]
                perceived += prob
            if perceived == 0.0:
                continue
            full = [0] * len(game.players)
            for k, j in enumerate(opp_idx):
                full[j] = opp_profile[k]
            for x in range(n_x):
                full[i] = x
                y = fb[(w, *full)]
                out[s_i, x] += p_state[w] * perceived * pay[x, y]
        sig_weight[s_i] += p_state[w]
    out[sig_weight > 0] /= sig_weight[sig_weight > 0, None]
    return out


@dataclass(frozen=True)
class CrossCheckReport:
    mode: str
    passed: bool
    details: dict


def cross_check(
    game: ObjectiveGame,
    profile: StrategyProfile,
    mode: str,
    analogy: AnalogyStructure | None = None,
    tol: float = 1e-6,
    support_tol: float = 1e-9,
) -> CrossCheckReport:
    """Relates a profile to classical solution concepts.

    ``nash``: every supported action maximizes the true expected payoff.
    ``sce``: supported actions earn equal true payoffs and no unplayed action
    is forced above them even under the most pessimistic belief about its
    (unobserved) consequences.  ``abee``: supported actions maximize the
    analogy-smoothed payoffs of ``analogy``.
    """
    details: dict = {}
    passed = True
    for player in game.players:
        sigma = profile.table[player]
        support = sigma > support_tol
        if mode == "nash":
            dist = objective_distribution(game, profile, player)
            u = np.einsum("sxy,xy->sx", dist.table, game.payoff[player])
        elif mode == "abee":
            if analogy is None:
                raise ValueError("abee cross-check needs an AnalogyStructure")
            u = abee_perceived_payoffs(game, profile, player, analogy)
        elif mode == "sce":
            dist = objective_distribution(game, profile, player)
            u = np.einsum("sxy,xy->sx", dist.table, game.payoff[player])
            ok = True
            for s in range(u.shape[0]):
                if not support[s].any():
                    continue
                vals = u[s][support[s]]
                if float(vals.max() - vals.min()) > tol:
                    ok = False
                v_star = float(vals.max())
                for x in np.nonzero(~support[s])[0]:
                    if float(np.min(game.payoff[player][x])) > v_star + tol:
                        ok = False
            details[player] = {"payoffs": u, "ok": ok}
            passed = passed and ok
            continue
        else:
            raise ValueError(f"unknown cross-check mode {mode!r}")
        ok = True
        for s in range(u.shape[0]):
            if not support[s].any():
                continue
            best = float(np.max(u[s]))
            if float(best - np.min(u[s][support[s]])) > tol:
                ok = False
        details[player] = {"payoffs": u, "ok": ok}
        passed = passed and ok
    return CrossCheckReport(mode=mode, passed=passed, details=details)
