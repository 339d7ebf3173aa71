"""Subjective models, weighted KL divergence, and its minimizer set.

A subjective model is a parametric family of conditional outcome
distributions Q_theta(y | s, x).  The fit of a parameter theta to the data
generated by a strategy profile is the weighted Kullback-Leibler divergence

    K(sigma, theta) = sum_{s,x} w(s,x) * KL( Q_sigma(.|s,x) || Q_theta(.|s,x) ),

with weights w(s,x) = sigma(x|s) * p(s): cells the player never visits carry
no weight.  Conventions: a true outcome with zero subjective density gives
K = +infinity; 0*ln 0 = 0.  Beliefs that survive learning concentrate on the
set of minimizers of K, so that set is the belief support used by the
equilibrium layer.

Two families are provided:

* ``CategoricalModel`` — arbitrary finite-outcome kernels, dense or callable.
* ``GaussianMeanModel`` — cell-wise normal outcomes with fixed variance and
  means affine in theta; K reduces to a weighted least-squares form
  sum w * (true_mean - model_mean)^2 / (2 scale^2), minimized in closed form
  by the search to high accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domains import BoxBlock, FiniteDomain, ProductDomain
from .game import ObjectiveGame, OutcomeDistribution, StrategyProfile, objective_distribution

__all__ = [
    "CategoricalModel",
    "GaussianMeanModel",
    "DiscreteBelief",
    "MinimizerConfig",
    "MinimizerSet",
    "SpecificationReport",
    "InfeasibleModelError",
    "wkld",
    "minimizer_set",
    "predictive",
    "predictive_distance",
    "diagnose",
    "validate_model",
]


class InfeasibleModelError(ValueError):
    """Every parameter assigns zero density to some outcome the data produces."""


@dataclass(frozen=True)
class CategoricalModel:
    """Finite-outcome subjective family.

    Attributes:
        domain: Parameter domain (finite points or box/simplex product).
        kernel: kernel(theta, s, x) -> probability vector over consequences.
        shape: (n_signals, n_actions, n_consequences) the kernel serves.
        name: Identifier used in documents and reports.
        params: Free-form constants the kernel closes over (serialized).
    """

    domain: FiniteDomain | ProductDomain
    kernel: Callable[[np.ndarray, int, int], np.ndarray]
    shape: tuple[int, int, int]
    name: str = "categorical"
    params: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return "categorical"

    def kernel_table(self, theta: np.ndarray) -> np.ndarray:
        """Dense (S, X, Y) table of Q_theta."""
        n_s, n_x, n_y = self.shape
        out = np.empty((n_s, n_x, n_y))
        for s in range(n_s):
            for x in range(n_x):
                out[s, x] = self.kernel(np.asarray(theta, float), s, x)
        return out

    def log_likelihood(self, theta: np.ndarray, s: int, x: int, y: int) -> float:
        q = float(self.kernel(np.asarray(theta, float), s, x)[y])
        return float(np.log(q)) if q > 0.0 else -np.inf


@dataclass(frozen=True)
class GaussianMeanModel:
    """Normal-outcome family with affine means and fixed dispersion.

    Each cell (s, x) observes a vector of components k (usually one) that is
    normal with standard deviation ``scale[s,x,k]``.  Model means are affine:
    mean_theta[s,x,k] = offset[s,x,k] + coef[s,x,k,:] @ theta.  The true data
    has component means ``true_mean`` and matching dispersion, so the cell
    divergence is 0.5 * sum_k weight[s,x,k]*((true_mean - mean_theta)/scale)^2.

    Attributes:
        payoff_of_mean: payoff_of_mean(s, x, mean_vector) -> believed expected
            payoff of action x at signal s when the outcome means are
            mean_vector; covers payoffs nonlinear in the outcome.
        mean_lipschitz: bound L with |payoff_of_mean(s,x,m) -
            payoff_of_mean(s,x,m')| <= L * max|m - m'| over the relevant range
            (used by near-optimal policies).
        loglik: optional loglik(theta, s, x, value) -> float giving the model
            log-density of an observed consequence value (scalar or vector);
            required when the divergence components are not the literal
            observable (e.g. a regressor observed alongside the outcome).
    """

    domain: ProductDomain
    true_mean: np.ndarray
    offset: np.ndarray
    coef: np.ndarray
    weight: np.ndarray
    scale: np.ndarray
    payoff_of_mean: Callable[[int, int, np.ndarray], float]
    mean_lipschitz: float = 1.0
    name: str = "gaussian-mean"
    params: dict = field(default_factory=dict)
    loglik: Callable[[np.ndarray, int, int, np.ndarray], float] | None = None

    @property
    def family(self) -> str:
        return "gaussian-mean"

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.true_mean.shape

    def mean_table(self, theta: np.ndarray) -> np.ndarray:
        """Model means, shape (S, X, K)."""
        return self.offset + self.coef @ np.asarray(theta, float)

    def log_likelihood(self, theta: np.ndarray, s: int, x: int, y_value) -> float:
        if self.loglik is not None:
            return float(self.loglik(np.asarray(theta, float), s, x, y_value))
        if self.true_mean.shape[2] != 1:
            raise ValueError("scalar-outcome likelihood needs a single component")
        m = float(self.mean_table(theta)[s, x, 0])
        sd = float(self.scale[s, x, 0])
        return -0.5 * ((float(y_value) - m) / sd) ** 2 - np.log(sd) - 0.5 * np.log(2.0 * np.pi)


Model = CategoricalModel | GaussianMeanModel


@dataclass(frozen=True)
class DiscreteBelief:
    """Finitely supported belief over parameters."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.atoms, float))
        w = np.asarray(self.weights, float)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)
        if a.shape[0] != w.shape[0]:
            raise ValueError("atoms and weights length mismatch")
        if np.any(w < -1e-12) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must form a probability vector")

    @staticmethod
    def point(theta) -> "DiscreteBelief":
        return DiscreteBelief(np.atleast_2d(np.asarray(theta, float)), np.array([1.0]))

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms


def _cell_weights(game: ObjectiveGame, profile: StrategyProfile, player: str) -> np.ndarray:
    """Occupation weights w(s, x) = sigma(x|s) p(s)."""
    p_s = game.signal_marginal(player)
    return p_s[:, None] * profile.table[player]


def _categorical_wkld_closure(
    q_table: np.ndarray, weights: np.ndarray, model: CategoricalModel
):
    """Value callable for the categorical divergence at a fixed profile.

    Per-cell supports and entropy terms are hoisted out of the evaluation loop
    so repeated calls (descent, finite differences) only pay for the kernel.
    """
    cells = []
    n_s, n_x = weights.shape
    for s in range(n_s):
        for x in range(n_x):
            w = float(weights[s, x])
            if w <= 0.0:
                continue
            q = q_table[s, x]
            nz = q > 0.0
            qnz = q[nz]
            cells.append((s, x, w, nz, qnz, float(np.sum(qnz * np.log(qnz)))))

    def value(theta: np.ndarray) -> float:
        total = 0.0
        for s, x, w, nz, qnz, ent in cells:
            kern = model.kernel(theta, s, x)[nz]
            if kern.min() <= 0.0:
                return np.inf
            total += w * (ent - float(qnz @ np.log(kern)))
        return total

    return value


def _categorical_wkld(
    q_table: np.ndarray, weights: np.ndarray, model: CategoricalModel, theta: np.ndarray
) -> float:
    return _categorical_wkld_closure(q_table, weights, model)(theta)


def _gaussian_wkld_closure(model: GaussianMeanModel, weights: np.ndarray):
    """Returns (value, gradient, hessian) for the quadratic divergence.

    The hessian is the constant matrix of the quadratic; it backs an exact
    projected-Newton polish after first-order descent.
    """
    mask = weights > 0.0
    w_cell = (weights[..., None] * model.weight / model.scale**2)[mask]  # (cells, K)
    resid0 = (model.true_mean - model.offset)[mask]                       # (cells, K)
    coef = model.coef[mask]                                               # (cells, K, D)
    wflat = w_cell.reshape(-1)
    rflat = resid0.reshape(-1)
    cflat = coef.reshape(-1, coef.shape[-1])
    hess = cflat.T @ (wflat[:, None] * cflat)

    def value(theta: np.ndarray) -> float:
        r = rflat - cflat @ theta
        return 0.5 * float(np.sum(wflat * r * r))

    def gradient(theta: np.ndarray) -> np.ndarray:
        r = rflat - cflat @ theta
        return -cflat.T @ (wflat * r)

    return value, gradient, hess


def _box_bounds(domain: ProductDomain) -> tuple[np.ndarray, np.ndarray] | None:
    if not isinstance(domain, ProductDomain):
        return None
    if not all(isinstance(b, BoxBlock) for b in domain.blocks):
        return None
    lo = np.concatenate([np.asarray(b.lower, float) for b in domain.blocks])
    hi = np.concatenate([np.asarray(b.upper, float) for b in domain.blocks])
    return lo, hi


def _newton_polish(f, grad, hess: np.ndarray, domain: ProductDomain, theta: np.ndarray):
    """Two-metric projected Newton for a convex quadratic on a box.

    First-order descent on ill-conditioned quadratics stalls far from the
    minimum, and naively projecting a full Newton step fails when the
    constrained minimum sits on a face (the projected step need not improve).
    Freezing the binding coordinates -- at a bound with the gradient pushing
    outward -- and taking damped Newton steps in the free block converges in
    a handful of iterations.  The regularized solve has no component along
    null(hessian), so minimizer continua stay parameterized by the start
    point instead of collapsing to one representative.
    """
    bounds = _box_bounds(domain)
    fv = f(theta)
    if bounds is None:
        reg = hess + 1e-12 * np.eye(hess.shape[0])
        for _ in range(40):
            step = np.linalg.solve(reg, grad(theta))
            for t in (1.0, 0.5):
                cand = domain.project(theta - t * step)
                fc = f(cand)
                if fc < fv - 1e-18:
                    theta, fv = cand, fc
                    break
            else:
                break
        return theta, fv
    lo, hi = bounds
    atol = 1e-12 * np.maximum(1.0, hi - lo)
    for _ in range(60):
        g = grad(theta)
        binding = ((theta <= lo + atol) & (g > 0)) | ((theta >= hi - atol) & (g < 0))
        free = np.nonzero(~binding)[0]
        if free.size == 0:
            break
        sub = hess[np.ix_(free, free)] + 1e-12 * np.eye(free.size)
        direction = np.zeros_like(theta)
        direction[free] = -np.linalg.solve(sub, g[free])
        t, improved = 1.0, False
        while t > 1e-20:
            cand = np.clip(theta + t * direction, lo, hi)
            fc = f(cand)
            if fc < fv - 1e-18:
                theta, fv, improved = cand, fc, True
                break
            t *= 0.5
        if not improved:
            break
    return theta, fv


def wkld(
    game: ObjectiveGame,
    model: Model,
    profile: StrategyProfile,
    theta,
    player: str,
) -> float:
    """Weighted KL divergence of theta against the data profile generates.

    Raises:
        ValueError: theta outside the model's parameter domain.
    """
    theta = np.asarray(theta, dtype=float)
    if not model.domain.contains(theta):
        raise ValueError("theta lies outside the parameter domain")
    weights = _cell_weights(game, profile, player)
    if isinstance(model, CategoricalModel):
        q = objective_distribution(game, profile, player).table
        return _categorical_wkld(q, weights, model, theta)
    return _gaussian_wkld_closure(model, weights)[0](theta)


@dataclass(frozen=True)
class MinimizerConfig:
    """Search tuning for the divergence-minimizer set."""

    grid_points: int = 21
    iterations: int = 200
    tol_k: float = 1e-9
    tol_grad: float = 1e-7
    cluster_radius: float = 1e-4
    max_seeds: int = 600
    n_random_seeds: int = 8
    seed: int = 0
    continuum_threshold: int = 6


@dataclass(frozen=True)
class MinimizerSet:
    """Cluster representatives of argmin K, with search diagnostics."""

    points: np.ndarray
    k_values: np.ndarray
    k_min: float
    continuum_suspected: bool
    method: str
    n_starts: int
    max_gradient_norm: float

    def __len__(self) -> int:
        return len(self.points)


def _fd_gradient(f, theta: np.ndarray, h: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(theta)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fp, fm = f(tp), f(tm)
        if np.isfinite(fp) and np.isfinite(fm):
            g[k] = (fp - fm) / (2 * h)
        elif np.isfinite(fp):
            g[k] = (fp - f(theta)) / h
        elif np.isfinite(fm):
            g[k] = (f(theta) - fm) / h
        else:
            g[k] = 0.0
    return g


def _projected_descent(f, grad, domain: ProductDomain, theta0, iterations, tol_grad):
    """Projected gradient with backtracking Armijo line search."""
    theta = domain.project(np.asarray(theta0, float))
    fv = f(theta)
    if not np.isfinite(fv):
        return theta, fv, np.inf
    step = 1.0
    for _ in range(iterations):
        g = grad(theta)
        gnorm = float(np.linalg.norm(theta - domain.project(theta - g)))
        if gnorm <= tol_grad:
            break
        step = min(step * 2.0, 1e6)
        improved = False
        while step > 1e-16:
            cand = domain.project(theta - step * g)
            fc = f(cand)
            decrease = float(np.dot(g, theta - cand))
            if np.isfinite(fc) and fc <= fv - 1e-4 * decrease and fc < fv + 1e-18:
                theta, fv, improved = cand, fc, True
                break
            step *= 0.5
        if not improved:
            break
    gnorm = float(np.linalg.norm(theta - domain.project(theta - grad(theta))))
    return theta, fv, gnorm


def _quadratic_descent(f, grad, hess, domain: ProductDomain, theta0, iterations, tol_grad):
    """Newton-first minimization for quadratic objectives on a box.

    Projected Newton reaches the minimum in a few steps where first-order
    descent needs thousands of iterations on ill-conditioned hessians.  A
    capped gradient pass runs only as a fallback when an active box face
    stalls the polish.
    """
    theta = domain.project(np.asarray(theta0, float))
    fv = f(theta)
    if not np.isfinite(fv):
        return theta, fv, np.inf
    theta, fv = _newton_polish(f, grad, hess, domain, theta)
    gnorm = float(np.linalg.norm(theta - domain.project(theta - grad(theta))))
    if gnorm > tol_grad:
        theta, fv, gnorm = _projected_descent(
            f, grad, domain, theta, min(iterations, 50), tol_grad
        )
        theta, fv = _newton_polish(f, grad, hess, domain, theta)
        gnorm = float(np.linalg.norm(theta - domain.project(theta - grad(theta))))
    return theta, fv, gnorm


def _cluster(points: np.ndarray, k_values: np.ndarray, radius: float):
    order = np.lexsort((*points.T[::-1], k_values))
    reps: list[int] = []
    for idx in order:
        if all(np.max(np.abs(points[idx] - points[r])) > radius for r in reps):
            reps.append(idx)
    reps_arr = np.array(reps, dtype=int)
    return points[reps_arr], k_values[reps_arr]


def minimizer_set(
    game: ObjectiveGame,
    model: Model,
    profile: StrategyProfile,
    player: str,
    config: MinimizerConfig = MinimizerConfig(),
) -> MinimizerSet:
    """Set of parameters minimizing the weighted KL divergence.

    Finite domains are enumerated exactly.  Continuous domains descend from a
    deterministic grid of seeds (plus a few seeded random interior points) --
    projected Newton when the objective is quadratic in the parameter, else
    projected gradient -- filter terminal points to within ``tol_k`` of the
    best value, and cluster them by sup-distance ``cluster_radius``.  A large
    number of surviving clusters flags a suspected continuum of minimizers.

    Raises:
        InfeasibleModelError: every candidate parameter has infinite
            divergence (model assigns zero density to observed data).
    """
    weights = _cell_weights(game, profile, player)
    hess = None
    if isinstance(model, CategoricalModel):
        q = objective_distribution(game, profile, player).table
        f = _categorical_wkld_closure(q, weights, model)
        grad = lambda th: _fd_gradient(f, th)
    else:
        f, grad, hess = _gaussian_wkld_closure(model, weights)

    if isinstance(model.domain, FiniteDomain):
        pts = model.domain.as_array()
        vals = np.array([f(p) for p in pts])
        k_min = float(np.min(vals))
        if not np.isfinite(k_min):
            raise InfeasibleModelError(
                "every parameter point has infinite divergence against the data"
            )
        keep = vals <= k_min + config.tol_k
        return MinimizerSet(
            points=pts[keep],
            k_values=vals[keep],
            k_min=k_min,
            continuum_suspected=False,
            method="enumeration",
            n_starts=len(pts),
            max_gradient_norm=0.0,
        )

    rng = np.random.default_rng(config.seed)
    seeds = model.domain.seed_points(
        points_per_axis=config.grid_points,
        max_seeds=config.max_seeds,
        n_random=config.n_random_seeds,
        rng=rng,
    )
    terminals, values, gnorms = [], [], []
    for s0 in seeds:
        if hess is not None:
            th, fv, gn = _quadratic_descent(
                f, grad, hess, model.domain, s0, config.iterations, config.tol_grad
            )
        else:
            th, fv, gn = _projected_descent(
                f, grad, model.domain, s0, config.iterations, config.tol_grad
            )
        if np.isfinite(fv):
            terminals.append(th)
            values.append(fv)
            gnorms.append(gn)
    if not terminals:
        raise InfeasibleModelError(
            "every descent start has infinite divergence against the data"
        )
    pts = np.array(terminals)
    vals = np.array(values)
    k_min = float(np.min(vals))
    keep = vals <= k_min + config.tol_k
    reps, rep_vals = _cluster(pts[keep], vals[keep], config.cluster_radius)
    return MinimizerSet(
        points=reps,
        k_values=rep_vals,
        k_min=k_min,
        continuum_suspected=len(reps) >= config.continuum_threshold,
        method="projected-gradient",
        n_starts=len(seeds),
        max_gradient_norm=float(np.max(np.array(gnorms)[keep])) if keep.any() else np.inf,
    )


def predictive(model: Model, belief: DiscreteBelief):
    """Belief-averaged predictive descriptor.

    Categorical models return the mixture kernel table (S, X, Y); gaussian-mean
    models return the belief-mean of the mean table (S, X, K) — their means are
    affine in theta, so the average characterizes the predictive distribution.
    """
    if isinstance(model, CategoricalModel):
        out = np.zeros(model.shape)
        for th, w in zip(belief.atoms, belief.weights):
            if w > 0.0:
                out += w * model.kernel_table(th)
        return out
    return model.mean_table(belief.mean())


def predictive_distance(model: Model, a: DiscreteBelief, b: DiscreteBelief) -> float:
    """Sup distance between the predictive descriptors of two beliefs."""
    return float(np.max(np.abs(predictive(model, a) - predictive(model, b))))


@dataclass(frozen=True)
class SpecificationReport:
    """Classification of a model against the data a profile generates."""

    correctly_specified: bool
    weakly_identified: bool
    strongly_identified: bool
    k_min: float
    n_minimizers: int
    continuum_suspected: bool


def diagnose(
    game: ObjectiveGame,
    model: Model,
    profile: StrategyProfile,
    player: str,
    config: MinimizerConfig = MinimizerConfig(),
    tol: float = 1e-8,
    k_tol: float = 1e-9,
) -> SpecificationReport:
    """Correct specification and identification flags at a profile.

    Correct specification: the minimized divergence is zero (within ``k_tol``),
    i.e. some parameter reproduces the objective conditional outcome
    distribution on every cell the profile visits — on every cell outright
    when the profile has full support.  Weak identification: all minimizers
    agree on visited cells (within ``tol``).  Strong identification: all
    minimizers agree on every cell.
    """
    ms = minimizer_set(game, model, profile, player, config)
    weights = _cell_weights(game, profile, player)
    on_path = weights > 0.0
    if isinstance(model, CategoricalModel):
        tables = [model.kernel_table(th) for th in ms.points]
    else:
        tables = [model.mean_table(th) for th in ms.points]
    correctly = ms.k_min <= k_tol
    weakly = all(
        float(np.max(np.abs((tables[i] - tables[0])[on_path]))) <= tol
        for i in range(1, len(tables))
    )
    strongly = all(
        float(np.max(np.abs(tables[i] - tables[0]))) <= tol for i in range(1, len(tables))
    )
    return SpecificationReport(
        correctly_specified=correctly,
        weakly_identified=weakly,
        strongly_identified=strongly,
        k_min=ms.k_min,
        n_minimizers=len(ms),
        continuum_suspected=ms.continuum_suspected,
    )


def validate_model(
    model: Model,
    n_probe: int = 32,
    seed: int = 0,
    norm_tol: float = 1e-10,
    lipschitz_cap: float = 1e6,
) -> list[str]:
    """Structural checks on a subjective model; returns a list of problems.

    Categorical kernels are probed for per-cell normalization and for a
    finite-difference continuity bound in theta at random interior points.
    Gaussian-mean models are checked for shape consistency and for positive
    scales and component weights (divergences of independent observation
    components add, so weights need not sum to one).
    """
    problems: list[str] = []
    if isinstance(model, GaussianMeanModel):
        s_shape = model.true_mean.shape
        if model.offset.shape != s_shape or model.weight.shape != s_shape:
            problems.append("mean/offset/weight shapes differ")
        if model.scale.shape != s_shape:
            problems.append("scale shape differs from mean shape")
        elif np.any(model.scale <= 0):
            problems.append("non-positive scale")
        if model.coef.shape[:3] != s_shape or model.coef.shape[3] != model.domain.dim:
            problems.append("coef shape inconsistent with domain dimension")
        if np.any(model.weight <= 0):
            problems.append("non-positive component weight")
        return problems

    rng = np.random.default_rng(seed)
    if isinstance(model.domain, FiniteDomain):
        thetas = model.domain.as_array()
        if len(thetas) > n_probe:
            thetas = thetas[rng.choice(len(thetas), n_probe, replace=False)]
    else:
        thetas = model.domain.seed_points(points_per_axis=3, n_random=n_probe, rng=rng)
    n_s, n_x, n_y = model.shape
    for th in thetas[: min(len(thetas), n_probe)]:
        for s in range(n_s):
            for x in range(n_x):
                k = model.kernel(np.asarray(th, float), s, x)
                if k.shape != (n_y,):
                    problems.append(f"kernel shape at cell ({s},{x})")
                    return problems
                if np.any(k < -norm_tol) or abs(float(k.sum()) - 1.0) > norm_tol:
                    problems.append(f"kernel not normalized at cell ({s},{x})")
                    return problems
    if not isinstance(model.domain, FiniteDomain):
        h = 1e-6
        for th in thetas[: min(len(thetas), 8)]:
            th = np.asarray(th, float)
            d = rng.standard_normal(th.size)
            d /= np.linalg.norm(d)
            th2 = model.domain.project(th + h * d)
            gap = float(np.max(np.abs(model.kernel_table(th2) - model.kernel_table(th))))
            denom = float(np.max(np.abs(th2 - th)))
            if denom > 0 and gap / denom > lipschitz_cap:
                problems.append("kernel fails the continuity probe in theta")
                break
    return problems
