"""Mean-field dynamics of the two-price learning problem.

With a conjugate normal posterior over the demand slope, the learning
recursion for (posterior mean m, scaled precision r) is a stochastic
approximation whose asymptotics follow the ODE  beta' = G(beta):

    G1 = F(z(m)) * (ph^2/r) * (b_hi - m) + (1 - F(z(m))) * (pl^2/r) * (b_lo - m)
    G2 = pl^2 + (ph^2 - pl^2) * F(z(m)) - r,

where z(m) = a*(ph - pl) - (ph^2 - pl^2)*m is the believed payoff gap between
the high and low price, F is the shock cdf with scale, and
b_hi = b0 - (a0 - a)/ph, b_lo = b0 - (a0 - a)/pl are the slopes that match the
true demand at each pure price.  G1 factors as H1(m)/r with H1 decreasing on
[b_lo, b_hi], so the steady state is unique; as the shock scale vanishes it
converges to (m*, sigma*) = (a/(ph+pl), interior mix).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr
from scipy.stats import qmc

__all__ = [
    "AppFConfig",
    "OdeState",
    "Trajectory",
    "LyapunovReport",
    "SweepRow",
    "drift",
    "h1",
    "steady_state",
    "integrate",
    "lyapunov_scan",
    "scale_sweep",
]


@dataclass(frozen=True)
class AppFConfig:
    """Two-price demand-learning configuration.

    ``intercept`` is the (dogmatically believed) demand intercept; the true
    demand is y = true_intercept - true_slope * price + standard normal noise.
    """

    intercept: float = 40.0
    true_intercept: float = 42.0
    true_slope: float = 4.0
    price_low: float = 2.0
    price_high: float = 10.0
    family: str = "logistic"
    scale: float = 0.05

    def __post_init__(self) -> None:
        if self.price_low == self.price_high or 0.0 in (self.price_low, self.price_high):
            raise ValueError("prices must be distinct and nonzero")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.family not in ("logistic", "normal"):
            raise ValueError(f"unknown shock family {self.family!r}")

    def cdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float) / self.scale
        return expit(z) if self.family == "logistic" else ndtr(z)

    def gap(self, m) -> np.ndarray:
        """Believed payoff gap of the high price over the low price."""
        a, pl, ph = self.intercept, self.price_low, self.price_high
        return a * (ph - pl) - (ph**2 - pl**2) * np.asarray(m, dtype=float)

    def high_price_probability(self, m) -> np.ndarray:
        return self.cdf(self.gap(m))

    @property
    def slope_low(self) -> float:
        """Slope matching true demand at the low price (lower bracket end)."""
        return self.true_slope - (self.true_intercept - self.intercept) / self.price_low

    @property
    def slope_high(self) -> float:
        """Slope matching true demand at the high price (upper bracket end)."""
        return self.true_slope - (self.true_intercept - self.intercept) / self.price_high

    @property
    def limit_mean(self) -> float:
        """Zero-scale limit of the steady-state posterior mean: a/(pl+ph)."""
        return self.intercept / (self.price_low + self.price_high)

    def precision_range(self) -> tuple[float, float]:
        lo = float(self._precision_at(self.slope_high))
        hi = float(self._precision_at(self.slope_low))
        return lo, hi

    def _precision_at(self, m) -> np.ndarray:
        pl2, ph2 = self.price_low**2, self.price_high**2
        return pl2 + (ph2 - pl2) * self.high_price_probability(m)


@dataclass(frozen=True)
class OdeState:
    m: float
    r: float

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise ValueError("precision-rate coordinate must be positive")


def h1(config: AppFConfig, m) -> np.ndarray:
    """Numerator of the mean drift: r * G1(m, r)."""
    a, a0, b0 = config.intercept, config.true_intercept, config.true_slope
    pl, ph = config.price_low, config.price_high
    f = config.high_price_probability(m)
    m = np.asarray(m, dtype=float)
    return f * ph * (-(a0 - a) + (b0 - m) * ph) + (1.0 - f) * pl * (-(a0 - a) + (b0 - m) * pl)


def drift(config: AppFConfig, beta: OdeState) -> tuple[float, float]:
    """ODE right-hand side G(beta) = (G1, G2).

    Raises:
        ValueError: via OdeState when r <= 0.
    """
    m, r = beta.m, beta.r
    g1 = float(h1(config, m)) / r
    g2 = float(config._precision_at(m)) - r
    return g1, g2


def steady_state(config: AppFConfig, tol: float = 1e-12, max_iter: int = 200) -> OdeState:
    """Unique rest point: bisection root of h1 on [slope_low, slope_high].

    Bisection runs to ``tol`` interval width (or float resolution), then the
    residual drift is verified against a slope-aware bound: near the root the
    attainable residual is ~ |dg1/dm| * bracket width, and the drift slope
    grows like 1/scale, so a flat threshold would spuriously reject small
    scales.

    Raises:
        ValueError: the bracket carries no sign change (invalid config), or
            the verified drift norm is out of tolerance.
    """
    lo, hi = config.slope_low, config.slope_high
    f_lo, f_hi = float(h1(config, lo)), float(h1(config, hi))
    width = 0.0
    if f_lo == 0.0:
        m_star = lo
    elif f_hi == 0.0:
        m_star = hi
    else:
        if np.sign(f_lo) == np.sign(f_hi):
            raise ValueError(
                f"no sign change of the mean drift on [{lo}, {hi}]: "
                f"h1 = ({f_lo:.3e}, {f_hi:.3e})"
            )
        a, b = lo, hi
        for _ in range(max_iter):
            mid = 0.5 * (a + b)
            if mid == a or mid == b or (b - a) < tol:
                break
            if np.sign(float(h1(config, mid))) == np.sign(f_lo):
                a = mid
            else:
                b = mid
        m_star = 0.5 * (a + b)
        width = b - a
    r_star = float(config._precision_at(m_star))
    state = OdeState(m=float(m_star), r=r_star)
    g1, g2 = drift(config, state)
    step = max(width, 64.0 * np.finfo(float).eps * max(1.0, abs(m_star)))
    slope = (float(h1(config, m_star + step)) - float(h1(config, m_star - step))) / (
        2.0 * step * r_star
    )
    bound = max(1e-9, 8.0 * abs(slope) * step)
    norm = max(abs(g1), abs(g2))
    if norm > bound:
        raise ValueError(f"steady-state drift norm {norm:.3e} exceeds {bound:.3e}")
    return state


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    m: np.ndarray
    r: np.ndarray
    sigma_high: np.ndarray
    aborted: bool = False

    def terminal(self) -> OdeState:
        return OdeState(m=float(self.m[-1]), r=float(self.r[-1]))


def integrate(
    config: AppFConfig,
    beta0: OdeState,
    t_end: float,
    dt: float = 0.002,
) -> Trajectory:
    """Fixed-step fourth-order Runge-Kutta path of the mean-field ODE.

    The drift stiffness grows like 1/scale (the mean drift's slope at the rest
    point is of order (ph^2-pl^2)^2/(4*scale*r)), so the default step targets
    scales >= 0.05; for smaller scales use steady_state directly or shrink dt.
    If the path leaves r > 0 the trajectory is truncated and flagged.

    Raises:
        ValueError: dt <= 0 or t_end < 0.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    n = int(np.ceil(t_end / dt))
    ts = np.empty(n + 1)
    ms = np.empty(n + 1)
    rs = np.empty(n + 1)
    ts[0], ms[0], rs[0] = 0.0, beta0.m, beta0.r
    aborted = False

    def rhs(m: float, r: float) -> tuple[float, float]:
        g1 = float(h1(config, m)) / r
        g2 = float(config._precision_at(m)) - r
        return g1, g2

    m, r = float(beta0.m), float(beta0.r)
    filled = 0
    for k in range(n):
        step = min(dt, t_end - k * dt)
        k1m, k1r = rhs(m, r)
        if r + 0.5 * step * k1r <= 0:
            aborted = True
            break
        k2m, k2r = rhs(m + 0.5 * step * k1m, r + 0.5 * step * k1r)
        if r + 0.5 * step * k2r <= 0:
            aborted = True
            break
        k3m, k3r = rhs(m + 0.5 * step * k2m, r + 0.5 * step * k2r)
        if r + step * k3r <= 0:
            aborted = True
            break
        k4m, k4r = rhs(m + step * k3m, r + step * k3r)
        m = m + step / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
        r = r + step / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        if r <= 0:
            aborted = True
            break
        filled = k + 1
        ts[filled] = (k + 1) * dt if (k + 1) < n else t_end
        ms[filled] = m
        rs[filled] = r
    end = filled + 1
    return Trajectory(
        t=ts[:end],
        m=ms[:end],
        r=rs[:end],
        sigma_high=np.asarray(config.high_price_probability(ms[:end])),
        aborted=aborted,
    )


@dataclass(frozen=True)
class LyapunovReport:
    """Quasi-random scan of dL/dt = 2 (beta - beta*)' P G(beta) over the box.

    ``violations`` counts samples with a nonnegative derivative away from the
    rest point.  ``axis_decoupled_max`` reports the companion quantity
    2 (m - m*) P11 G1(m, r*) + 2 (r - r*) P22 G2(m*, r), whose negativity
    follows from monotonicity of h1 and linearity of G2 in r; the raw
    directional derivative itself is not sign-definite on the whole box even
    though trajectories converge (the r-coordinate can transiently move away
    from r* while m approaches its root).
    """

    n_samples: int
    violations: int
    max_dldt: float
    worst_point: tuple[float, float]
    axis_decoupled_max: float
    axis_decoupled_violations: int
    weights: tuple[float, float]
    steady: OdeState


def lyapunov_scan(
    config: AppFConfig,
    n_samples: int = 1000,
    weights: tuple[float, float] = (1.0, 1.0),
) -> LyapunovReport:
    """Evaluates the quadratic-form derivative at Halton samples of the box.

    Raises:
        ValueError: non-positive diagonal weights.
    """
    p1, p2 = float(weights[0]), float(weights[1])
    if p1 <= 0 or p2 <= 0:
        raise ValueError("diagonal weights must be positive")
    star = steady_state(config)
    m_lo, m_hi = config.slope_low, config.slope_high
    r_lo, r_hi = config.precision_range()
    u = qmc.Halton(d=2, scramble=False).random(n_samples + 1)[1:]
    m = m_lo + u[:, 0] * (m_hi - m_lo)
    r = r_lo + u[:, 1] * (r_hi - r_lo)
    keep = ~((np.abs(m - star.m) < 1e-12) & (np.abs(r - star.r) < 1e-12))
    m, r = m[keep], r[keep]

    g1 = np.asarray(h1(config, m)) / r
    g2 = np.asarray(config._precision_at(m)) - r
    raw = 2.0 * ((m - star.m) * p1 * g1 + (r - star.r) * p2 * g2)

    g1_dec = np.asarray(h1(config, m)) / star.r
    g2_dec = float(config._precision_at(star.m)) - r
    dec = 2.0 * ((m - star.m) * p1 * g1_dec + (r - star.r) * p2 * g2_dec)

    worst = int(np.argmax(raw))
    return LyapunovReport(
        n_samples=int(len(m)),
        violations=int(np.sum(raw >= 0.0)),
        max_dldt=float(raw[worst]),
        worst_point=(float(m[worst]), float(r[worst])),
        axis_decoupled_max=float(np.max(dec)),
        axis_decoupled_violations=int(np.sum(dec >= 0.0)),
        weights=(p1, p2),
        steady=star,
    )


@dataclass(frozen=True)
class SweepRow:
    scale: float
    m_star: float
    sigma_star: float
    r_star: float


def scale_sweep(config: AppFConfig, scales: list[float]) -> tuple[list[SweepRow], bool]:
    """Steady states along a decreasing ladder of shock scales.

    Returns the per-scale rows and whether |m* - limit_mean| strictly
    decreases along the ladder (monotone convergence to the zero-scale limit).

    Raises:
        ValueError: scales not positive and strictly decreasing.
    """
    if any(s <= 0 for s in scales):
        raise ValueError("scales must be positive")
    if len(scales) > 1 and not all(b < a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    rows = []
    for s in scales:
        cfg = AppFConfig(
            intercept=config.intercept,
            true_intercept=config.true_intercept,
            true_slope=config.true_slope,
            price_low=config.price_low,
            price_high=config.price_high,
            family=config.family,
            scale=s,
        )
        st = steady_state(cfg)
        rows.append(
            SweepRow(
                scale=s,
                m_star=st.m,
                sigma_star=float(cfg.high_price_probability(st.m)),
                r_star=st.r,
            )
        )
    errs = [abs(row.m_star - config.limit_mean) for row in rows]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    return rows, monotone
