"""Parameter domains for subjective models.

A domain is either a finite set of points or a product of blocks, where each
block is a box with finite bounds or a probability simplex.  Domains know how
to project arbitrary vectors onto themselves (used by the projected-gradient
minimizer search) and how to produce deterministic seed points for multi-start
optimization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "project_to_simplex",
    "BoxBlock",
    "SimplexBlock",
    "ProductDomain",
    "FiniteDomain",
    "box_domain",
    "simplex_domain",
]


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex.

    Standard sort-and-threshold algorithm; O(n log n).
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, n + 1) > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


@dataclass(frozen=True)
class BoxBlock:
    """Axis-aligned box with finite bounds."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite (compact domain)")
        if np.any(hi < lo):
            raise ValueError("box upper bound below lower bound")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def project(self, v: np.ndarray) -> np.ndarray:
        return np.clip(v, self.lower, self.upper)

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return bool(np.all(v >= lo - tol) and np.all(v <= hi + tol))

    def axis_grids(self, points_per_axis: int) -> list[np.ndarray]:
        return [
            np.linspace(lo, hi, points_per_axis) if hi > lo else np.array([lo])
            for lo, hi in zip(self.lower, self.upper)
        ]


@dataclass(frozen=True)
class SimplexBlock:
    """Probability simplex over ``size`` categories."""

    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("simplex needs at least one category")

    @property
    def dim(self) -> int:
        return self.size

    def project(self, v: np.ndarray) -> np.ndarray:
        return project_to_simplex(v)

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(v >= -tol) and abs(float(np.sum(v)) - 1.0) <= tol)

    def seed_points(self, interior: float = 0.05) -> list[np.ndarray]:
        # Barycenter plus slightly-interior vertices: keeps log-likelihoods finite.
        n = self.size
        pts = [np.full(n, 1.0 / n)]
        for k in range(n):
            p = np.full(n, interior / max(n - 1, 1))
            p[k] = 1.0 - interior if n > 1 else 1.0
            pts.append(p)
        return pts


Block = BoxBlock | SimplexBlock


@dataclass(frozen=True)
class ProductDomain:
    """Cartesian product of box and simplex blocks; the usual continuous domain."""

    blocks: tuple[Block, ...]

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def is_finite(self) -> bool:
        return False

    def _slices(self) -> list[slice]:
        out, k = [], 0
        for b in self.blocks:
            out.append(slice(k, k + b.dim))
            k += b.dim
        return out

    def project(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for b, sl in zip(self.blocks, self._slices()):
            out[sl] = b.project(v[sl])
        return out

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            return False
        return all(b.contains(v[sl], tol) for b, sl in zip(self.blocks, self._slices()))

    def seed_points(
        self,
        points_per_axis: int = 21,
        max_seeds: int = 600,
        n_random: int = 8,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Deterministic multi-start seeds: per-block grids, capped cartesian product.

        Box blocks contribute axis grids (thinned so the full mesh stays under
        ``max_seeds``); simplex blocks contribute barycenter + near-vertices.
        ``n_random`` extra interior points are drawn from ``rng`` when given.
        """
        per_block: list[list[np.ndarray]] = []
        n_axes = sum(b.dim for b in self.blocks if isinstance(b, BoxBlock))
        ppa = points_per_axis
        if n_axes > 0:
            while ppa > 2 and ppa**n_axes > max_seeds:
                ppa -= 1
            ppa = max(ppa, 2)
        for b in self.blocks:
            if isinstance(b, BoxBlock):
                mesh = [g for g in b.axis_grids(ppa)]
                per_block.append([np.asarray(p) for p in itertools.product(*mesh)])
            else:
                per_block.append(b.seed_points())
        combos = list(itertools.product(*per_block))
        seeds = np.array([np.concatenate(c) for c in combos])
        if len(seeds) > max_seeds:
            idx = np.linspace(0, len(seeds) - 1, max_seeds).astype(int)
            seeds = seeds[np.unique(idx)]
        if rng is not None and n_random > 0:
            extra = []
            for _ in range(n_random):
                parts = []
                for b in self.blocks:
                    if isinstance(b, BoxBlock):
                        lo, hi = np.asarray(b.lower), np.asarray(b.upper)
                        parts.append(lo + (hi - lo) * rng.random(b.dim))
                    else:
                        parts.append(rng.dirichlet(np.ones(b.size)))
                extra.append(np.concatenate(parts))
            seeds = np.vstack([seeds, np.array(extra)])
        return seeds


@dataclass(frozen=True)
class FiniteDomain:
    """Finite parameter set; minimization is exact enumeration."""

    points: tuple[tuple[float, ...], ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("finite domain needs at least one point")
        dims = {len(p) for p in self.points}
        if len(dims) != 1:
            raise ValueError("all points must share a dimension")
        if self.labels and len(self.labels) != len(self.points):
            raise ValueError("labels must match points")

    @property
    def dim(self) -> int:
        return len(self.points[0])

    @property
    def is_finite(self) -> bool:
        return True

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        arr = self.as_array()
        return bool(np.any(np.max(np.abs(arr - np.asarray(v)), axis=1) <= tol))


def box_domain(lower, upper) -> ProductDomain:
    """Convenience: a single-box domain."""
    return ProductDomain(blocks=(BoxBlock(tuple(lower), tuple(upper)),))


def simplex_domain(*sizes: int) -> ProductDomain:
    """Convenience: a product of probability simplices."""
    return ProductDomain(blocks=tuple(SimplexBlock(s) for s in sizes))
