"""Metrics g^{α,β} on Σ × ℝ and a sampled sufficient test for global hyperbolicity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import AlphaNotPositive, BetaNotPositive
from .fields import OperatorField, ScalarField
from .geodesics import shoot_bvp, wrap_difference
from .metrics import FlatEuclidean, GAlphaBeta, MetricFamily, RoundSphereChart

GROWTH_FLAG = 1.5


@dataclass
class AlphaBetaPair:
    """α, β on Σ × ℝ together with g⁰ on Σ and the base point of d₀.

    ``distance`` may override the distance to the base point; by default the
    exact chart formula is used for flat and round charts and BVP shooting
    otherwise.
    """

    g0: MetricFamily
    alpha: OperatorField
    beta: ScalarField
    base_point: np.ndarray
    distance: Callable | None = None
    _d_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.base_point = np.atleast_1d(np.asarray(self.base_point, dtype=float))

    @property
    def sigma_dim(self) -> int:
        return self.g0.dim

    def point(self, x, s):
        return np.r_[np.atleast_1d(np.asarray(x, dtype=float)), float(s)]

    def describe(self):
        return {"g0": self.g0.describe(), "alpha": self.alpha.describe(),
                "beta": self.beta.describe(), "base_point": self.base_point.tolist()}


def d0(pair: AlphaBetaPair, x) -> float:
    """g⁰-distance from the base point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if pair.distance is not None:
        return float(pair.distance(x))
    g0 = pair.g0
    diff = wrap_difference(x - pair.base_point, g0.periods)
    if type(g0) is FlatEuclidean:
        return float(np.linalg.norm(diff))
    if type(g0) is RoundSphereChart:
        R = g0.params[0]
        (t1, p1), (t2, p2) = pair.base_point, x
        c = np.sin(t1) * np.sin(t2) * np.cos(p2 - p1) + np.cos(t1) * np.cos(t2)
        return float(R * np.arccos(np.clip(c, -1.0, 1.0)))
    key = tuple(np.round(x, 14))
    if key not in pair._d_cache:
        if np.linalg.norm(diff) == 0.0:
            pair._d_cache[key] = 0.0
        else:
            curve = shoot_bvp(g0, pair.base_point, pair.base_point + diff, diff, m=32)
            pair._d_cache[key] = float(np.sqrt(curve.energy))
    return pair._d_cache[key]


def _frame(pair, x):
    """Cholesky factor L of g⁰ at x (g⁰ = L Lᵀ)."""
    return np.linalg.cholesky(pair.g0.jet(np.atleast_1d(x), 0)[0])


def _symmetric_alpha(pair, x, s):
    L = _frame(pair, x)
    A = pair.alpha.jet(pair.point(x, s), 0)[0]
    S = L.T @ A @ np.linalg.inv(L.T)
    return 0.5 * (S + S.T)


def lambda_min_alpha(pair: AlphaBetaPair, x, s, check: bool = True) -> float:
    """Smallest eigenvalue of the g⁰-symmetric operator α at (x, s).

    With ``check`` the value is compared with ‖α⁻¹‖⁻¹ in the g⁰ operator norm.
    """
    S = _symmetric_alpha(pair, x, s)
    lam = float(np.linalg.eigvalsh(S)[0])
    if lam <= 0.0:
        raise AlphaNotPositive(f"α({np.atleast_1d(x).tolist()}, {s}) has eigenvalue {lam:.3e}")
    if check:
        alt = 1.0 / np.linalg.norm(np.linalg.inv(S), 2)
        if abs(alt - lam) > 1e-10 * max(1.0, lam):
            raise ArithmeticError(f"λ_min {lam!r} and ‖α⁻¹‖⁻¹ {alt!r} disagree")
    return lam


def _check_pair(pair, points):
    for p in points:
        x, s = p[:-1], p[-1]
        lambda_min_alpha(pair, x, s, check=False)
        b = pair.beta.value(pair.point(x, s))
        if not b > 0.0:
            raise BetaNotPositive(f"β({p.tolist()}) = {b:.3e}")


def build_galphabeta(pair: AlphaBetaPair, samples: int = 100, seed: int = 0) -> GAlphaBeta:
    """g((v, r), (w, r̄)) = g⁰(αv, w) − β r r̄, after checking α > 0 and β > 0 on a seeded sample."""
    metric = GAlphaBeta(pair.g0, pair.alpha, pair.beta)
    rng = np.random.default_rng(seed)
    lo, hi = np.array(metric.domain.lower), np.array(metric.domain.upper)
    lo, hi = np.maximum(lo, -10.0), np.minimum(hi, 10.0)
    _check_pair(pair, rng.uniform(lo, hi, size=(samples, metric.dim)))
    return metric


class StripRow(NamedTuple):
    n: int
    sup_ratio: float
    argmax: tuple


@dataclass
class HyperbolicityReport:
    strips: list
    epsilon: float
    b: float
    window_sups: list
    growth: float | None
    verdict: str

    def as_dict(self):
        return {"strips": [{"n": r.n, "sup_ratio": r.sup_ratio, "argmax": list(r.argmax)}
                           for r in self.strips],
                "epsilon": self.epsilon, "b": self.b,
                "window_sups": [[float(r), float(v)] for r, v in self.window_sups],
                "growth": self.growth, "verdict": self.verdict}

    def csv_rows(self):
        rows = [("strip", r.n, repr(float(r.sup_ratio)), "") for r in self.strips]
        rows.append(("summary", "", repr(float(self.epsilon)), repr(float(self.b)) + ";" + self.verdict))
        return rows


def hyperbolicity_check(pair: AlphaBetaPair, sigma_grid, n_max: int, s_per_unit: int = 8,
                        growth_flag: float = GROWTH_FLAG) -> HyperbolicityReport:
    """Sample sup √(β / (λ(α)(1 + d₀²))) on strips |s| ≤ n, n = 1..n_max.

    On a noncompact Σ the sample is also split into nested windows d₀ ≤ R_j;
    when doubling the window radius multiplies the sampled supremum by more
    than ``growth_flag`` the trend is flagged as unbounded.  A periodic chart
    is treated as compact.
    """
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in sigma_grid]
    dists = np.array([d0(pair, x) for x in xs])
    s_all = np.linspace(-n_max, n_max, 2 * n_max * s_per_unit + 1)
    ratio = np.empty((len(xs), len(s_all)))
    eps = np.inf
    bmax = -np.inf
    for i, x in enumerate(xs):
        for j, s in enumerate(s_all):
            lam = lambda_min_alpha(pair, x, s, check=False)
            b = pair.beta.value(pair.point(x, s))
            if not b > 0.0:
                raise BetaNotPositive(f"β = {b:.3e} at x = {x.tolist()}, s = {s}")
            w = lam * (1.0 + dists[i] ** 2)
            eps = min(eps, w)
            bmax = max(bmax, b)
            ratio[i, j] = np.sqrt(b / w)
    strips = []
    for n in range(1, n_max + 1):
        cols = np.nonzero(np.abs(s_all) <= n + 1e-12)[0]
        sub = ratio[:, cols]
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        strips.append(StripRow(n, float(sub[i, j]), (*xs[i].tolist(), float(s_all[cols[j]]))))
    compact = all(p is not None for p in pair.g0.periods)
    window_sups = []
    growth = None
    verdict = "criterion-satisfied-on-sample"
    if not compact and len(xs) > 1:
        rmax = float(np.max(dists))
        per_point = np.max(ratio, axis=1)
        for frac in (0.25, 0.5, 1.0):
            mask = dists <= frac * rmax + 1e-12
            window_sups.append((frac * rmax, float(np.max(per_point[mask]))))
        growth = window_sups[-1][1] / window_sups[-2][1]
        if growth > growth_flag:
            verdict = "flagged-unbounded"
    return HyperbolicityReport(strips, float(eps), float(bmax), window_sups, growth, verdict)


class Seminorms(NamedTuple):
    C0: float
    C1: float
    C2: float
    D0: float
    D1: float
    D2: float

    def as_dict(self):
        return dict(self._asdict())


def seminorms(pair: AlphaBetaPair, grid) -> Seminorms:
    """Sampled suprema of the six quantities bounding (α, β).

    Derivatives are flat chart derivatives.  Every slot is measured in an
    orthonormal frame of g⁰ ⊕ ds²: operator norm on the α slot, Euclidean
    norm over the derivative slots.
    """
    k = pair.sigma_dim
    C0 = C1 = C2 = D0 = D1 = D2 = 0.0
    for p in grid:
        p = np.asarray(p, dtype=float)
        x = p[:k]
        L = _frame(pair, x)
        Li = np.linalg.inv(L)
        P = np.eye(k + 1)
        P[:k, :k] = Li  # maps chart covectors to an orthonormal coframe
        A, dA, ddA = pair.alpha.jet(p, 2)
        conj = lambda M: L.T @ M @ Li.T
        C0 = max(C0, np.linalg.norm(conj(A), 2) * (1.0 + d0(pair, x) ** 2))
        dAo = np.einsum("am,mij->aij", P, dA)
        C1 = max(C1, float(np.sqrt(sum(np.linalg.norm(conj(M), 2) ** 2 for M in dAo))))
        ddAo = np.einsum("am,bl,mlij->abij", P, P, ddA)
        C2 = max(C2, float(np.sqrt(sum(np.linalg.norm(conj(M), 2) ** 2
                                       for row in ddAo for M in row))))
        b, db, hb = pair.beta.jet(p, 2)
        D0 = max(D0, abs(b))
        D1 = max(D1, float(np.linalg.norm(P @ db)))
        D2 = max(D2, float(np.linalg.norm(P @ hb @ P.T, 2)))
    return Seminorms(float(C0), C1, C2, float(D0), D1, D2)


class LipschitzReport(NamedTuple):
    samples: int
    violations: int
    spd_violations: int
    max_excess: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.spd_violations == 0


def lambda_lipschitz_property(samples: int, seed: int = 42, dim: int = 3,
                              rtol: float = 1e-12) -> LipschitzReport:
    """Check |λ_k(A) − λ_k(B)| ≤ ‖A − B‖ on random symmetric pairs, and the
    λ_min version on random positive definite pairs."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    bad = bad_spd = 0
    excess = -np.inf
    for _ in range(samples):
        scale = 10.0 ** rng.uniform(-3, 3)
        X = rng.normal(size=(dim, dim))
        A = scale * (X + X.T)
        Y = rng.normal(size=(dim, dim)) * 10.0 ** rng.uniform(-4, 0)
        B = A + scale * (Y + Y.T)
        gap = np.linalg.norm(A - B, 2)
        diff = np.max(np.abs(np.linalg.eigvalsh(A) - np.linalg.eigvalsh(B)))
        slack = rtol * max(np.linalg.norm(A, 2), np.linalg.norm(B, 2))
        excess = max(excess, diff - gap)
        bad += int(diff > gap + slack)
        P = A @ A.T + 1e-3 * scale * np.eye(dim)
        Q = B @ B.T + 1e-3 * scale * np.eye(dim)
        gap = np.linalg.norm(P - Q, 2)
        diff = abs(np.linalg.eigvalsh(P)[0] - np.linalg.eigvalsh(Q)[0])
        slack = rtol * max(np.linalg.norm(P, 2), np.linalg.norm(Q, 2))
        bad_spd += int(diff > gap + slack)
    return LipschitzReport(samples, bad, bad_spd, float(excess))
