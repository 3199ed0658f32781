"""Metric families on a single chart and the curvature quantities derived from them.

Derivative arrays put the differentiation indices first:

    dg[k, i, j]     = ∂_k g_ij
    ddg[k, l, i, j] = ∂_k ∂_l g_ij

Christoffel symbols are stored as ``gamma[i, j, k] = Γ^i_{jk}`` relative to the
flat coordinate connection, and the curvature as ``riemann[i, j, k, l] = R^i_{jkl}``
with R(X, Y) = [∇_X, ∇_Y] − ∇_[X,Y], so that (R(X, Y)Z)^i = R^i_{jkl} Z^j X^k Y^l.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateMetric, OrderUnsupported, PointOutsideDomain
from .fields import (
    ConstantOperator,
    OperatorField,
    ScalarField,
    ScaledIdentityOperator,
    scalar_field_from_spec,
)

DET_FLOOR = 1e-12
COND_CEILING = 1e12


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    @classmethod
    def cube(cls, dim, half_width):
        return cls((-half_width,) * dim, (half_width,) * dim)

    def contains(self, x, slack=0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower) - slack)
                    and np.all(x <= np.asarray(self.upper) + slack))

    def sample(self, rng, count, shrink=0.0):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        pad = shrink * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(count, len(lo)))

    def as_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}


class MetricFamily:
    """A metric tensor field on a box in ℝⁿ with analytic first and second derivatives."""

    kind = "abstract"
    max_order = 2

    def __init__(self, dim, params=(), domain=None, base=None, periods=None):
        self.dim = int(dim)
        self.params = tuple(float(p) for p in params)
        self.domain = domain if domain is not None else Box.cube(self.dim, 100.0)
        self.base = base
        if periods is None:
            periods = base.periods if base is not None else (None,) * self.dim
        self.periods = tuple(periods)

    def jet(self, x, order: int = 0):
        """Return (g, dg, ddg) at x, computing derivatives up to ``order``."""
        x = np.asarray(x, dtype=float)
        if not self.domain.contains(x, slack=1e-12):
            raise PointOutsideDomain(f"{self.kind}: point {x.tolist()} outside chart box",
                                     point=x.tolist())
        if order > self.max_order:
            raise OrderUnsupported(f"{self.kind} supplies derivatives up to order {self.max_order}")
        g, dg, ddg = self._jet(x, order)
        g = 0.5 * (g + g.T)
        if dg is not None:
            dg = 0.5 * (dg + dg.transpose(0, 2, 1))
        if ddg is not None:
            ddg = 0.5 * (ddg + ddg.transpose(0, 1, 3, 2))
            ddg = 0.5 * (ddg + ddg.transpose(1, 0, 2, 3))
        return g, dg, ddg

    def _jet(self, x, order):
        raise NotImplementedError

    def describe(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "params": list(self.params),
               "domain": self.domain.as_dict()}
        if any(p is not None for p in self.periods):
            out["periods"] = list(self.periods)
        if self.base is not None:
            out["base"] = self.base.describe()
        return out

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r}, dim={self.dim}, params={self.params})"


def _zeros(n, order):
    return (np.zeros((n, n, n)) if order >= 1 else None,
            np.zeros((n, n, n, n)) if order >= 2 else None)


class FlatEuclidean(MetricFamily):
    kind = "flat-euclidean"

    def _jet(self, x, order):
        return (np.eye(self.dim), *_zeros(self.dim, order))


class Minkowski(MetricFamily):
    """diag(−1, 1, ..., 1); the first coordinate is time."""

    kind = "minkowski"

    def _jet(self, x, order):
        g = np.eye(self.dim)
        g[0, 0] = -1.0
        return (g, *_zeros(self.dim, order))


def _sphere_block(theta, radius, order):
    """Round-sphere metric diag(R², R² sin²θ) in (θ, φ) with θ-derivatives."""
    r2 = radius * radius
    g = np.diag([r2, r2 * np.sin(theta) ** 2])
    dg = ddg = None
    if order >= 1:
        dg = np.zeros((2, 2, 2))
        dg[0, 1, 1] = r2 * np.sin(2.0 * theta)
    if order >= 2:
        ddg = np.zeros((2, 2, 2, 2))
        ddg[0, 0, 1, 1] = 2.0 * r2 * np.cos(2.0 * theta)
    return g, dg, ddg


class RoundSphereChart(MetricFamily):
    """Sphere of radius params[0] (default 1) in colatitude/longitude (θ, φ)."""

    kind = "round-sphere-chart"

    def __init__(self, params=(1.0,), domain=None, periods=None):
        params = tuple(params) or (1.0,)
        if domain is None:
            domain = Box((0.05, -40.0), (np.pi - 0.05, 40.0))
        super().__init__(2, params, domain, periods=periods or (None, 2.0 * np.pi))

    def _jet(self, x, order):
        return _sphere_block(x[0], self.params[0], order)


class LorentzCylinder(MetricFamily):
    """−ds² + R²(dθ² + sin²θ dφ²) on coordinates (s, θ, φ)."""

    kind = "lorentz-cylinder"

    def __init__(self, params=(1.0,), domain=None, periods=None):
        params = tuple(params) or (1.0,)
        if domain is None:
            domain = Box((-100.0, 0.05, -40.0), (100.0, np.pi - 0.05, 40.0))
        super().__init__(3, params, domain, periods=periods or (None, None, 2.0 * np.pi))

    def _jet(self, x, order):
        gs, dgs, ddgs = _sphere_block(x[1], self.params[0], order)
        g = np.zeros((3, 3))
        g[0, 0] = -1.0
        g[1:, 1:] = gs
        dg, ddg = _zeros(3, order)
        if order >= 1:
            dg[1, 1:, 1:] = dgs[0]
        if order >= 2:
            ddg[1, 1, 1:, 1:] = ddgs[0, 0]
        return g, dg, ddg


class SplitProduct(MetricFamily):
    """Orthogonally split product: a positive factor on the first n1 coordinates
    (flat, or the round sphere chart when ``curvature`` > 0 and n1 = 2) and the
    negative flat factor −I on the remaining n2 coordinates.

    params = (n1, n2, curvature).
    """

    kind = "split-product"

    def __init__(self, params=(2, 1, 0.0), domain=None, periods=None):
        n1, n2, curv = int(params[0]), int(params[1]), float(params[2])
        if curv > 0.0 and n1 != 2:
            raise ValueError("split-product with curvature > 0 needs a 2-dimensional first factor")
        dim = n1 + n2
        if domain is None:
            if curv > 0.0:
                domain = Box((0.05, -40.0) + (-100.0,) * n2, (np.pi - 0.05, 40.0) + (100.0,) * n2)
            else:
                domain = Box.cube(dim, 100.0)
        if periods is None:
            periods = ((None, 2.0 * np.pi) if curv > 0.0 else (None,) * n1) + (None,) * n2
        super().__init__(dim, (n1, n2, curv), domain, periods=periods)
        self.n1, self.n2, self.curvature_value = n1, n2, curv

    def _jet(self, x, order):
        n1, n = self.n1, self.dim
        g = np.zeros((n, n))
        g[n1:, n1:] = -np.eye(self.n2)
        dg, ddg = _zeros(n, order)
        if self.curvature_value > 0.0:
            gs, dgs, ddgs = _sphere_block(x[0], 1.0 / np.sqrt(self.curvature_value), order)
            g[:2, :2] = gs
            if order >= 1:
                dg[0, :2, :2] = dgs[0]
            if order >= 2:
                ddg[0, 0, :2, :2] = ddgs[0, 0]
        else:
            g[:n1, :n1] = np.eye(n1)
        return g, dg, ddg


class StandardStationary(MetricFamily):
    """𝔤 ⊕ (δ cross term) ⊕ −β on M₀ × ℝ with flat 𝔤 and constant δ.

    Coordinates are (x_1, ..., x_n0, s); β is a scalar field of the full chart
    that must not depend on s.
    """

    kind = "standard-stationary"

    def __init__(self, n0, beta: ScalarField, delta=None, domain=None, periods=None):
        dim = n0 + 1
        if n0 in beta.axes or max(beta.axes) >= dim:
            raise ValueError("beta must depend on the M0 coordinates only")
        super().__init__(dim, (), domain, periods=periods)
        self.n0 = int(n0)
        self.beta = beta
        self.delta = np.zeros(n0) if delta is None else np.asarray(delta, dtype=float).reshape(n0)

    def _jet(self, x, order):
        n0, n = self.n0, self.dim
        b, db, hb = self.beta.jet(x, order)
        g = np.eye(n)
        g[:n0, n0] = self.delta
        g[n0, :n0] = self.delta
        g[n0, n0] = -b
        dg, ddg = _zeros(n, order)
        if order >= 1:
            dg[:, n0, n0] = -db
        if order >= 2:
            ddg[:, :, n0, n0] = -hb
        return g, dg, ddg

    def describe(self):
        return {**super().describe(), "n0": self.n0, "beta": self.beta.describe(),
                "delta": self.delta.tolist()}


class GAlphaBeta(MetricFamily):
    """g((v, r), (w, r̄)) = g⁰(αv, w) − β r r̄ on Σ × ℝ, coordinates (x, s)."""

    kind = "g-alpha-beta"

    def __init__(self, g0: MetricFamily, alpha: OperatorField, beta: ScalarField, domain=None):
        k = g0.dim
        dim = k + 1
        if domain is None:
            domain = Box(tuple(g0.domain.lower) + (-100.0,), tuple(g0.domain.upper) + (100.0,))
        super().__init__(dim, (), domain, periods=tuple(g0.periods) + (None,))
        self.g0, self.alpha, self.beta = g0, alpha, beta
        self.k = k

    def _jet(self, x, order):
        k, n = self.k, self.dim
        G0, dG0, ddG0 = self.g0.jet(x[:k], order)
        A, dA, ddA = self.alpha.jet(x, order)
        b, db, hb = self.beta.jet(x, order)
        g = np.zeros((n, n))
        g[:k, :k] = G0 @ A
        g[k, k] = -b
        dg, ddg = _zeros(n, order)
        if order >= 1:
            dG0f = np.zeros((n, k, k))
            dG0f[:k] = dG0
            for m in range(n):
                dg[m, :k, :k] = dG0f[m] @ A + G0 @ dA[m]
            dg[:, k, k] = -db
        if order >= 2:
            ddG0f = np.zeros((n, n, k, k))
            ddG0f[:k, :k] = ddG0
            for m in range(n):
                for l in range(n):
                    ddg[m, l, :k, :k] = (ddG0f[m, l] @ A + dG0f[m] @ dA[l]
                                         + dG0f[l] @ dA[m] + G0 @ ddA[m, l])
            ddg[:, :, k, k] = -hb
        return g, dg, ddg

    def describe(self):
        return {**super().describe(), "g0": self.g0.describe(),
                "alpha": self.alpha.describe(), "beta": self.beta.describe()}


class ConformalRescale(MetricFamily):
    """ψ·g_base for a positive scalar field ψ."""

    kind = "conformal-rescale"

    def __init__(self, base: MetricFamily, psi: ScalarField, domain=None):
        super().__init__(base.dim, (), domain or base.domain, base=base)
        self.psi = psi

    def _jet(self, x, order):
        g, dg, ddg = self.base.jet(x, order)
        p, dp, hp = self.psi.jet(x, order)
        out_d = out_dd = None
        if order >= 1:
            out_d = dp[:, None, None] * g + p * dg
        if order >= 2:
            out_dd = (hp[:, :, None, None] * g
                      + dp[:, None, None, None] * dg[None, :, :, :]
                      + dp[None, :, None, None] * dg[:, None, :, :]
                      + p * ddg)
        return p * g, out_d, out_dd

    def describe(self):
        return {**super().describe(), "psi": self.psi.describe()}


class Perturbed(MetricFamily):
    """g_base + eps·h for a perturbation field h (anything with a ``jet`` method)."""

    kind = "perturbed"

    def __init__(self, base: MetricFamily, h, eps: float, domain=None):
        super().__init__(base.dim, (eps,), domain or base.domain, base=base)
        self.h = h
        self.eps = float(eps)
        self.max_order = min(base.max_order, getattr(h, "max_order", 2))

    def _jet(self, x, order):
        g, dg, ddg = self.base.jet(x, order)
        if self.eps == 0.0:
            return g, dg, ddg
        h, dh, ddh = self.h.jet(x, order)
        e = self.eps
        return (g + e * h,
                None if dg is None else dg + e * dh,
                None if ddg is None else ddg + e * ddh)

    def describe(self):
        out = super().describe()
        describe_h = getattr(self.h, "describe", None)
        if describe_h is not None:
            out["h"] = describe_h()
        return out


# ---------------------------------------------------------------------------
# pointwise geometry


class ChristoffelData(NamedTuple):
    point: np.ndarray
    gamma: np.ndarray


class CurvatureData(NamedTuple):
    point: np.ndarray
    riemann: np.ndarray


class LocalGeometry(NamedTuple):
    g: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray | None


def _check_nondegenerate(g, kind):
    sv = np.linalg.svd(g, compute_uv=False)
    det = float(np.prod(sv))
    if det <= DET_FLOOR:
        raise DegenerateMetric(f"{kind}: |det g| = {det:.3e}")
    cond = sv[0] / sv[-1]
    if not np.isfinite(cond) or cond >= COND_CEILING:
        raise DegenerateMetric(f"{kind}: condition number {cond:.3e}")


def _lowered_christoffel(dg):
    # L[l, j, k] = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)
    return 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)


def local_geometry(metric: MetricFamily, x, curvature: bool = True) -> LocalGeometry:
    """Metric, Christoffel symbols and (optionally) curvature at one point."""
    g, dg, ddg = metric.jet(x, 2 if curvature else 1)
    _check_nondegenerate(g, metric.kind)
    n = metric.dim
    low = _lowered_christoffel(dg)
    gamma = np.linalg.solve(g, low.reshape(n, n * n)).reshape(n, n, n)
    if not curvature:
        return LocalGeometry(g, gamma, None)
    # ∂_m L[l, j, k]
    dlow = 0.5 * (np.einsum("mjlk->mljk", ddg) + np.einsum("mklj->mljk", ddg)
                  - np.einsum("mljk->mljk", ddg))
    # ∂_m Γ^i_jk = g^{il}(∂_m L_ljk − ∂_m g_lp Γ^p_jk)
    rhs = dlow - np.einsum("mlp,pjk->mljk", dg, gamma)
    dgamma = np.linalg.solve(g, rhs.transpose(1, 0, 2, 3).reshape(n, -1)).reshape(n, n, n, n)
    dgamma = dgamma.transpose(1, 0, 2, 3)  # [m, i, j, k]
    riemann = (np.einsum("kilj->ijkl", dgamma) - np.einsum("likj->ijkl", dgamma)
               + np.einsum("ikm,mlj->ijkl", gamma, gamma)
               - np.einsum("ilm,mkj->ijkl", gamma, gamma))
    return LocalGeometry(g, gamma, riemann)


def metric_eval(family: MetricFamily, x):
    return family.jet(x, 0)[0]


def metric_derivatives(family: MetricFamily, x, order: int = 1):
    """First (and for order 2 also second) coordinate derivatives of g at x."""
    if order not in (1, 2):
        raise OrderUnsupported(f"order {order} is not 1 or 2")
    _, dg, ddg = family.jet(x, order)
    return dg if order == 1 else (dg, ddg)


def christoffel(family: MetricFamily, x) -> ChristoffelData:
    geo = local_geometry(family, x, curvature=False)
    return ChristoffelData(np.asarray(x, dtype=float), geo.gamma)


def curvature(family: MetricFamily, x) -> CurvatureData:
    geo = local_geometry(family, x, curvature=True)
    return CurvatureData(np.asarray(x, dtype=float), geo.riemann)


def metric_index(family: MetricFamily, x) -> int:
    g = metric_eval(family, x)
    _check_nondegenerate(g, family.kind)
    return int(np.sum(np.linalg.eigvalsh(g) < 0.0))


def lowered_riemann(family: MetricFamily, x):
    """R_ijkl = g_im R^m_jkl."""
    geo = local_geometry(family, x)
    return np.einsum("im,mjkl->ijkl", geo.g, geo.riemann)


def sectional_curvature(family: MetricFamily, x, u, v) -> float:
    geo = local_geometry(family, x)
    u, v = np.asarray(u, float), np.asarray(v, float)
    ruvv = np.einsum("ijkl,j,k,l->i", geo.riemann, v, u, v)  # R(u, v)v
    num = u @ geo.g @ ruvv
    den = (u @ geo.g @ u) * (v @ geo.g @ v) - (u @ geo.g @ v) ** 2
    return float(num / den)


# ---------------------------------------------------------------------------
# construction from plain mappings (scenario files)


def _box_from(spec, dim):
    if spec is None:
        return None
    return Box(tuple(float(v) for v in spec["lower"]), tuple(float(v) for v in spec["upper"]))


def operator_field_from_spec(spec: dict, dim: int, k: int) -> OperatorField:
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "scaled-identity":
        return ScaledIdentityOperator(dim, k, scalar_field_from_spec(spec["scalar"], dim))
    if kind == "constant":
        return ConstantOperator(dim, k, spec["matrix"])
    raise ValueError(f"unknown operator field kind {kind!r}")


def metric_from_spec(spec: dict) -> MetricFamily:
    """Build a metric family from a mapping with ``kind`` and per-kind keys."""
    spec = dict(spec)
    kind = spec["kind"]
    params = tuple(spec.get("params", ()))
    periods = spec.get("periods")
    if periods is not None:
        periods = tuple(None if (p is None or p == 0) else float(p) for p in periods)
    if kind == "flat-euclidean":
        dim = int(spec["dim"])
        return FlatEuclidean(dim, (), _box_from(spec.get("domain"), dim), periods=periods)
    if kind == "minkowski":
        dim = int(spec["dim"])
        return Minkowski(dim, (), _box_from(spec.get("domain"), dim), periods=periods)
    if kind == "round-sphere-chart":
        return RoundSphereChart(params or (1.0,), _box_from(spec.get("domain"), 2), periods)
    if kind == "lorentz-cylinder":
        return LorentzCylinder(params or (1.0,), _box_from(spec.get("domain"), 3), periods)
    if kind == "split-product":
        return SplitProduct(params, _box_from(spec.get("domain"), None), periods)
    if kind == "standard-stationary":
        n0 = int(spec.get("n0", 1))
        beta = scalar_field_from_spec(spec["beta"], n0 + 1)
        return StandardStationary(n0, beta, spec.get("delta"),
                                  _box_from(spec.get("domain"), n0 + 1), periods)
    if kind == "g-alpha-beta":
        g0 = metric_from_spec(spec["g0"])
        dim = g0.dim + 1
        alpha = operator_field_from_spec(spec["alpha"], dim, g0.dim)
        beta = scalar_field_from_spec(spec["beta"], dim)
        return GAlphaBeta(g0, alpha, beta, _box_from(spec.get("domain"), dim))
    if kind == "conformal-rescale":
        base = metric_from_spec(spec["base"])
        psi = scalar_field_from_spec(spec["psi"], base.dim)
        return ConformalRescale(base, psi, _box_from(spec.get("domain"), base.dim))
    raise ValueError(f"unknown metric kind {kind!r}")


METRIC_KINDS = ("flat-euclidean", "minkowski", "round-sphere-chart", "lorentz-cylinder",
                "split-product", "standard-stationary", "g-alpha-beta", "conformal-rescale",
                "perturbed")
