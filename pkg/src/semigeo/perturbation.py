"""Compactly supported metric perturbations and the transversality pairing.

The bump construction realizes, in one chart, a symmetric tensor h that
vanishes along an arc γ(I) and whose derivative in the direction of a given
field V equals a prescribed K_t there.  Near the arc we use coordinates

    σ(y) = ⟨f, y⟩,   τ(σ) with ⟨f, γ(τ)⟩ = σ,
    λ(y) = ⟨e, y − γ(τ)⟩,   w(y) = P⊥(y − γ(τ)),

where f is the unit velocity at the middle of I, e the unit part of V there
orthogonal to f, and P⊥ the projection onto span{e, f}⊥.  Then

    h(y) = λ·χ(λ/r) · χ(|w|/r) · K(τ)/a(τ),

with χ the C² cutoff and a(τ) = ∂_V λ along the arc, so h(γ(t)) = 0 and
∂_{V_t} h = K_t for t in I.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import PPoly
from scipy.optimize import brentq

from .errors import (
    BothVelocitiesVanish,
    GeometryError,
    GridMismatch,
    NotJacobi,
    NotVertical,
    TubeIntersectsCurve,
    VParallel,
)
from .fields import RadialBumpField, cutoff
from .geodesics import DiscretizedCurve, geodesic_residual, integrate_geodesic, wrap_difference
from .index_form import assemble_index_form, kernel
from .jacobi import FieldAlongCurve, JacobiSolution
from .metrics import Box, MetricFamily, Perturbed, local_geometry

GAUSS2 = (np.array([-1.0, 1.0]) / np.sqrt(3.0), np.array([1.0, 1.0]))


class EmptyKernel(GeometryError):
    code = "empty-kernel"


# ---------------------------------------------------------------------------
# jets in one variable: tuples (value, first derivative, second derivative)


def _jmul(a, b):
    return (a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2])


def _jinv(c):
    v = 1.0 / c[0]
    return (v, -c[1] * v * v, 2.0 * c[1] ** 2 * v ** 3 - c[2] * v * v)


def _jsub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _to_sigma(jet, tp, tpp):
    """Change variable from τ to σ given τ'(σ) and τ''(σ)."""
    return (jet[0], jet[1] * tp, jet[2] * tp * tp + jet[1] * tpp)


# ---------------------------------------------------------------------------
# profiles K_t on the interval


class ScalarProfile:
    """amplitude·sin^(2p)(π(t − a)/(b − a)) on [a, b], zero elsewhere.

    The profile is C^(2p−1) at the ends of the interval; p = 1 is the plain
    sin² bump, larger p gives smoother perturbed Christoffel symbols.
    """

    def __init__(self, a: float, b: float, amplitude: float = 1.0, power: int = 2):
        self.a, self.b, self.amplitude = float(a), float(b), float(amplitude)
        self.power = int(power)
        if self.power < 1:
            raise ValueError("profile power must be at least 1")

    def jet(self, t):
        if not (self.a < t < self.b) or self.amplitude == 0.0:
            return (0.0, 0.0, 0.0)
        c = np.pi / (self.b - self.a)
        u = c * (t - self.a)
        q = 2 * self.power
        sn, cs = np.sin(u), np.cos(u)
        A = self.amplitude
        d1 = q * sn ** (q - 1) * cs * c
        d2 = q * ((q - 1) * sn ** (q - 2) * cs * cs - sn ** q) * c * c
        return (A * sn ** q, A * d1, A * d2)

    def describe(self):
        return {"kind": "sin-power", "a": self.a, "b": self.b, "amplitude": self.amplitude,
                "power": self.power}


class MatrixProfile:
    """K_t = Σ_i k_i(t) S_i with scalar profiles k_i and constant symmetric S_i."""

    def __init__(self, terms):
        self.terms = [(p, 0.5 * (np.asarray(S, float) + np.asarray(S, float).T)) for p, S in terms]

    def jet(self, t):
        n = self.terms[0][1].shape[0]
        out = [np.zeros((n, n)) for _ in range(3)]
        for p, S in self.terms:
            k = p.jet(t)
            for i in range(3):
                out[i] = out[i] + k[i] * S
        return tuple(out)

    def value(self, t):
        return self.jet(t)[0]

    def describe(self):
        return {"kind": "matrix", "terms": [{"profile": p.describe(), "S": S.tolist()}
                                             for p, S in self.terms]}


def velocity_profile(curve: DiscretizedCurve, metric: MetricFamily, interval, amplitude=1.0, power=2):
    """k(t)·b⊗b with b = γ̇♭ frozen at the middle of the interval, so K_t(γ̇, γ̇) ≥ 0."""
    a, b = interval
    tc = 0.5 * (a + b)
    x, v = curve.position_at(tc), curve.velocity_at(tc)
    bvec = metric.jet(x, 0)[0] @ v
    return MatrixProfile([(ScalarProfile(a, b, amplitude, power), np.outer(bvec, bvec))])


# ---------------------------------------------------------------------------
# perturbation fields


class PerturbationField:
    """Symmetric (0,2)-tensor field h with analytic first and second derivatives."""

    cls = "general"
    max_order = 2

    def __init__(self, dim: int, support_box: Box, meta=None, periods=None):
        self.dim = int(dim)
        self.support_box = support_box
        self.meta = dict(meta or {})
        self.periods = tuple(periods) if periods is not None else (None,) * self.dim

    def jet(self, x, order: int = 1):
        raise NotImplementedError

    def value(self, x):
        return self.jet(x, 0)[0]

    def describe(self) -> dict:
        return {"class": self.cls, "support_box": self.support_box.as_dict(),
                "meta": {k: v for k, v in self.meta.items() if not k.startswith("_")}}


class ZeroPerturbation(PerturbationField):
    cls = "general"

    def __init__(self, dim):
        super().__init__(dim, Box((0.0,) * dim, (0.0,) * dim))

    def jet(self, x, order=1):
        n = self.dim
        return (np.zeros((n, n)), np.zeros((n, n, n)) if order >= 1 else None,
                np.zeros((n, n, n, n)) if order >= 2 else None)


class LinearCombination(PerturbationField):
    """Σ c_i h_i."""

    def __init__(self, parts, coeffs):
        parts = list(parts)
        lo = np.min([p.support_box.lower for p in parts], axis=0)
        hi = np.max([p.support_box.upper for p in parts], axis=0)
        classes = {p.cls for p in parts}
        super().__init__(parts[0].dim, Box(tuple(lo), tuple(hi)), periods=parts[0].periods)
        self.cls = classes.pop() if len(classes) == 1 else "general"
        self.parts = parts
        self.coeffs = [float(c) for c in coeffs]

    def jet(self, x, order=1):
        out = None
        for c, p in zip(self.coeffs, self.parts):
            j = p.jet(x, order)
            if out is None:
                out = [None if a is None else c * a for a in j]
            else:
                out = [None if a is None else o + c * a for o, a in zip(out, j)]
        return tuple(out)


class RandomBumpSum(PerturbationField):
    """Σ_k φ_k(y) S_k with radial bump functions φ_k and fixed symmetric S_k."""

    cls = "general"

    def __init__(self, bumps, mats, meta=None):
        self.bumps = list(bumps)
        self.mats = [0.5 * (np.asarray(S) + np.asarray(S).T) for S in mats]
        dim = self.bumps[0].dim
        lo = np.min([b.center - b.radius for b in self.bumps], axis=0)
        hi = np.max([b.center + b.radius for b in self.bumps], axis=0)
        super().__init__(dim, Box(tuple(lo), tuple(hi)), meta)

    def jet(self, x, order=1):
        n = self.dim
        h = np.zeros((n, n))
        dh = np.zeros((n, n, n)) if order >= 1 else None
        ddh = np.zeros((n, n, n, n)) if order >= 2 else None
        for b, S in zip(self.bumps, self.mats):
            v, g, H = b.jet(x, order)
            h += v * S
            if order >= 1:
                dh += g[:, None, None] * S
            if order >= 2:
                ddh += H[:, :, None, None] * S
        return h, dh, ddh


def random_general_perturbation(rng: np.random.Generator, center, spread: float = 0.5,
                                count: int = 3, radius=(0.4, 0.9)) -> RandomBumpSum:
    """Seeded random compactly supported symmetric tensor near ``center``."""
    center = np.asarray(center, dtype=float)
    n = len(center)
    bumps, mats = [], []
    for _ in range(count):
        c = center + rng.uniform(-spread, spread, n)
        r = rng.uniform(*radius)
        bumps.append(RadialBumpField(n, c, r, amplitude=rng.normal(),
                                     slope=rng.normal(size=n), curvature=rng.normal(size=(n, n))))
        S = rng.normal(size=(n, n))
        mats.append(S + S.T)
    return RandomBumpSum(bumps, mats, {"kind": "random-bump-sum", "count": count})


class _LocalPoly:
    """Value and first ``nder`` derivatives of a piecewise polynomial in one call."""

    def __init__(self, pp, nder):
        self.x = pp.x
        self.nder = nder
        c = np.asarray(pp.c)  # (deg + 1, intervals, n), highest power first
        deg = c.shape[0] - 1
        self.deg = deg
        # coefficients in ascending powers: a[j] multiplies u**j
        self.a = c[::-1]
        fact = np.ones((nder + 1, deg + 1))
        for k in range(1, nder + 1):
            for j in range(deg + 1):
                fact[k, j] = 0.0 if j < k else fact[k - 1, j] * (j - k + 1)
        self.fact = fact
        self.fact_rows = fact.tolist()
        self.xs = list(map(float, self.x))

    def __call__(self, t):
        i = min(max(bisect_right(self.xs, t) - 1, 0), len(self.xs) - 2)
        u = t - self.xs[i]
        pw = [u ** j for j in range(self.deg + 1)]
        M = [[f * pw[j - k] if j >= k else 0.0 for j, f in enumerate(row)]
             for k, row in enumerate(self.fact_rows)]
        return list(np.array(M) @ self.a[:, i, :])


class _TubeFrame:
    """Arc coordinates (σ, τ, λ, w) around γ(I) and the scalar cutoff factor."""

    def __init__(self, curve: DiscretizedCurve, interval, V, radius: float, tol: float = 1e-3):
        a, b = float(interval[0]), float(interval[1])
        if not (0.0 <= a < b <= 1.0):
            raise ValueError(f"bad interval {interval}")
        self.curve = curve
        self.poly = curve.interpolant()
        self.a, self.b = a, b
        self.r = float(radius)
        self.periods = curve.periods
        self.V = V
        self.arc = _LocalPoly(PPoly.from_bernstein_basis(self.poly), 3)
        if isinstance(V, FieldAlongCurve) and V.mode == "hermite":
            self.vjet = _LocalPoly(V._hermite(), 2)
        else:
            self.vjet = lambda t: (V.at(t), V.rate_at(t), np.zeros(curve.dim))
        tc = 0.5 * (a + b)
        self.center = self.poly(tc)
        vc = self.poly(tc, 1)
        self.f = vc / np.linalg.norm(vc)
        Vc = V.at(tc)
        e = Vc - (Vc @ self.f) * self.f
        if np.linalg.norm(e) <= tol * max(np.linalg.norm(Vc), 1e-300):
            raise VParallel("V is parallel to the velocity at the middle of I")
        self.e = e / np.linalg.norm(e)
        n = curve.dim
        # orthonormal complement of span{e, f}
        Q, _ = np.linalg.qr(np.column_stack([self.e, self.f, np.eye(n)]))
        self.comp = Q[:, 2:n].T
        ts = np.linspace(a, b, 65)
        sf = np.array([self.f @ self.poly(t, 1) for t in ts])
        if np.min(sf) <= 0.0:
            raise VParallel("arc is not monotone along its middle direction; shorten I")
        self.sig_a = float(self.f @ self.poly(a))
        self.sig_b = float(self.f @ self.poly(b))
        self._tab_t = np.linspace(a, b, 257)
        self._tab_s = np.array([self.f @ self.arc(t)[0] for t in self._tab_t])
        avals = np.array([self.a_jet(t, self.arc(t))[0] for t in ts])
        vnorm = np.array([np.linalg.norm(V.at(t)) for t in ts])
        if np.min(np.abs(avals)) <= tol * max(np.max(vnorm), 1e-300) or np.min(avals) * np.max(avals) <= 0:
            raise VParallel("transverse component of V vanishes on I")
        lo = np.min([self.poly(t) for t in ts], axis=0) - np.sqrt(2.0) * self.r
        hi = np.max([self.poly(t) for t in ts], axis=0) + np.sqrt(2.0) * self.r
        self.box = Box(tuple(lo), tuple(hi))

    def a_jet(self, tau, gam):
        """Jet in τ of a = ∂_V λ along the arc; ``gam`` holds γ and three derivatives at τ."""
        e, f = self.e, self.f
        Vj = self.vjet(tau)
        gj = gam[1:4]
        p = tuple(e @ x for x in Vj)
        q = tuple(e @ x for x in gj)
        r = tuple(f @ x for x in Vj)
        s = tuple(f @ x for x in gj)
        return _jsub(p, _jmul(q, _jmul(r, _jinv(s))))

    def wrap(self, y):
        return self.center + wrap_difference(np.asarray(y, float) - self.center, self.periods)

    def locate(self, y):
        """Return (τ, τ', τ'', arc jets at τ), or None when σ(y) lies outside the arc's range."""
        f = self.f
        s = f @ y
        if not (self.sig_a < s < self.sig_b):
            return None
        tau = float(np.interp(s, self._tab_s, self._tab_t))
        for _ in range(8):
            gam = self.arc(tau)
            step = (f @ gam[0] - s) / (f @ gam[1])
            tau = min(max(tau - step, self.a), self.b)
            if abs(step) <= 1e-15:
                break
        else:
            tau = brentq(lambda t: f @ self.arc(t)[0] - s, self.a, self.b, xtol=1e-15, rtol=1e-15)
        gam = self.arc(tau)
        tp = 1.0 / (f @ gam[1])
        tpp = -(f @ gam[2]) * tp ** 3
        return tau, tp, tpp, gam

    def factor(self, y, tau, tp, tpp, gam, order):
        """Scalar F = λχ(λ/r)·χ(|w|/r) with gradient and Hessian in y, or None if zero."""
        f, r = self.f, self.r
        g0, g1, g2 = gam[0], gam[1], gam[2]
        n = len(y)

        def zjet(u):
            c1 = (u @ g1) * tp
            c2 = (u @ g2) * tp * tp + (u @ g1) * tpp
            return u @ (y - g0), u - c1 * f, -c2 * np.outer(f, f)

        lam, dlam, hlam = zjet(self.e)
        if abs(lam) >= r:
            return None
        c, dc, ddc = cutoff(lam / r)
        dc = dc if lam >= 0.0 else -dc
        A = lam * c
        A1 = c + lam / r * dc
        A2 = 2.0 / r * dc + lam / r ** 2 * ddc
        gA = A1 * dlam
        hA = A2 * np.outer(dlam, dlam) + A1 * hlam
        Qv, gQ, hQ = 1.0, np.zeros(n), np.zeros((n, n))
        if len(self.comp):
            zs = [zjet(u) for u in self.comp]
            rho = float(np.sqrt(sum(z[0] ** 2 for z in zs)))
            if rho >= r:
                return None
            if rho > 0.5 * r:
                q, dq, ddq = cutoff(rho / r)
                grho = sum(z[0] * z[1] for z in zs) / rho
                hrho = (sum(np.outer(z[1], z[1]) + z[0] * z[2] for z in zs) - np.outer(grho, grho)) / rho
                Qv = q
                gQ = dq / r * grho
                hQ = ddq / r ** 2 * np.outer(grho, grho) + dq / r * hrho
        F = A * Qv
        gF = gA * Qv + A * gQ
        hF = hA * Qv + np.outer(gA, gQ) + np.outer(gQ, gA) + A * hQ
        return F, gF, hF

    def tube_check(self, spatial_tol: float, periodic=None):
        """Raise when the curve outside I enters the support of the tube."""
        grid = self.curve.grid
        for t, x in zip(grid, self.curve.positions):
            if self.a <= t <= self.b:
                continue
            y = self.wrap(x)
            loc = self.locate(y)
            if loc is None:
                continue
            tau = loc[0]
            d = y - self.poly(tau)
            lam = self.e @ d
            w = d - lam * self.e
            if abs(lam) < self.r and np.linalg.norm(w) < self.r:
                coincident = np.linalg.norm(d) <= max(spatial_tol, 1e-9)
                if periodic is not None and coincident:
                    shift = (t - tau) / periodic.T
                    if abs(shift - round(shift)) <= 1e-6:
                        continue
                raise TubeIntersectsCurve(f"γ({t:.6f}) lies in the tube around γ(I)",
                                          t=float(t), tau=float(tau))


class BumpTensor(PerturbationField):
    cls = "general"

    def __init__(self, frame: _TubeFrame, profile: MatrixProfile, cls: str = "general", meta=None):
        super().__init__(frame.curve.dim, frame.box, meta, periods=frame.periods)
        self.cls = cls
        self.frame = frame
        self.profile = profile

    def jet(self, x, order=1):
        n = self.dim
        zero = (np.zeros((n, n)), np.zeros((n, n, n)) if order >= 1 else None,
                np.zeros((n, n, n, n)) if order >= 2 else None)
        fr = self.frame
        y = fr.wrap(x)
        loc = fr.locate(y)
        if loc is None:
            return zero
        tau, tp, tpp, gam = loc
        K = self.profile.jet(tau)
        if not np.any(K[0]) and not np.any(K[1]):
            return zero
        fac = fr.factor(y, tau, tp, tpp, gam, order)
        if fac is None:
            return zero
        F, gF, hF = fac
        Kt = _to_sigma(_jmul(K, _jinv(fr.a_jet(tau, gam))), tp, tpp)
        f = fr.f
        h = F * Kt[0]
        dh = ddh = None
        if order >= 1:
            dh = gF[:, None, None] * Kt[0] + (F * f)[:, None, None] * Kt[1]
        if order >= 2:
            cross = np.outer(gF, f) + np.outer(f, gF)
            ddh = (hF[:, :, None, None] * Kt[0] + cross[:, :, None, None] * Kt[1]
                   + (F * np.outer(f, f))[:, :, None, None] * Kt[2])
        return h, dh, ddh


class ScalarBump:
    """Scalar analogue of the bump: ψ(γ(t)) = 0 and V_t(ψ) = k(t) on I."""

    kind = "scalar-bump"

    def __init__(self, frame: _TubeFrame, profile: ScalarProfile):
        self.frame = frame
        self.profile = profile
        self.dim = frame.curve.dim
        self.axes = tuple(range(self.dim))

    def jet(self, x, order=2):
        n = self.dim
        zero = (0.0, np.zeros(n), np.zeros((n, n)))
        fr = self.frame
        y = fr.wrap(x)
        loc = fr.locate(y)
        if loc is None:
            return zero
        tau, tp, tpp, gam = loc
        k = self.profile.jet(tau)
        if k[0] == 0.0 and k[1] == 0.0:
            return zero
        fac = fr.factor(y, tau, tp, tpp, gam, order)
        if fac is None:
            return zero
        F, gF, hF = fac
        kt = _to_sigma(_jmul(k, _jinv(fr.a_jet(tau, gam))), tp, tpp)
        f = fr.f
        return (F * kt[0], gF * kt[0] + F * kt[1] * f,
                hF * kt[0] + (np.outer(gF, f) + np.outer(f, gF)) * kt[1] + F * kt[2] * np.outer(f, f))

    def value(self, x):
        return self.jet(x)[0]

    def grad(self, x):
        return self.jet(x)[1]

    def describe(self):
        return {"kind": self.kind, "profile": self.profile.describe(), "radius": self.frame.r}


class ConformalPerturbation(PerturbationField):
    """h = ψ·g₀."""

    cls = "conformal"

    def __init__(self, psi, base: MetricFamily, support_box: Box, meta=None):
        super().__init__(base.dim, support_box, meta, periods=base.periods)
        self.psi = psi
        self.base = base

    def jet(self, x, order=1):
        p, dp, hp = self.psi.jet(x, max(order, 1))
        g, dg, ddg = self.base.jet(x, order)
        dh = ddh = None
        if order >= 1:
            dh = dp[:, None, None] * g + p * dg
        if order >= 2:
            ddh = (hp[:, :, None, None] * g + dp[:, None, None, None] * dg[None]
                   + dp[None, :, None, None] * dg[:, None] + p * ddg)
        return p * g, dh, ddh

    def describe(self):
        return {**super().describe(), "psi": self.psi.describe(), "base": self.base.kind}


class StationaryPerturbation(PerturbationField):
    """h = 𝔥 ⊕ (ρ cross terms) ⊕ ζ on M₀ × ℝ with s-independent components.

    ``frak_h`` is an n0×n0 list of scalar fields (only the upper triangle is
    read), ``rho`` a list of n0 scalar fields and ``zeta`` one scalar field.
    Compact support holds in the M₀ directions; along the Killing direction
    the support is the whole chart.
    """

    cls = "stationary"

    def __init__(self, n0, frak_h, rho, zeta, domain: Box, meta=None):
        self.n0 = int(n0)
        self.frak_h, self.rho, self.zeta = frak_h, rho, zeta
        fields = [f for row in frak_h for f in row] + list(rho) + [zeta]
        lo, hi = list(domain.lower), list(domain.upper)
        centers = [f for f in fields if isinstance(f, RadialBumpField)]
        if centers and len(centers) == len(fields):
            for a in range(self.n0):
                lo[a] = min(f.center[a] - f.radius for f in centers)
                hi[a] = max(f.center[a] + f.radius for f in centers)
        super().__init__(n0 + 1, Box(tuple(lo), tuple(hi)), meta)

    def _components(self):
        n0 = self.n0
        for a in range(n0):
            for b in range(a, n0):
                yield (a, b), self.frak_h[a][b]
            yield (a, n0), self.rho[a]
        yield (n0, n0), self.zeta

    def jet(self, x, order=1):
        n = self.dim
        h = np.zeros((n, n))
        dh = np.zeros((n, n, n)) if order >= 1 else None
        ddh = np.zeros((n, n, n, n)) if order >= 2 else None
        for (a, b), fld in self._components():
            v, g, H = fld.jet(x, order)
            for i, j in {(a, b), (b, a)}:
                h[i, j] = v
                if order >= 1:
                    dh[:, i, j] = g
                if order >= 2:
                    ddh[:, :, i, j] = H
        return h, dh, ddh


def random_stationary_perturbation(rng: np.random.Generator, x0, s_range=(-100.0, 100.0),
                                   spread: float = 0.3) -> StationaryPerturbation:
    """Seeded stationary variation with radial-bump components in the M₀ variables."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    n0 = len(x0)
    dim = n0 + 1
    axes = tuple(range(n0))

    def bump():
        return RadialBumpField(dim, x0 + rng.uniform(-spread, spread, n0), rng.uniform(0.5, 1.0),
                               amplitude=rng.normal(), slope=rng.normal(size=n0),
                               curvature=rng.normal(size=(n0, n0)), axes=axes)

    frak = [[bump() for _ in range(n0)] for _ in range(n0)]
    rho = [bump() for _ in range(n0)]
    zeta = bump()
    domain = Box(tuple(x0 - 2.0) + (s_range[0],), tuple(x0 + 2.0) + (s_range[1],))
    return StationaryPerturbation(n0, frak, rho, zeta, domain, {"kind": "random-stationary"})


# ---------------------------------------------------------------------------
# constructions


def bump_tensor(curve: DiscretizedCurve, interval, V, K_profile: MatrixProfile, tube_radius: float,
                spatial_tol: float = 1e-6, periodic=None, tol: float = 1e-3, cls: str = "general") -> BumpTensor:
    """Bump h with h = 0 on γ(I) and ∂_{V_t}h = K_t for t in I."""
    frame = _TubeFrame(curve, interval, V, tube_radius, tol)
    frame.tube_check(spatial_tol, periodic)
    meta = {"interval": [float(interval[0]), float(interval[1])], "tube_radius": float(tube_radius),
            "profile": K_profile.describe()}
    return BumpTensor(frame, K_profile, cls, meta)


def bump_scalar(curve: DiscretizedCurve, interval, V, profile: ScalarProfile, tube_radius: float,
                spatial_tol: float = 1e-6, periodic=None, tol: float = 1e-3) -> ScalarBump:
    frame = _TubeFrame(curve, interval, V, tube_radius, tol)
    frame.tube_check(spatial_tol, periodic)
    return ScalarBump(frame, profile)


def conformal_bump(curve, interval, V, base: MetricFamily, tube_radius: float,
                   amplitude: float = 1.0, **kw) -> ConformalPerturbation:
    psi = bump_scalar(curve, interval, V, ScalarProfile(interval[0], interval[1], amplitude),
                      tube_radius, **kw)
    return ConformalPerturbation(psi, base, psi.frame.box,
                                 {"interval": list(map(float, interval)), "tube_radius": tube_radius})


def split_bump(curve: DiscretizedCurve, interval, V, n1: int, K1=None, K2=None,
               tube_radius: float = 0.2, amplitude: float = 1.0, vel_tol: float = 1e-10,
               **kw) -> BumpTensor:
    """Block-diagonal bump on a product chart ℝ^{n1} × ℝ^{n2}.

    ``K1``/``K2`` are n1×n1 and n2×n2 symmetric matrices multiplied by the
    sin² profile on I; by default each is the outer product of its factor's
    velocity at the middle of I.
    """
    a, b = interval
    n = curve.dim
    ts = np.linspace(a, b, 33)
    vel = curve.velocity_at(ts)
    both = (np.linalg.norm(vel[:, :n1], axis=1) <= vel_tol) & (np.linalg.norm(vel[:, n1:], axis=1) <= vel_tol)
    if np.any(both):
        raise BothVelocitiesVanish("ẋ₁ and ẋ₂ vanish together on I")
    vc = curve.velocity_at(0.5 * (a + b))
    if K1 is None:
        K1 = np.outer(vc[:n1], vc[:n1])
    if K2 is None:
        K2 = np.outer(vc[n1:], vc[n1:])
    S1 = np.zeros((n, n))
    S1[:n1, :n1] = K1
    S2 = np.zeros((n, n))
    S2[n1:, n1:] = K2
    prof = ScalarProfile(a, b, amplitude)
    return bump_tensor(curve, interval, V, MatrixProfile([(prof, S1), (prof, S2)]), tube_radius,
                       cls="split", **kw)


# ---------------------------------------------------------------------------
# pairings


def _as_field(curve, V):
    if isinstance(V, FieldAlongCurve):
        if len(V.grid) != len(curve.grid):
            raise GridMismatch(f"field on {len(V.grid) - 1} steps, curve on {curve.m}")
        return V
    V = np.asarray(V, dtype=float)
    if V.shape[0] != len(curve.grid):
        raise GridMismatch(f"field with {V.shape[0]} nodes, curve with {len(curve.grid)}")
    return FieldAlongCurve(curve.grid, V, mode="linear")


def _quadrature_nodes(curve, breakpoints=(), points=2):
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.union1d(curve.grid, [b for b in breakpoints if 0.0 < b < 1.0])
    a, b = edges[:-1], edges[1:]
    ts = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * x[None, :]
    ws = (0.5 * (b - a))[:, None] * w[None, :]
    return ts.ravel(), ws.ravel()


def _breakpoints(h):
    iv = h.meta.get("interval") if hasattr(h, "meta") else None
    return () if iv is None else tuple(iv)


def transversality_pairing(h: PerturbationField, metric: MetricFamily, curve: DiscretizedCurve, V,
                           points: int = 2) -> float:
    """∫ h(γ̇, V̇) + ½ ∂_V h(γ̇, γ̇) dt with composite Gauss quadrature on the grid."""
    V = _as_field(curve, V)
    ts, ws = _quadrature_nodes(curve, _breakpoints(h), points)
    poly = curve.interpolant()
    X, Xd = poly(ts), poly(ts, 1)
    Vs, Vd = V.at(ts), V.rate_at(ts)
    total = 0.0
    for x, xd, v, vd, w in zip(X, Xd, Vs, Vd, ws):
        hv, dh, _ = h.jet(x, 1)
        if not np.any(hv) and not np.any(dh):
            continue
        total += w * (xd @ hv @ vd + 0.5 * np.einsum("k,kij,i,j->", v, dh, xd, xd))
    return float(total)


def first_variation(metric: MetricFamily, curve: DiscretizedCurve, V, breakpoints=(), points=2) -> float:
    """dF/dγ(g, γ)[V] = ∫ g(γ̇, V̇ + Γ(γ̇, V)) dt on the fixed curve."""
    V = _as_field(curve, V)
    ts, ws = _quadrature_nodes(curve, breakpoints, points)
    poly = curve.interpolant()
    total = 0.0
    for t, w, x, xd, v, vd in zip(ts, ws, poly(ts), poly(ts, 1), V.at(ts), V.rate_at(ts)):
        geo = local_geometry(metric, x, curvature=False)
        dv = vd + np.einsum("ijk,j,k->i", geo.gamma, xd, v)
        total += w * (xd @ geo.g @ dv)
    return float(total)


class MixedDerivativeReport(NamedTuple):
    analytic: float
    finite_difference: float
    relative_error: float

    def as_dict(self):
        return dict(self._asdict())


def pairing_is_mixed_derivative_check(h, metric, curve, V, eps: float = 1e-4) -> MixedDerivativeReport:
    """Compare the pairing with the central difference in ε of dF/dγ(g + εh)[V]."""
    bp = _breakpoints(h)
    analytic = transversality_pairing(h, metric, curve, V)
    plus = first_variation(Perturbed(metric, h, eps), curve, V, bp)
    minus = first_variation(Perturbed(metric, h, -eps), curve, V, bp)
    fd = (plus - minus) / (2.0 * eps)
    scale = max(abs(analytic), abs(fd))
    rel = 0.0 if scale == 0.0 else abs(analytic - fd) / scale
    return MixedDerivativeReport(analytic, float(fd), float(rel))


class ConformalPairing(NamedTuple):
    direct: float
    closed_form: float
    agreement: float


def conformal_pairing(psi, metric: MetricFamily, curve: DiscretizedCurve, V, tol: float = 1e-6,
                      jacobi_tol: float = 1e-6) -> ConformalPairing:
    """Pairing of h = ψ·g₀ against a Dirichlet Jacobi field: ½ g₀(γ̇, γ̇) ∫ V(ψ) dt."""
    V = _as_field(curve, V)
    ts, ws = _quadrature_nodes(curve, getattr(getattr(psi, "frame", None), "a", None) is not None
                               and (psi.frame.a, psi.frame.b) or ())
    poly = curve.interpolant()
    X, Xd, Vs, Vd = poly(ts), poly(ts, 1), V.at(ts), V.rate_at(ts)
    direct = 0.0
    integral = 0.0
    worst = 0.0
    scale = 0.0
    for x, xd, v, vd, w in zip(X, Xd, Vs, Vd, ws):
        geo = local_geometry(metric, x, curvature=False)
        p, dp, _ = psi.jet(x, 1)
        dv = vd + np.einsum("ijk,j,k->i", geo.gamma, xd, v)
        tangential = xd @ geo.g @ dv
        worst = max(worst, abs(tangential))
        scale = max(scale, np.linalg.norm(xd) * np.linalg.norm(dv))
        direct += w * (p * tangential + 0.5 * (dp @ v) * (xd @ geo.g @ xd))
        integral += w * (dp @ v)
    if worst > jacobi_tol * max(scale, 1.0):
        raise NotJacobi(f"g0(γ̇, DV) reaches {worst:.3e}; V is not a Dirichlet Jacobi field")
    closed = 0.5 * curve.energy * integral
    return ConformalPairing(float(direct), float(closed), float(abs(direct - closed)))


class StationaryPairing(NamedTuple):
    value: float
    xi_difference: np.ndarray
    xi_integral: np.ndarray
    sigma_difference: float
    closed_form: float


def stationary_family_pairing(h: StationaryPerturbation, curve: DiscretizedCurve, V,
                              vertical_tol: float = 1e-12) -> StationaryPairing:
    """Pairing of a stationary variation along a vertical geodesic, with the
    certificates ξ(1) − ξ(0) and ∫ξ dt that make it vanish."""
    n0 = h.n0
    xs = curve.positions[:, :n0]
    if np.max(np.abs(xs - xs[0])) > vertical_tol or np.max(np.abs(curve.velocities[:, :n0])) > vertical_tol:
        raise NotVertical("curve moves in the M0 directions")
    V = _as_field(curve, V)
    value = transversality_pairing(h, None, curve, V)
    ts, ws = _quadrature_nodes(curve)
    xi_int = np.einsum("t,ti->i", ws, V.at(ts)[:, :n0])
    xi_diff = V.values[-1, :n0] - V.values[0, :n0]
    sig_diff = float(V.values[-1, n0] - V.values[0, n0])
    x0 = curve.positions[0]
    sdot = float(curve.velocities[0, n0])
    rho = np.array([f.value(x0) for f in h.rho])
    zeta, gzeta, _ = h.zeta.jet(x0, 1)
    closed = sdot * (rho @ xi_diff + zeta * sig_diff) + 0.5 * sdot ** 2 * (gzeta[:n0] @ xi_int)
    return StationaryPairing(value, xi_diff, xi_int, sig_diff, float(closed))


# ---------------------------------------------------------------------------
# surjectivity and sweeps


@dataclass(frozen=True)
class Verdict:
    matrix: np.ndarray
    rows: list
    overall: str
    threshold: float

    def as_dict(self):
        return {"matrix": self.matrix.tolist(), "rows": list(self.rows), "overall": self.overall,
                "threshold": self.threshold}


def surjectivity_criterion(kernel_fields, candidates, metric, curve, quadrature_tol: float = 1e-9) -> Verdict:
    """P[i][j] = pairing(h_j, V_i); a row is certified when some |P[i][j]| > 10·quadrature_tol."""
    if len(kernel_fields) == 0:
        raise EmptyKernel("no kernel fields: transversality holds vacuously")
    P = np.array([[transversality_pairing(h, metric, curve, V) for h in candidates]
                  for V in kernel_fields]).reshape(len(kernel_fields), len(candidates))
    thr = 10.0 * quadrature_tol
    rows = ["certified" if P.shape[1] and np.max(np.abs(P[i])) > thr else "obstructed"
            for i in range(P.shape[0])]
    overall = "transversal" if all(r == "certified" for r in rows) else "obstructed"
    return Verdict(P, rows, overall, thr)


class SweepRow(NamedTuple):
    eps: float
    kernel_dim: int | None
    min_abs_lambda: float | None
    min_abs_lambda_extrapolated: float | None
    ratio: float | None
    residual: float | None
    endpoint_shift: float | None
    status: str

    def as_dict(self):
        return dict(self._asdict())


def break_degeneracy_sweep(metric: MetricFamily, curve: DiscretizedCurve, h, eps_list,
                           kernel_tol: float = 1e-2, gR: MetricFamily | None = None) -> list:
    """Re-integrate from the unperturbed initial data for g + εh and recount the kernel.

    Each row carries the index-form eigenvalue of smallest modulus on the
    curve's grid, its Richardson value from the doubled grid, and the step
    defect of the re-integrated curve under the perturbed metric.
    """
    x0, v0 = curve.positions[0], curve.velocities[0]
    m = curve.m
    rows = []
    for eps in eps_list:
        eps = float(eps)
        try:
            g_eps = metric if eps == 0.0 else Perturbed(metric, h, eps)
            c2 = integrate_geodesic(g_eps, x0, v0, 2 * m, start_substeps=max(1, curve.substeps // 2))
            c1 = c2.coarsen(2)
            res = float(np.max(geodesic_residual(g_eps, c1)))
            f1 = assemble_index_form(g_eps, c1, gR)
            f2 = assemble_index_form(g_eps, c2, gR)
            ker = kernel(f1, kernel_tol, f2)
            l1 = float(f1.eigen()[0][0])
            l2 = float(f2.eigen()[0][0])
            rows.append(SweepRow(eps, ker.dimension, abs(l1), abs((4.0 * l2 - l1) / 3.0),
                                 l1 / l2 if l2 != 0.0 else None, res,
                                 float(np.linalg.norm(wrap_difference(c1.positions[-1] - curve.positions[-1],
                                                                      curve.periods))), "ok"))
        except GeometryError as exc:
            rows.append(SweepRow(eps, None, None, None, None, None, None, "reshoot-failed: " + exc.code))
    return rows
