"""Jacobi fields along discretized geodesics, conjugate points and related constructions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import expm
from scipy.optimize import brentq, minimize_scalar

from .errors import GridMismatch, NotCriticalPoint, NotLightlike, NotPeriodic
from .fields import ScalarField
from .geodesics import DiscretizedCurve, integrate_geodesic, wrap_difference
from .metrics import ConformalRescale, MetricFamily, local_geometry

EVERYWHERE_PARALLEL = "everywhere-parallel"


class FieldAlongCurve:
    """Vector field sampled on a uniform grid.

    ``mode="hermite"`` interpolates with cubic Hermite pieces using ``rates``
    (coordinate derivatives at the nodes); ``mode="linear"`` is the
    piecewise-linear field with piecewise-constant rates, which is exactly
    what a hat-basis coefficient vector represents.
    """

    def __init__(self, grid, values, rates=None, mode="hermite"):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if mode == "hermite" and rates is None:
            mode = "linear"
        self.mode = mode
        self.rates = None if rates is None else np.asarray(rates, dtype=float)
        self._spline = None

    @property
    def m(self):
        return len(self.grid) - 1

    def _hermite(self):
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.grid, self.values, self.rates, axis=0)
        return self._spline

    def _element(self, t):
        m = self.m
        return np.clip(np.floor(np.asarray(t) * m).astype(int), 0, m - 1)

    def at(self, t):
        if self.mode == "hermite":
            return self._hermite()(t)
        t = np.asarray(t, dtype=float)
        i = self._element(t)
        w = (t - self.grid[i]) * self.m
        w = w.reshape(w.shape + (1,) * (self.values.ndim - 1))
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def rate_at(self, t):
        if self.mode == "hermite":
            return self._hermite()(t, 1)
        i = self._element(t)
        return (self.values[i + 1] - self.values[i]) * self.m

    def scaled(self, c):
        return FieldAlongCurve(self.grid, c * self.values,
                               None if self.rates is None else c * self.rates, self.mode)

    def norm(self):
        return float(np.sqrt(np.mean(np.sum(self.values ** 2, axis=tuple(range(1, self.values.ndim))))))


class JacobiSolution(FieldAlongCurve):
    """J and its covariant derivative DJ on the curve grid.

    ``Jdot`` and ``DJdot`` are coordinate derivatives at the nodes, used for
    Hermite evaluation between nodes.  Several fields can be carried at once as
    columns (arrays of shape (m+1, n, k)).
    """

    def __init__(self, grid, J, DJ, Jdot, DJdot):
        super().__init__(grid, J, Jdot, "hermite")
        self.J = self.values
        self.DJ = np.asarray(DJ, dtype=float)
        self.Jdot = self.rates
        self.DJdot = np.asarray(DJdot, dtype=float)
        self._dspline = None

    @property
    def initial(self):
        return self.J[0], self.DJ[0]

    def DJ_at(self, t):
        if self._dspline is None:
            self._dspline = CubicHermiteSpline(self.grid, self.DJ, self.DJdot, axis=0)
        return self._dspline(t)

    def column(self, k):
        return JacobiSolution(self.grid, self.J[..., k], self.DJ[..., k],
                              self.Jdot[..., k], self.DJdot[..., k])

    def combine(self, w):
        """Linear combination of the columns with weights ``w``."""
        w = np.asarray(w, dtype=float)
        return JacobiSolution(self.grid, self.J @ w, self.DJ @ w, self.Jdot @ w, self.DJdot @ w)


def _jacobi_rates(metric, x, v, J, P):
    geo = local_geometry(metric, x)
    gv = np.einsum("ijk,j->ik", geo.gamma, v)
    rv = np.einsum("ijkl,j,k->il", geo.riemann, v, v)
    a = -gv @ v
    return v, a, P - gv @ J, rv @ J - gv @ P


def _check_grid(curve: DiscretizedCurve):
    m = curve.m
    if curve.positions.shape[0] != m + 1 or curve.velocities.shape[0] != m + 1:
        raise GridMismatch("curve arrays do not match its grid")
    if not np.allclose(curve.grid, np.linspace(0.0, 1.0, m + 1), rtol=0.0, atol=1e-14):
        raise GridMismatch("curve grid is not uniform on [0, 1]")


def jacobi_solve(metric: MetricFamily, curve: DiscretizedCurve, J0, DJ0) -> JacobiSolution:
    """Integrate D²J = R(γ̇, J)γ̇ along ``curve`` with the curve's own RK4 step."""
    _check_grid(curve)
    J0 = np.asarray(J0, dtype=float)
    DJ0 = np.asarray(DJ0, dtype=float)
    n = curve.dim
    if J0.shape[0] != n or DJ0.shape != J0.shape:
        raise GridMismatch(f"initial data of shape {J0.shape}/{DJ0.shape} for dimension {n}")
    m, sub = curve.m, curve.substeps
    h = 1.0 / (m * sub)
    shape = (m + 1,) + J0.shape
    Js, Ps, Jd, Pd = (np.empty(shape) for _ in range(4))
    x, v = curve.positions[0].copy(), curve.velocities[0].copy()
    J, P = J0.copy(), DJ0.copy()
    for i in range(m + 1):
        r = _jacobi_rates(metric, x, v, J, P)
        Js[i], Ps[i], Jd[i], Pd[i] = J, P, r[2], r[3]
        if i == m:
            break
        for s in range(sub):
            k1 = r if s == 0 else _jacobi_rates(metric, x, v, J, P)
            k2 = _jacobi_rates(metric, x + 0.5 * h * k1[0], v + 0.5 * h * k1[1],
                               J + 0.5 * h * k1[2], P + 0.5 * h * k1[3])
            k3 = _jacobi_rates(metric, x + 0.5 * h * k2[0], v + 0.5 * h * k2[1],
                               J + 0.5 * h * k2[2], P + 0.5 * h * k2[3])
            k4 = _jacobi_rates(metric, x + h * k3[0], v + h * k3[1],
                               J + h * k3[2], P + h * k3[3])
            x, v, J, P = (y + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                          for y, a, b, c, d in zip((x, v, J, P), k1, k2, k3, k4))
    return JacobiSolution(curve.grid, Js, Ps, Jd, Pd)


def jacobi_residual(metric: MetricFamily, curve: DiscretizedCurve, sol: JacobiSolution) -> np.ndarray:
    """Per-node one-step defect of (J, DJ) against a fresh integration step from each node."""
    m, sub = curve.m, curve.substeps
    h = 1.0 / (m * sub)
    out = np.zeros(m + 1)
    for i in range(m):
        x, v = curve.positions[i], curve.velocities[i]
        J, P = sol.J[i], sol.DJ[i]
        for _ in range(sub):
            k1 = _jacobi_rates(metric, x, v, J, P)
            k2 = _jacobi_rates(metric, x + 0.5 * h * k1[0], v + 0.5 * h * k1[1],
                               J + 0.5 * h * k1[2], P + 0.5 * h * k1[3])
            k3 = _jacobi_rates(metric, x + 0.5 * h * k2[0], v + 0.5 * h * k2[1],
                               J + 0.5 * h * k2[2], P + 0.5 * h * k2[3])
            k4 = _jacobi_rates(metric, x + h * k3[0], v + h * k3[1],
                               J + h * k3[2], P + h * k3[3])
            x, v, J, P = (y + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                          for y, a, b, c, d in zip((x, v, J, P), k1, k2, k3, k4))
        out[i] = max(np.max(np.abs(J - sol.J[i + 1])), np.max(np.abs(P - sol.DJ[i + 1])))
    return out


def fundamental_solution(metric: MetricFamily, curve: DiscretizedCurve) -> JacobiSolution:
    """Columns J_i with J_i(0) = 0, DJ_i(0) = e_i; cached on the curve per metric."""
    cached = curve._cache.get("fundamental")
    if cached is not None and cached[0] is metric:
        return cached[1]
    n = curve.dim
    sol = jacobi_solve(metric, curve, np.zeros((n, n)), np.eye(n))
    curve._cache["fundamental"] = (metric, sol)
    return sol


def endpoint_matrix(metric: MetricFamily, curve: DiscretizedCurve, t: float) -> np.ndarray:
    """A(t) with A(t)w = J_w(t) for J_w(0) = 0, DJ_w(0) = w."""
    sol = fundamental_solution(metric, curve)
    k = t * curve.m
    if abs(k - round(k)) <= 1e-12:
        return sol.J[int(round(k))].copy()
    return sol.at(t)


# ---------------------------------------------------------------------------
# conjugate points


class ConjugateEvent(NamedTuple):
    t: float
    multiplicity: int
    kernel_directions: np.ndarray


@dataclass(frozen=True)
class ConjugateReport:
    events: list = field(default_factory=list)

    def as_dict(self):
        return {"events": [{"t": float(e.t), "multiplicity": int(e.multiplicity),
                            "kernel_directions": np.asarray(e.kernel_directions).tolist()}
                           for e in self.events]}


def _kernel_at(A, kernel_tol):
    u, s, wt = np.linalg.svd(A)
    small = s <= kernel_tol * max(s[0], 1e-300)
    return int(np.sum(small)), wt[small], s


def conjugate_points(metric: MetricFamily, curve: DiscretizedCurve,
                     kernel_tol: float = 1e-6) -> ConjugateReport:
    """Scan σ_min(A(t))/t on the grid, then refine sign changes of uᵀA(t)w by Brent's method."""
    sol = fundamental_solution(metric, curve)
    grid, m = curve.grid, curve.m
    sig = np.array([np.linalg.svd(sol.J[i], compute_uv=False)[-1] for i in range(m + 1)])
    f = np.full(m + 1, np.inf)
    f[1:] = sig[1:] / grid[1:]
    events = []
    for i in range(1, m + 1):
        is_min = f[i] < f[i - 1] and (i == m or f[i] <= f[i + 1])
        if not is_min:
            continue
        u, s, wt = np.linalg.svd(sol.J[i])
        uu, ww = u[:, -1], wt[-1]

        def signed(t):
            return float(uu @ sol.at(t) @ ww)

        lo, hi = grid[i - 1], grid[min(i + 1, m)]
        t_star = None
        for a, b in ((grid[i - 1], grid[i]), (grid[i], hi)):
            if b <= a:
                continue
            fa, fb = signed(a), signed(b)
            if fa == 0.0 and a > 0.0:
                t_star = a
            elif fb == 0.0:
                t_star = b
            elif fa * fb < 0.0:
                t_star = brentq(signed, a, b, xtol=1e-12, rtol=1e-15)
            if t_star is not None:
                break
        if t_star is None:
            if i == m and s[-1] <= kernel_tol * s[0]:
                t_star = 1.0
            else:
                continue
        A = sol.at(t_star) if t_star < 1.0 else sol.J[m]
        mult, dirs, sv = _kernel_at(A, kernel_tol)
        if mult == 0 and t_star >= 1.0 - 1e-9 and sv[-1] <= kernel_tol * sv[0]:
            mult = 1
        if mult == 0:
            continue
        if any(abs(t_star - e.t) <= 1e-8 for e in events):
            continue
        events.append(ConjugateEvent(float(t_star), int(mult), np.asarray(dirs)))
    events.sort(key=lambda e: e.t)
    return ConjugateReport(events)


# ---------------------------------------------------------------------------
# parallel locus


def parallel_locus(curve: DiscretizedCurve, J, tol: float = 1e-6):
    """Parameters where J is parallel to γ̇ (zeros of ‖J ∧ γ̇‖, chart inner product).

    Returns ``EVERYWHERE_PARALLEL`` if the wedge vanishes identically.
    """
    if not isinstance(J, FieldAlongCurve):
        J = FieldAlongCurve(curve.grid, J)
    poly = curve.interpolant()

    def wedge(t):
        a = J.at(t)
        b = poly(t, 1)
        return float(np.sqrt(max((a @ a) * (b @ b) - (a @ b) ** 2, 0.0)))

    w = np.array([wedge(t) for t in curve.grid])
    scale = max(float(np.max(np.linalg.norm(J.values, axis=1))
                      * np.max(np.linalg.norm(curve.velocities, axis=1))), 1e-300)
    if np.max(w) <= tol * scale:
        return EVERYWHERE_PARALLEL
    out = []
    m = curve.m
    for i in range(m + 1):
        left = w[i - 1] if i > 0 else np.inf
        right = w[i + 1] if i < m else np.inf
        if not (w[i] <= left and w[i] <= right):
            continue
        if w[i] <= tol * scale:
            t = float(curve.grid[i])
        else:
            a, b = curve.grid[max(i - 1, 0)], curve.grid[min(i + 1, m)]
            res = minimize_scalar(wedge, bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-10})
            if res.fun > tol * scale:
                continue
            t = float(res.x)
        if not out or abs(t - out[-1]) > 1.0 / m:
            out.append(t)
    return out


# ---------------------------------------------------------------------------
# periodic summation


class SummedField(NamedTuple):
    t: np.ndarray
    values: np.ndarray
    covariant: np.ndarray | None


def iterate_sum_fields(J, T: float, k_star: int, t_star: float, curve=None, samples=None):
    """W¹_t = Σ_{r=0..k*} J_{t+rT} on [0, t*] and W²_t = Σ_{r=0..k*−1} J_{t+rT} on [t*, T].

    Off-grid shifts use the cubic Hermite interpolant of (J, DJ) when the
    field carries rates, otherwise linear interpolation.
    """
    if not (0.0 < T < 1.0) or k_star < 1 or not (0.0 < t_star < T + 1e-12) \
            or abs(k_star * T + t_star - 1.0) > 1e-9:
        raise NotPeriodic(f"inconsistent period data T={T}, k*={k_star}, t*={t_star}")
    if not isinstance(J, FieldAlongCurve):
        J = FieldAlongCurve(curve.grid if curve is not None else np.linspace(0, 1, len(J)), J)
    if curve is not None:
        probe = np.linspace(0.0, 1.0 - T, 7)
        d = wrap_difference(curve.position_at(probe + T) - curve.position_at(probe), curve.periods)
        dv = curve.velocity_at(probe + T) - curve.velocity_at(probe)
        scale = 1.0 + np.max(np.abs(curve.velocities))
        if np.max(np.abs(d)) > 1e-6 * scale or np.max(np.abs(dv)) > 1e-6 * scale:
            raise NotPeriodic("curve does not repeat with period T")
    grid = J.grid if samples is None else np.asarray(samples, dtype=float)
    has_cov = isinstance(J, JacobiSolution)

    def summed(ts, count):
        vals = sum(J.at(np.minimum(ts + r * T, 1.0)) for r in range(count))
        cov = sum(J.DJ_at(np.minimum(ts + r * T, 1.0)) for r in range(count)) if has_cov else None
        return SummedField(ts, vals, cov)

    t1 = grid[grid <= t_star + 1e-12]
    t2 = grid[(grid >= t_star - 1e-12) & (grid <= T + 1e-12)]
    return summed(t1, k_star + 1), summed(t2, k_star)


# ---------------------------------------------------------------------------
# stationary reduction


def _reduced_generator(beta: ScalarField, x0, n0, sdot):
    H = beta.hess(np.r_[np.asarray(x0, float), 0.0])[:n0, :n0]
    M = np.zeros((2 * n0 + 2, 2 * n0 + 2))
    M[:n0, n0:2 * n0] = np.eye(n0)
    M[n0:2 * n0, :n0] = -0.5 * sdot ** 2 * H
    M[2 * n0, 2 * n0 + 1] = 1.0
    return M


def _check_critical(beta, x0, n0):
    grad = beta.grad(np.r_[np.asarray(x0, float), 0.0])[:n0]
    if np.linalg.norm(grad) > 1e-10:
        raise NotCriticalPoint(f"|∇β(x0)| = {np.linalg.norm(grad):.3e}")


def stationary_jacobi(beta: ScalarField, x0, m: int, xi0=None, dxi0=None,
                      sigma0: float = 0.0, dsigma0: float = 0.0, sdot: float = 1.0):
    """Reduced Jacobi system ξ'' + ½ṡ²H^β(x0)ξ = 0, σ'' = 0 along the vertical geodesic.

    The system is linear with constant coefficients, so it is propagated
    exactly with the matrix exponential of its generator.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n0 = len(x0)
    _check_critical(beta, x0, n0)
    xi0 = np.zeros(n0) if xi0 is None else np.atleast_1d(np.asarray(xi0, float))
    dxi0 = np.zeros(n0) if dxi0 is None else np.atleast_1d(np.asarray(dxi0, float))
    M = _reduced_generator(beta, x0, n0, sdot)
    state0 = np.r_[xi0, dxi0, sigma0, dsigma0]
    grid = np.linspace(0.0, 1.0, m + 1)
    states = np.array([expm(M * t) @ state0 for t in grid])
    return states[:, :n0], states[:, 2 * n0]


def stationary_endpoint_map(beta: ScalarField, x0, sdot: float = 1.0) -> np.ndarray:
    """ξ(1) as a linear map of ξ'(0) for ξ(0) = 0."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n0 = len(x0)
    _check_critical(beta, x0, n0)
    E = expm(_reduced_generator(beta, x0, n0, sdot))
    return E[:n0, n0:2 * n0]


# ---------------------------------------------------------------------------
# conformal comparison for lightlike geodesics


@dataclass(frozen=True)
class ConformalComparison:
    base_events: list
    rescaled_events: list
    matched: list
    max_mismatch: float
    rescale_length: float

    def as_dict(self):
        return {"base_events": [float(t) for t in self.base_events],
                "rescaled_events": [float(t) for t in self.rescaled_events],
                "matched": [[float(a), float(b), float(d)] for a, b, d in self.matched],
                "max_mismatch": float(self.max_mismatch),
                "rescale_length": float(self.rescale_length)}


def conformal_conjugate_compare(base: MetricFamily, psi: ScalarField, x0, v0, m: int = 128,
                                kernel_tol: float = 1e-6) -> ConformalComparison:
    """Compare conjugate image points of a null g-geodesic and of its ψg reparameterization.

    The ψg geodesic through the same image curve has dũ/dτ ∝ ψ along the g
    geodesic, so it starts at x0 with velocity v0·L/ψ(x0) where L = ∫ψ dτ.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    energy = float(v0 @ base.jet(x0, 0)[0] @ v0)
    if abs(energy) > 1e-10:
        raise NotLightlike(f"g(v0, v0) = {energy:.3e}")
    curve = integrate_geodesic(base, x0, v0, m)
    poly = curve.interpolant()
    # L = ∫ψ(γ(τ)) dτ by composite Gauss–Legendre on the grid
    gx, gw = np.polynomial.legendre.leggauss(4)
    L = 0.0
    for i in range(m):
        a, b = curve.grid[i], curve.grid[i + 1]
        ts = 0.5 * (a + b) + 0.5 * (b - a) * gx
        L += 0.5 * (b - a) * sum(w * psi.value(poly(t)) for t, w in zip(ts, gw))
    rescaled = ConformalRescale(base, psi)
    v_tilde = v0 * L / psi.value(x0)
    curve2 = integrate_geodesic(rescaled, x0, v_tilde, m)
    ev1 = conjugate_points(base, curve, kernel_tol).events
    ev2 = conjugate_points(rescaled, curve2, kernel_tol).events
    pts2 = [curve2.position_at(e.t) for e in ev2]
    matched = []
    mismatch = 0.0 if len(ev1) == len(ev2) else np.inf
    for e in ev1:
        p1 = curve.position_at(e.t)
        if not pts2:
            mismatch = np.inf
            continue
        d = [float(np.linalg.norm(wrap_difference(p1 - p2, curve.periods))) for p2 in pts2]
        j = int(np.argmin(d))
        matched.append((e.t, ev2[j].t, d[j]))
        mismatch = max(mismatch, d[j])
    return ConformalComparison([e.t for e in ev1], [e.t for e in ev2], matched,
                               float(mismatch), float(L))
