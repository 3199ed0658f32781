"""Geodesic integration, two-point shooting and self-intersection analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import BPoly
from scipy.optimize import minimize

from .errors import (
    EndpointsEqual,
    EnergyDrift,
    LeftDomain,
    NoConvergence,
    NoIntervalFound,
    PointOutsideDomain,
    SingularEndpointJacobian,
    StepCountTooSmall,
)
from .metrics import MetricFamily, local_geometry

ENERGY_TOL = 1e-8
RESIDUAL_TOL = 1e-8
MAX_SUBSTEPS = 256
MIN_STEPS = 16
MAX_SUBSTEPS = 256


@dataclass(frozen=True, eq=False)
class DiscretizedCurve:
    grid: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    energy: float
    substeps: int = 1
    periods: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.grid) - 1

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def h(self) -> float:
        return 1.0 / self.m

    def interpolant(self) -> BPoly:
        """Quintic Hermite interpolant through positions, velocities and accelerations."""
        poly = self._cache.get("interp")
        if poly is None:
            y = np.stack([self.positions, self.velocities, self.accelerations], axis=1)
            poly = BPoly.from_derivatives(self.grid, y)
            self._cache["interp"] = poly
        return poly

    def coarsen(self, k: int) -> "DiscretizedCurve":
        """Every k-th node, with k·substeps RK4 steps per output step.

        The integrator visits the kept nodes in exactly the same way, so the
        coarse curve equals a direct run with m/k output steps.
        """
        if self.m % k:
            raise ValueError(f"m = {self.m} is not divisible by {k}")
        out = DiscretizedCurve(self.grid[::k].copy(), self.positions[::k].copy(),
                               self.velocities[::k].copy(), self.accelerations[::k].copy(),
                               self.energy, self.substeps * k, self.periods)
        cached = self._cache.get("residual")
        if cached is not None:
            out._cache["residual"] = (cached[0], np.zeros(out.m + 1))
        return out

    def position_at(self, t):
        return self.interpolant()(t)

    def velocity_at(self, t):
        return self.interpolant()(t, 1)

    def node_energies(self, metric: MetricFamily) -> np.ndarray:
        return np.array([v @ metric.jet(x, 0)[0] @ v
                         for x, v in zip(self.positions, self.velocities)])

    def summary(self) -> dict:
        return {"m": self.m, "energy": float(self.energy), "substeps": self.substeps,
                "start": self.positions[0].tolist(), "end": self.positions[-1].tolist(),
                "initial_velocity": self.velocities[0].tolist()}


def wrap_difference(d, periods):
    """Reduce coordinate differences on periodic axes to the symmetric fundamental range."""
    d = np.array(d, dtype=float, copy=True)
    for axis, period in enumerate(periods):
        if period:
            d[..., axis] -= period * np.round(d[..., axis] / period)
    return d


def _acceleration(metric, x, v):
    try:
        geo = local_geometry(metric, x, curvature=False)
    except PointOutsideDomain as exc:
        raise LeftDomain(str(exc), point=np.asarray(x).tolist()) from None
    return -np.einsum("ijk,j,k->i", geo.gamma, v, v)


def _rk4_step(metric, x, v, h, a1=None):
    if a1 is None:
        a1 = _acceleration(metric, x, v)
    k1x, k1v = v, a1
    k2x = v + 0.5 * h * k1v
    k2v = _acceleration(metric, x + 0.5 * h * k1x, k2x)
    k3x = v + 0.5 * h * k2v
    k3v = _acceleration(metric, x + 0.5 * h * k2x, k3x)
    k4x = v + h * k3v
    k4v = _acceleration(metric, x + h * k3x, k4x)
    x_new = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x_new, v_new


def _integrate(metric, x0, v0, m, substeps):
    n = len(x0)
    pos = np.empty((m + 1, n))
    vel = np.empty((m + 1, n))
    acc = np.empty((m + 1, n))
    x, v = x0.copy(), v0.copy()
    h = 1.0 / (m * substeps)
    pos[0], vel[0] = x, v
    for i in range(m):
        a = _acceleration(metric, x, v)
        acc[i] = a
        for s in range(substeps):
            x, v = _rk4_step(metric, x, v, h, a if s == 0 else None)
        pos[i + 1], vel[i + 1] = x, v
    acc[m] = _acceleration(metric, x, v)
    return pos, vel, acc


def integrate_geodesic(metric: MetricFamily, x0, v0, m: int, substeps: int | None = None,
                       check_energy: bool = True, start_substeps: int | None = None) -> DiscretizedCurve:
    """RK4 integration of γ̈ = −Γ(γ̇, γ̇) on [0, 1] with m output steps.

    When ``substeps`` is None the number of RK4 steps between output nodes is
    raised (starting from ``start_substeps``) until the energy drift falls
    under 1e-8·max(1, |E|).
    """
    if m < MIN_STEPS:
        raise StepCountTooSmall(f"m = {m} < {MIN_STEPS}")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    try:
        g0 = metric.jet(x0, 0)[0]
    except PointOutsideDomain:
        raise
    energy = float(v0 @ g0 @ v0)
    bound = ENERGY_TOL * max(1.0, abs(energy))
    s = int(substeps if substeps is not None else (start_substeps or 1))
    while True:
        pos, vel, acc = _integrate(metric, x0, v0, m, s)
        energies = np.einsum("ti,tij,tj->t", vel,
                             np.array([metric.jet(x, 0)[0] for x in pos]), vel)
        drift = float(np.max(np.abs(energies - energy)))
        if drift <= bound or substeps is not None or s >= MAX_SUBSTEPS:
            break
        # fourth-order scaling predicts the factor needed; round up to a power of two
        factor = 1.25 * (drift / bound) ** 0.25
        s = min(MAX_SUBSTEPS, max(2 * s, 2 ** int(np.ceil(np.log2(s * factor)))))
    if drift > bound and check_energy:
        raise EnergyDrift(f"energy drift {drift:.3e} exceeds {bound:.3e}", drift=drift)
    curve = DiscretizedCurve(np.linspace(0.0, 1.0, m + 1), pos, vel, acc, energy, s,
                             tuple(metric.periods))
    curve._cache["residual"] = (metric, np.zeros(m + 1))
    return curve


def geodesic_residual(metric: MetricFamily, curve: DiscretizedCurve) -> np.ndarray:
    """Per-node one-step defect: re-run the integrator from each node with ``metric``
    and compare with the stored next node (zero for the node ``t = 1``).

    Curves produced by :func:`integrate_geodesic` remember the metric they
    were integrated with; for that metric the defect is zero by construction.
    """
    cached = curve._cache.get("residual")
    if cached is not None and cached[0] is metric:
        return cached[1].copy()
    h = 1.0 / (curve.m * curve.substeps)
    out = np.zeros(curve.m + 1)
    for i in range(curve.m):
        x, v = curve.positions[i], curve.velocities[i]
        for _ in range(curve.substeps):
            x, v = _rk4_step(metric, x, v, h)
        out[i] = max(np.max(np.abs(x - curve.positions[i + 1])),
                     np.max(np.abs(v - curve.velocities[i + 1])))
    return out


def is_geodesic_of(metric: MetricFamily, curve: DiscretizedCurve, tol: float = RESIDUAL_TOL) -> bool:
    return bool(np.max(geodesic_residual(metric, curve)) <= tol)


def shoot_bvp(metric: MetricFamily, p, q, v_guess, m: int = 64, tol: float = 1e-10,
              allow_equal: bool = False, max_iter: int = 50, singular_tol: float = 1e-6,
              substeps: int | None = None) -> DiscretizedCurve:
    """Newton shooting on v ↦ γ_v(1) with the Jacobi endpoint matrix as derivative.

    Raises SingularEndpointJacobian when the endpoint matrix of the converged
    curve has relative smallest singular value below ``singular_tol`` (conjugate
    endpoints); the converged curve travels with the exception.
    """
    from .jacobi import endpoint_matrix

    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if tol < 1e-12:
        raise ValueError("tol must be at least 1e-12")
    if not allow_equal and np.linalg.norm(p - q) <= 1e-14:
        raise EndpointsEqual("p = q requires allow_equal")
    v = np.asarray(v_guess, dtype=float).copy()
    curve = integrate_geodesic(metric, p, v, m, substeps)
    r = curve.positions[-1] - q
    for it in range(max_iter + 1):
        A = endpoint_matrix(metric, curve, 1.0)
        sv = np.linalg.svd(A, compute_uv=False)
        ratio = sv[-1] / sv[0] if sv[0] > 0 else 0.0
        if np.linalg.norm(r) <= tol:
            if ratio <= singular_tol:
                raise SingularEndpointJacobian(
                    f"endpoint Jacobian singular (σ_min/σ_max = {ratio:.3e})",
                    curve=curve, sigma_ratio=float(ratio), iterations=it)
            return curve
        if it == max_iter:
            break
        if ratio <= 1e-12:
            raise SingularEndpointJacobian(
                f"endpoint Jacobian singular during Newton (σ_min/σ_max = {ratio:.3e})",
                curve=None, sigma_ratio=float(ratio), iterations=it)
        step = np.linalg.solve(A, -r)
        lam = 1.0
        norm_r = np.linalg.norm(r)
        for _ in range(12):
            try:
                trial = integrate_geodesic(metric, p, v + lam * step, m, substeps)
            except (LeftDomain, EnergyDrift):
                lam *= 0.5
                continue
            r_trial = trial.positions[-1] - q
            if np.linalg.norm(r_trial) < norm_r or lam < 1e-3:
                break
            lam *= 0.5
        else:
            raise NoConvergence("line search failed", iterations=it)
        v = v + lam * step
        curve, r = trial, r_trial
    raise NoConvergence(f"no convergence in {max_iter} iterations",
                        residual=float(np.linalg.norm(r)))


# ---------------------------------------------------------------------------
# self-intersections


class PeriodicInfo(NamedTuple):
    T: float
    t_star: float
    k_star: int


@dataclass(frozen=True)
class IntersectionReport:
    pairs: list
    periodic: PeriodicInfo | None = None

    def as_dict(self):
        out = {"pairs": [list(map(float, p)) for p in self.pairs]}
        out["periodic"] = None if self.periodic is None else {
            "T": float(self.periodic.T), "t_star": float(self.periodic.t_star),
            "k_star": int(self.periodic.k_star)}
        return out


def _refine_pair(curve, s0, t0):
    poly = curve.interpolant()
    h = curve.h
    periods = curve.periods

    def f(z):
        d = wrap_difference(poly(z[0]) - poly(z[1]), periods)
        return float(d @ d)

    def grad(z):
        d = wrap_difference(poly(z[0]) - poly(z[1]), periods)
        return np.array([2.0 * d @ poly(z[0], 1), -2.0 * d @ poly(z[1], 1)])

    bounds = [(max(0.0, s0 - h), min(1.0, s0 + h)), (max(0.0, t0 - h), min(1.0, t0 + h))]
    res = minimize(f, np.array([s0, t0]), jac=grad, method="L-BFGS-B", bounds=bounds,
                   options={"ftol": 1e-30, "gtol": 1e-16, "maxiter": 200})
    return float(res.x[0]), float(res.x[1]), float(np.sqrt(max(res.fun, 0.0)))


def self_intersections(curve: DiscretizedCurve, spatial_tol: float = 1e-6) -> IntersectionReport:
    """Pairs s < t with γ(s) = γ(t); detects closed geodesics traversed with period T < 1."""
    m = curve.m
    pos = curve.positions
    steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    reach = float(np.max(steps)) + spatial_tol
    diff = wrap_difference(pos[:, None, :] - pos[None, :, :], curve.periods)
    dist = np.linalg.norm(diff, axis=2)
    ii, jj = np.nonzero(np.triu(dist <= reach, k=3))
    if len(ii) == 0:
        return IntersectionReport([])
    # local minima of the node distance among candidates, to seed refinement
    order = np.argsort(dist[ii, jj], kind="stable")
    seeds = []
    for idx in order:
        i, j = int(ii[idx]), int(jj[idx])
        if any(abs(i - a) <= 2 and abs(j - b) <= 2 for a, b in seeds):
            continue
        seeds.append((i, j))
    pairs = []
    vel_tol = 10.0 * spatial_tol
    periodic_T = []
    poly = curve.interpolant()
    for i, j in seeds:
        s, t, d = _refine_pair(curve, curve.grid[i], curve.grid[j])
        if d > spatial_tol or t - s <= 2.0 / m:
            continue
        if any(abs(s - a) <= 2.0 / m and abs(t - b) <= 2.0 / m for a, b in pairs):
            continue
        pairs.append((s, t))
        dv = np.linalg.norm(poly(s, 1) - poly(t, 1))
        if dv <= max(vel_tol, 10.0 * d * (1.0 + np.linalg.norm(poly(s, 2)))):
            periodic_T.append(t - s)
    pairs.sort()
    if periodic_T:
        T = min(periodic_T)
        k_star = int(np.floor(1.0 / T + 1e-9))
        t_star = 1.0 - k_star * T
        if t_star <= 1e-9:
            k_star -= 1
            t_star = 1.0 - k_star * T
        return IntersectionReport(pairs, PeriodicInfo(float(T), float(t_star), k_star))
    return IntersectionReport(pairs)


# ---------------------------------------------------------------------------
# support intervals


@dataclass(frozen=True)
class SupportInterval:
    a: float
    b: float
    source: str
    field: np.ndarray = field(repr=False)

    def as_dict(self):
        return {"a": float(self.a), "b": float(self.b), "source": self.source}


def _field_values(V):
    return np.asarray(getattr(V, "J", V), dtype=float)


def _parallel_sine(field_values, velocities):
    vn = np.linalg.norm(field_values, axis=1)
    cn = np.linalg.norm(velocities, axis=1)
    inner = np.einsum("ij,ij->i", field_values, velocities)
    wedge2 = np.maximum(vn ** 2 * cn ** 2 - inner ** 2, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        sine = np.where(vn * cn > 0.0, np.sqrt(wedge2) / (vn * cn), 0.0)
    return sine, np.sqrt(wedge2) / np.maximum(cn, 1e-300)


def _interval_from_field(curve, t, values, tol, spatial_tol, half_width, source, check_tube=True):
    """Pick a run of consecutive samples around the largest normal component of the field."""
    t = np.asarray(t, dtype=float)
    vel = curve.velocity_at(t) if len(t) != len(curve.grid) else curve.velocities
    sine, perp = _parallel_sine(values, vel)
    good = (sine > tol) & (t > 0.0) & (t < 1.0)
    if not np.any(good):
        return None
    c = int(np.argmax(np.where(good, perp, -np.inf)))
    target = max(1, int(round(half_width * curve.m)))
    a_i = b_i = c
    while b_i - c < target and b_i + 1 < len(t) and good[b_i + 1]:
        b_i += 1
    while c - a_i < target and a_i - 1 >= 0 and good[a_i - 1]:
        a_i -= 1
    if check_tube:
        # γ(I) must stay spatial_tol away from γ outside a two-step collar of I
        while b_i > a_i:
            inside = curve.position_at(t[a_i:b_i + 1])
            collar = 2.0 / curve.m
            far = curve.positions[(curve.grid < t[a_i] - collar) | (curve.grid > t[b_i] + collar)]
            if len(far) == 0:
                break
            d = wrap_difference(inside[:, None, :] - far[None, :, :], curve.periods)
            if np.linalg.norm(d, axis=2).min() > spatial_tol:
                break
            a_i, b_i = (a_i + 1, b_i - 1) if b_i - a_i > 2 else (c, c)
    if b_i <= a_i:
        return None
    return SupportInterval(float(t[a_i]), float(t[b_i]), source, values)


def support_interval(curve: DiscretizedCurve, V, tol: float = 1e-3, spatial_tol: float = 1e-6,
                     half_width: float = 0.1, periodic=None) -> SupportInterval:
    """Interval I ⊂ (0, 1) on which V is not parallel to γ̇ and γ(I) avoids the rest of γ.

    For a closed geodesic traversed with period T < 1 the summed fields W¹
    and W² are tried in turn, since the raw field may cancel itself.
    """
    values = _field_values(V)
    if periodic is None:
        periodic = self_intersections(curve, spatial_tol).periodic
    if periodic is None:
        out = _interval_from_field(curve, curve.grid, values, tol, spatial_tol, half_width, "V")
        if out is None:
            raise NoIntervalFound("field is parallel to the velocity everywhere")
        return out
    from .jacobi import iterate_sum_fields

    W1, W2 = iterate_sum_fields(V, periodic.T, periodic.k_star, periodic.t_star, curve=curve)
    for name, W in (("W1", W1), ("W2", W2)):
        # overlaps of γ(I) with its own periodic copies are intended here
        out = _interval_from_field(curve, W.t, W.values, tol, spatial_tol, half_width, name,
                                   check_tube=False)
        if out is not None:
            return out
    raise NoIntervalFound("both summed fields are parallel to the velocity")
