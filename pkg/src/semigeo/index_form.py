"""Hat-basis discretization of the index form and its kernel.

Fields vanishing at both ends are expanded in piecewise-linear hat functions
on the interior nodes; coefficient vectors are node-major, i.e. entry
``(i - 1) * n + a`` multiplies the hat at node i in coordinate direction a.
Every element integral uses two-point Gauss quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NotAGeodesic, NotCriticalPoint
from .fields import ScalarField
from .geodesics import RESIDUAL_TOL, DiscretizedCurve, geodesic_residual
from .jacobi import FieldAlongCurve, endpoint_matrix, fundamental_solution
from .metrics import FlatEuclidean, MetricFamily, local_geometry

GAUSS_X = np.array([-1.0, 1.0]) / np.sqrt(3.0)
GAUSS_W = np.array([1.0, 1.0])
RATIO_WINDOW = (3.0, 5.0)


@dataclass(frozen=True)
class PathBasis:
    grid: np.ndarray
    n: int

    @classmethod
    def uniform(cls, m: int, n: int):
        return cls(np.linspace(0.0, 1.0, m + 1), n)

    @property
    def m(self):
        return len(self.grid) - 1

    @property
    def dim(self):
        return self.n * (self.m - 1)

    def nodal(self, coeffs) -> np.ndarray:
        """(m+1)×n nodal values of the field with the given coefficients."""
        out = np.zeros((self.m + 1, self.n))
        out[1:-1] = np.asarray(coeffs, dtype=float).reshape(self.m - 1, self.n)
        return out

    def coefficients(self, nodal) -> np.ndarray:
        return np.asarray(nodal, dtype=float)[1:-1].reshape(-1).copy()

    def field(self, coeffs) -> FieldAlongCurve:
        return FieldAlongCurve(self.grid, self.nodal(coeffs), mode="linear")


@dataclass(frozen=True, eq=False)
class IndexFormMatrix:
    A: np.ndarray
    G: np.ndarray
    phi_part: np.ndarray
    e_part: np.ndarray
    basis: PathBasis
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.A.shape[0]

    def eigen(self):
        """Generalized eigenpairs of A v = λ G v, ordered by |λ|."""
        cached = self.meta.get("_eigen")
        if cached is None:
            lam, vec = scipy.linalg.eigh(self.A, self.G)
            order = np.argsort(np.abs(lam), kind="stable")
            cached = (lam[order], vec[:, order])
            self.meta["_eigen"] = cached
        return cached

    def min_abs_eigenvalue(self) -> float:
        return float(abs(self.eigen()[0][0]))


def _element_maps(n, h, t_rel):
    """Value and rate maps from the 2n element unknowns to V and V̇ at a point."""
    eye = np.eye(n)
    Bv = np.hstack([(1.0 - t_rel) * eye, t_rel * eye])
    Bd = np.hstack([-eye / h, eye / h])
    return Bv, Bd


def _scatter(M, local, i, n, m):
    """Add a 2n×2n element block for nodes (i, i+1), dropping boundary nodes."""
    idx = []
    loc = []
    for j, node in enumerate((i, i + 1)):
        if 1 <= node <= m - 1:
            idx.extend(range((node - 1) * n, node * n))
            loc.extend(range(j * n, (j + 1) * n))
    if idx:
        M[np.ix_(idx, idx)] += local[np.ix_(loc, loc)]


def assemble_index_form(metric: MetricFamily, curve: DiscretizedCurve, gR: MetricFamily | None = None,
                        basis: PathBasis | None = None, check_geodesic: bool = True) -> IndexFormMatrix:
    """Index form ∫ g(DV, DW) + g(R(γ̇, V)γ̇, W) and the auxiliary inner product in the hat basis."""
    n, m = curve.dim, curve.m
    if basis is None:
        basis = PathBasis(curve.grid, n)
    if gR is None:
        gR = FlatEuclidean(n, domain=metric.domain)
    if check_geodesic:
        res = float(np.max(geodesic_residual(metric, curve)))
        if res > RESIDUAL_TOL:
            raise NotAGeodesic(f"geodesic residual {res:.3e} exceeds {RESIDUAL_TOL:.0e}", residual=res)
    dim = basis.dim
    A_phi = np.zeros((dim, dim))
    A_e = np.zeros((dim, dim))
    G = np.zeros((dim, dim))
    poly = curve.interpolant()
    h = 1.0 / m
    for i in range(m):
        a = curve.grid[i]
        loc_phi = np.zeros((2 * n, 2 * n))
        loc_e = np.zeros((2 * n, 2 * n))
        loc_G = np.zeros((2 * n, 2 * n))
        for xq, wq in zip(GAUSS_X, GAUSS_W):
            t_rel = 0.5 * (1.0 + xq)
            t = a + h * t_rel
            w = 0.5 * h * wq
            x, v = poly(t), poly(t, 1)
            geo = local_geometry(metric, x)
            geoR = local_geometry(gR, x, curvature=False)
            Bv, Bd = _element_maps(n, h, t_rel)
            D = Bd + np.einsum("ijk,j->ik", geo.gamma, v) @ Bv
            DR = Bd + np.einsum("ijk,j->ik", geoR.gamma, v) @ Bv
            rv = np.einsum("ijkl,j,k->il", geo.riemann, v, v)
            gq = rv.T @ geo.g
            gq = 0.5 * (gq + gq.T)
            phi = DR.T @ geo.g @ DR
            loc_phi += w * phi
            loc_e += w * ((D.T @ geo.g @ D - phi) + Bv.T @ gq @ Bv)
            loc_G += w * (DR.T @ geoR.g @ DR)
        _scatter(A_phi, loc_phi, i, n, m)
        _scatter(A_e, loc_e, i, n, m)
        _scatter(G, loc_G, i, n, m)
    sym = lambda M: 0.5 * (M + M.T)
    A_phi, A_e, G = sym(A_phi), sym(A_e), sym(G)
    return IndexFormMatrix(A_phi + A_e, G, A_phi, A_e, basis,
                           {"metric": metric.kind, "gR": gR.kind, "m": m})


class KernelResult(NamedTuple):
    dimension: int
    fields: list
    eigenvalues: np.ndarray
    refined_eigenvalues: np.ndarray | None
    ratios: np.ndarray | None
    extrapolated: np.ndarray | None
    coefficients: list


def _fix_sign(c):
    k = int(np.argmax(np.abs(c)))
    return c if c[k] >= 0 else -c


def kernel(ifm: IndexFormMatrix, kernel_tol: float = 1e-2,
           refined: IndexFormMatrix | None = None, exact_tol: float = 1e-12) -> KernelResult:
    """Near-kernel of the pencil (A, G).

    Candidates have |λ| < kernel_tol.  With ``refined`` (the same problem on the
    doubled grid) a candidate is kept only if λ(m)/λ(2m) lies in [3, 5], the
    signature of a discretized continuum kernel; the Richardson value
    (4λ(2m) − λ(m))/3 is reported alongside.
    """
    lam, vec = ifm.eigen()
    cand = np.nonzero(np.abs(lam) < kernel_tol)[0]
    ratios = lam2 = extrap = None
    keep = list(cand)
    if refined is not None and len(cand):
        lam_r = refined.eigen()[0]
        lam2 = lam_r[:len(cand)]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = lam[cand] / lam2
        extrap = (4.0 * lam2 - lam[cand]) / 3.0
        keep = [k for k, r in zip(cand, ratios)
                if abs(lam[k]) <= exact_tol or RATIO_WINDOW[0] <= r <= RATIO_WINDOW[1]]
    coeffs = [_fix_sign(vec[:, k] / np.sqrt(vec[:, k] @ ifm.G @ vec[:, k])) for k in keep]
    fields = [ifm.basis.field(c) for c in coeffs]
    return KernelResult(len(keep), fields, lam[cand], lam2, ratios, extrap, coeffs)


class JacobiMatch(NamedTuple):
    cosine: float
    endpoint_ratio: float
    initial_derivative: np.ndarray


def kernel_jacobi_check(metric: MetricFamily, curve: DiscretizedCurve, fld: FieldAlongCurve) -> JacobiMatch:
    """Fit the Jacobi field J_w = A(t)w with J_w(0) = 0 to a kernel field and compare."""
    sol = fundamental_solution(metric, curve)
    grid = curve.grid
    values = fld.at(grid) if fld.values.shape[0] != len(grid) else fld.values
    stack = sol.J.reshape(-1, curve.dim)
    w, *_ = np.linalg.lstsq(stack, values.reshape(-1), rcond=None)
    J = sol.J @ w
    cos = float(np.sum(J * values) / (np.linalg.norm(J) * np.linalg.norm(values)))
    norm = float(np.sqrt(np.mean(np.sum(J ** 2, axis=1))))
    end = float(np.linalg.norm(endpoint_matrix(metric, curve, 1.0) @ w))
    return JacobiMatch(cos, end / norm, w)


class FredholmReport(NamedTuple):
    split_residual: float
    e_part_zero: bool
    singular_values: np.ndarray
    decay_exponent: float | None
    constant: float | None
    passes: bool

    def as_dict(self):
        return {"split_residual": self.split_residual, "e_part_zero": self.e_part_zero,
                "decay_exponent": self.decay_exponent, "constant": self.constant,
                "passes": self.passes}


def fredholm_split_check(ifm: IndexFormMatrix, exponent_threshold: float = -0.9) -> FredholmReport:
    """Split residual and the decay of the G-singular values of the derivative-free part."""
    resid = float(np.max(np.abs(ifm.A - ifm.phi_part - ifm.e_part)))
    if not np.any(ifm.e_part):
        return FredholmReport(resid, True, np.zeros(0), None, 0.0, resid <= 1e-10)
    L = np.linalg.cholesky(ifm.G)
    Li = scipy.linalg.solve_triangular(L, np.eye(ifm.dim), lower=True)
    S = Li @ ifm.e_part @ Li.T
    sv = np.linalg.svd(S, compute_uv=False)
    k = np.arange(1, len(sv) + 1)
    half = max(2, len(sv) // 2)
    mask = (k <= half) & (sv > 1e-14 * sv[0])
    slope, intercept = np.polyfit(np.log(k[mask]), np.log(sv[mask]), 1)
    C = float(np.max(sv[mask] * k[mask]))
    return FredholmReport(resid, False, sv, float(slope), C,
                          resid <= 1e-10 and slope <= exponent_threshold)


def stationary_index_form(beta: ScalarField, x0, m: int, sdot: float = 1.0) -> IndexFormMatrix:
    """Second variation of the static metric 𝔤 − β ds² (flat 𝔤) along the vertical geodesic.

    Unknowns per node are (ξ_1, ..., ξ_n0, σ).  Along γ(t) = (x0, s0 + ṡt) all
    coefficients are frozen at x0, and two-point Gauss integrates the
    resulting quadratic element integrands exactly.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n0 = len(x0)
    n = n0 + 1
    xfull = np.r_[x0, 0.0]
    b, grad, hess = beta.jet(xfull, 2)
    grad0 = grad[:n0]
    if np.linalg.norm(grad0) > 1e-10:
        raise NotCriticalPoint(f"|∇β(x0)| = {np.linalg.norm(grad0):.3e}")
    H = hess[:n0, :n0]
    basis = PathBasis.uniform(m, n)
    dim = basis.dim
    A_phi = np.zeros((dim, dim))
    A_e = np.zeros((dim, dim))
    G = np.zeros((dim, dim))
    h = 1.0 / m
    At = np.eye(n)
    At[n0, n0] = -b
    zero_order = np.zeros((n, n))
    zero_order[:n0, :n0] = -0.5 * sdot ** 2 * H
    cross = np.zeros((n, n))  # (rate of σ) × (value of ξ)
    cross[n0, :n0] = -sdot * grad0
    for i in range(m):
        loc_phi = np.zeros((2 * n, 2 * n))
        loc_e = np.zeros((2 * n, 2 * n))
        loc_G = np.zeros((2 * n, 2 * n))
        for xq, wq in zip(GAUSS_X, GAUSS_W):
            t_rel = 0.5 * (1.0 + xq)
            w = 0.5 * h * wq
            Bv, Bd = _element_maps(n, h, t_rel)
            loc_phi += w * (Bd.T @ At @ Bd)
            loc_e += w * (Bv.T @ zero_order @ Bv + Bd.T @ cross @ Bv + Bv.T @ cross.T @ Bd)
            loc_G += w * (Bd.T @ Bd)
        _scatter(A_phi, loc_phi, i, n, m)
        _scatter(A_e, loc_e, i, n, m)
        _scatter(G, loc_G, i, n, m)
    sym = lambda M: 0.5 * (M + M.T)
    A_phi, A_e, G = sym(A_phi), sym(A_e), sym(G)
    return IndexFormMatrix(A_phi + A_e, G, A_phi, A_e, basis,
                           {"metric": "standard-stationary", "m": m, "n0": n0})


def block_kernel_dimension(ifm: IndexFormMatrix, components, kernel_tol: float,
                           refined: IndexFormMatrix | None = None) -> int:
    """Kernel dimension of the sub-pencil on the listed per-node components."""
    def restrict(M, f):
        n = f.basis.n
        idx = [(i * n + a) for i in range(f.basis.m - 1) for a in components]
        return M[np.ix_(idx, idx)]

    def sub(f):
        return IndexFormMatrix(restrict(f.A, f), restrict(f.G, f), restrict(f.phi_part, f),
                               restrict(f.e_part, f), PathBasis(f.basis.grid, len(components)), {})

    return kernel(sub(ifm), kernel_tol, None if refined is None else sub(refined)).dimension
