"""Scenario pipeline: shoot, Jacobi, index form, perturb, sweep.

Every stage writes a plain dict into the report.  A typed geometry error in
one stage is recorded there; stages that need its output are then marked
skipped, while independent stages still run.
"""

from __future__ import annotations

import time

import numpy as np

from . import __version__
from .errors import GeometryError, SingularEndpointJacobian
from .fields import CosineField
from .geodesics import integrate_geodesic, self_intersections, shoot_bvp, support_interval
from .hyperbolicity import (AlphaBetaPair, build_galphabeta, hyperbolicity_check,
                            lambda_lipschitz_property, seminorms)
from .index_form import (assemble_index_form, block_kernel_dimension, fredholm_split_check, kernel,
                         kernel_jacobi_check, stationary_index_form)
from .jacobi import (conformal_conjugate_compare, conjugate_points, jacobi_solve,
                     stationary_endpoint_map, stationary_jacobi)
from .perturbation import (bump_tensor, break_degeneracy_sweep, conformal_bump, random_general_perturbation,
                           random_stationary_perturbation, split_bump, surjectivity_criterion,
                           velocity_profile)
from .report import SCHEMA, SCHEMA_VERSION
from .scenario import Scenario

CAUSAL_CUTOFF = 1e-10
FALLBACK_OFFSET = 1e-3


def causal_character(energy: float) -> str:
    if energy > CAUSAL_CUTOFF:
        return "spacelike"
    if energy < -CAUSAL_CUTOFF:
        return "timelike"
    return "lightlike"


class _Skip(Exception):
    pass


class _Run:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.metric = sc.metric
        self.rng = np.random.default_rng(sc.seed)
        self.curve = None
        self.ifm = None
        self.ker = None
        self.smooth_fields = []
        self.certified = None
        self.periodic = None

    # -- stages --------------------------------------------------------------

    def geodesic(self):
        sc, g, m = self.sc, self.metric, self.sc.grid["m"]
        out = {}
        if sc.endpoints is not None:
            e = sc.endpoints
            try:
                self.curve = shoot_bvp(g, e["p"], e["q"], e["v_guess"], m=m,
                                       allow_equal=e["allow_equal"])
            except SingularEndpointJacobian as exc:
                out["finding"] = {"code": exc.code, "message": str(exc),
                                  "sigma_ratio": exc.details.get("sigma_ratio")}
                if exc.curve is not None:
                    self.curve = exc.curve
                    out["finding"]["curve"] = "converged degenerate geodesic"
                else:
                    self.curve = self._fallback_shoot(e, m)
                    out["finding"]["curve"] = f"fallback shoot to q offset by {FALLBACK_OFFSET}"
        else:
            self.curve = integrate_geodesic(g, sc.initial["x0"], sc.initial["v0"], m)
        c = self.curve
        inter = self_intersections(c, sc.grid["spatial_tol"])
        self.periodic = inter.periodic
        out.update({"energy": c.energy, "causal_character": causal_character(c.energy),
                    "m": c.m, "substeps": c.substeps, "start": c.positions[0], "end": c.positions[-1],
                    "initial_velocity": c.velocities[0], "self_intersections": inter.as_dict()})
        return out

    def _fallback_shoot(self, e, m):
        q = np.asarray(e["q"], float)
        offset = np.zeros_like(q)
        offset[0] = FALLBACK_OFFSET
        near = shoot_bvp(self.metric, e["p"], q + offset, e["v_guess"], m=m)
        return integrate_geodesic(self.metric, e["p"], near.velocities[0], m)

    def conjugate(self):
        self._need_curve()
        rep = conjugate_points(self.metric, self.curve, self.sc.grid["conjugate_tol"])
        return rep.as_dict()

    def index_form(self):
        self._need_curve()
        self.ifm = assemble_index_form(self.metric, self.curve)
        lam = self.ifm.eigen()[0]
        fr = fredholm_split_check(self.ifm)
        return {"dim": self.ifm.dim, "min_abs_eigenvalue": float(abs(lam[0])),
                "eigenvalues_smallest": lam[:4], "negative_count": int(np.sum(lam < 0)),
                "fredholm": fr.as_dict()}

    def kernel(self):
        self._need_curve()
        if self.ifm is None:
            self.ifm = assemble_index_form(self.metric, self.curve)
        c = self.curve
        fine = integrate_geodesic(self.metric, c.positions[0], c.velocities[0], 2 * c.m,
                                  start_substeps=max(1, c.substeps // 2))
        refined = assemble_index_form(self.metric, fine)
        self.ker = kernel(self.ifm, self.sc.grid["kernel_tol"], refined)
        checks = []
        self.smooth_fields = []
        for fld in self.ker.fields:
            jm = kernel_jacobi_check(self.metric, c, fld)
            checks.append({"cosine": jm.cosine, "endpoint_ratio": jm.endpoint_ratio,
                           "initial_derivative": jm.initial_derivative})
            self.smooth_fields.append(jacobi_solve(self.metric, c, np.zeros(c.dim), jm.initial_derivative))
        k = self.ker
        return {"dimension": k.dimension, "candidate_eigenvalues": k.eigenvalues,
                "refined_eigenvalues": k.refined_eigenvalues, "ratios": k.ratios,
                "extrapolated": k.extrapolated, "jacobi_checks": checks}

    def _candidates(self, cls):
        sc, g, c = self.sc, self.metric, self.curve
        p = sc.perturbation
        if cls == "stationary":
            if g.kind != "standard-stationary":
                raise _Skip("stationary class needs a standard-stationary metric")
            x0 = c.positions[0][:g.n0]
            lo, hi = g.domain.lower[-1], g.domain.upper[-1]
            return [random_stationary_perturbation(self.rng, x0, (lo, hi))
                    for _ in range(p["candidates"])]
        out = []
        for J in self.smooth_fields:
            I = support_interval(c, J, spatial_tol=sc.grid["spatial_tol"],
                                 half_width=p["half_width"], periodic=self.periodic)
            span = (I.a, I.b)
            if cls == "general":
                prof = velocity_profile(c, g, span, p["amplitude"], p["power"])
                out.append(bump_tensor(c, span, J, prof, p["tube_radius"],
                                       sc.grid["spatial_tol"], self.periodic))
            elif cls == "conformal":
                out.append(conformal_bump(c, span, J, g, p["tube_radius"], p["amplitude"],
                                          spatial_tol=sc.grid["spatial_tol"], periodic=self.periodic))
            elif cls == "split":
                if g.kind != "split-product":
                    raise _Skip("split class needs a split-product metric")
                out.append(split_bump(c, span, J, g.n1, tube_radius=p["tube_radius"],
                                      amplitude=p["amplitude"], spatial_tol=sc.grid["spatial_tol"],
                                      periodic=self.periodic))
        if cls == "general":
            for _ in range(p["random_candidates"]):
                centre = c.position_at(float(self.rng.uniform(0.2, 0.8)))
                out.append(random_general_perturbation(self.rng, centre, spread=0.2))
        return out

    def surjectivity(self):
        self._need_kernel()
        if self.ker.dimension == 0:
            raise _Skip("empty kernel: the geodesic is nondegenerate, transversality holds vacuously")
        classes = {}
        for cls in self.sc.perturbation["classes"]:
            try:
                cands = self._candidates(cls)
                v = surjectivity_criterion(self.ker.fields, cands, self.metric, self.curve,
                                           self.sc.grid["quadrature_tol"])
                entry = v.as_dict()
                entry["candidates"] = [h.describe() for h in cands]
                classes[cls] = entry
                if self.certified is None and v.overall == "transversal" and cls != "stationary":
                    self.certified = (cls, cands[0])
            except _Skip as exc:
                classes[cls] = {"status": "skipped", "reason": str(exc)}
            except GeometryError as exc:
                classes[cls] = {"status": "error", "code": exc.code, "message": str(exc)}
        return {"classes": classes}

    def sweep(self):
        if not self.sc.eps:
            raise _Skip("no eps values")
        if self.certified is None:
            raise _Skip("no certified perturbation to sweep")
        cls, h = self.certified
        rows = break_degeneracy_sweep(self.metric, self.curve, h, self.sc.eps,
                                      self.sc.grid["kernel_tol"])
        return {"class": cls, "rows": [r.as_dict() for r in rows]}

    def conformal(self):
        sc = self.sc
        g = self.metric
        out = []
        for i in range(sc.conformal["count"]):
            b = float(self.rng.uniform(0.1, 0.3))
            k = self.rng.normal(0.0, 0.5, g.dim)
            phase = float(self.rng.uniform(0.0, 2.0 * np.pi))
            psi = CosineField(g.dim, 1.0, b, k, phase)
            comp = conformal_conjugate_compare(g, psi, sc.initial["x0"], sc.initial["v0"],
                                               sc.conformal["m"], sc.grid["conjugate_tol"])
            out.append({"psi": psi.describe(), **comp.as_dict()})
        worst = max(c["max_mismatch"] for c in out) if out else 0.0
        return {"comparisons": out, "max_mismatch": worst}

    def hyperbolic(self):
        g, h = self.metric, self.sc.hyperbolic
        pair = AlphaBetaPair(g.g0, g.alpha, g.beta, h["base_point"])
        build_galphabeta(pair, seed=self.sc.seed)
        axes = [np.linspace(lo, hi, h["sigma_points"])
                for lo, hi in zip(h["sigma_lower"], h["sigma_upper"])]
        sigma = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))
        chk = hyperbolicity_check(pair, sigma, h["n_max"], h["s_per_unit"])
        ss = np.linspace(-h["n_max"], h["n_max"], 2 * h["n_max"] * h["s_per_unit"] + 1)
        sn = seminorms(pair, [np.r_[x, s] for x in sigma for s in ss])
        lip = lambda_lipschitz_property(h["lipschitz_samples"], self.sc.seed)
        return {"check": chk.as_dict(), "seminorms": sn.as_dict(),
                "lipschitz": {**lip._asdict(), "passed": lip.passed}}

    def counterexample(self):
        g, m = self.metric, self.sc.grid["m"]
        x0 = self._vertical_point()
        n0 = g.n0
        f1 = stationary_index_form(g.beta, x0, m)
        f2 = stationary_index_form(g.beta, x0, 2 * m)
        ker = kernel(f1, self.sc.grid["kernel_tol"], f2)
        E = stationary_endpoint_map(g.beta, x0)
        _, s, vt = np.linalg.svd(E)
        w = vt[-1]
        xi, _ = stationary_jacobi(g.beta, x0, m, dxi0=w)
        cosines = []
        for fld in ker.fields:
            v = fld.values[:, :n0]
            cosines.append(float(abs(np.sum(v * xi)) / (np.linalg.norm(v) * np.linalg.norm(xi))))
        return {"dimension": ker.dimension, "eigenvalues": ker.eigenvalues,
                "ratios": ker.ratios, "extrapolated": ker.extrapolated,
                "xi_block_dimension": block_kernel_dimension(f1, list(range(n0)),
                                                             self.sc.grid["kernel_tol"], f2),
                "sigma_block_dimension": block_kernel_dimension(f1, [n0], self.sc.grid["kernel_tol"], f2),
                "reduced_endpoint_singular_values": s, "cosine_to_reduced_jacobi": cosines}

    # -- helpers -------------------------------------------------------------

    def _vertical_point(self):
        sc, n0 = self.sc, self.metric.n0
        if sc.endpoints is not None:
            return sc.endpoints["p"][:n0]
        if sc.initial is not None:
            return sc.initial["x0"][:n0]
        return [0.0] * n0

    def _need_curve(self):
        if self.curve is None:
            raise _Skip("no geodesic available")

    def _need_kernel(self):
        if self.ker is None:
            raise _Skip("kernel stage did not run")


def run_pipeline(sc: Scenario, stages=None) -> dict:
    """Run the requested stages (default: the scenario's own list) and return the report."""
    run = _Run(sc)
    stages = tuple(stages) if stages is not None else sc.stages
    results = {}
    timing = {}
    t_all = time.perf_counter()
    for name in stages:
        t0 = time.perf_counter()
        try:
            res = getattr(run, name)()
            results[name] = {"status": "ok", **res}
        except _Skip as exc:
            results[name] = {"status": "skipped", "reason": str(exc)}
        except GeometryError as exc:
            results[name] = {"status": "error", "code": exc.code, "message": str(exc)}
        timing[name] = time.perf_counter() - t0
    timing["total"] = time.perf_counter() - t_all
    return {"schema": SCHEMA, "schema_version": SCHEMA_VERSION, "artifact_version": __version__,
            "seed": sc.seed, "scenario": sc.echo(), "stages": results, "timing": timing}
