"""End-to-end acceptance checks, one per numbered criterion.

Each ``check_N`` returns (passed, detail).  Under pytest every check is a
test and a PASS/FAIL line is written to the terminal; run the file directly
to get the same lines without pytest.
"""

from __future__ import annotations

import functools
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad

from semigeo.errors import SingularEndpointJacobian
from semigeo.fields import QuadraticField
from semigeo.geodesics import integrate_geodesic, shoot_bvp
from semigeo.index_form import assemble_index_form, fredholm_split_check, kernel, stationary_index_form
from semigeo.jacobi import FieldAlongCurve, conjugate_points
from semigeo.metrics import FlatEuclidean, RoundSphereChart
from semigeo.perturbation import (bump_tensor, pairing_is_mixed_derivative_check, random_general_perturbation,
                                  transversality_pairing, velocity_profile)
from semigeo.pipeline import run_pipeline
from semigeo.report import dumps, strip_timing
from semigeo.scenario import list_scenarios, shipped_scenario

HALF_PI = np.pi / 2
SUITE_BUDGET = 60.0
RESULTS = {}


@functools.lru_cache(maxsize=None)
def shipped_reports():
    """Every shipped scenario run twice: name -> (text of run 1, text of run 2, report of run 1)."""
    out = {}
    for name in list_scenarios():
        first = run_pipeline(shipped_scenario(name))
        second = run_pipeline(shipped_scenario(name))
        out[name] = (dumps(strip_timing(first)), dumps(strip_timing(second)), first)
    return out


def check_1():
    t0 = time.perf_counter()
    rep = run_pipeline(shipped_scenario("stationary-counterexample"))
    beta = QuadraticField(2, c=1.0, Q=[[8 * np.pi ** 2]], axes=(0,))
    f1 = stationary_index_form(beta, [0.0], 128)
    f2 = stationary_index_form(beta, [0.0], 256)
    ker = kernel(f1, 1e-2, f2)
    runtime = time.perf_counter() - t0
    t = np.linspace(0.0, 1.0, 129)
    target = np.c_[np.sin(2 * np.pi * t), np.zeros_like(t)]
    v = ker.fields[0].values if ker.dimension else np.zeros_like(target)
    cosine = float(abs(np.sum(v * target)) / (np.linalg.norm(v) * np.linalg.norm(target) or 1.0))
    ratio = float(ker.ratios[0]) if ker.dimension else float("nan")
    classes = rep["stages"]["surjectivity"]["classes"]
    stationary = np.abs(np.array(classes["stationary"]["matrix"])).ravel()
    general = float(np.max(np.abs(classes["general"]["matrix"])))
    ok = (ker.dimension >= 1 and cosine >= 0.999 and 3.0 <= ratio <= 5.0 and len(stationary) == 20
          and stationary.max() <= 1e-8 and general >= 0.1 and runtime <= 5.0)
    return ok, (f"cos={cosine:.6f} ratio={ratio:.4f} max|stationary|={stationary.max():.2e} "
                f"general={general:.4f} runtime={runtime:.2f}s")


def _bump_identity(name, metric, x0, v0, V):
    c = integrate_geodesic(metric, x0, v0, 128)
    t = c.grid
    field = FieldAlongCurve(t, np.outer(np.sin(np.pi * t), V), np.outer(np.pi * np.cos(np.pi * t), V))
    a, b = 0.4, 0.6
    h = bump_tensor(c, (a, b), field, velocity_profile(c, metric, (a, b)), 0.3)
    pairing = transversality_pairing(h, metric, c, field)
    # the geodesic has constant coordinate velocity v0 on both test curves
    bvec = metric.jet(c.position_at(0.5), 0)[0] @ np.asarray(v0)
    k = lambda s: np.sin(np.pi * (s - a) / (b - a)) ** 4
    oracle = 0.5 * quad(lambda s: k(s) * (bvec @ v0) ** 2, a, b, epsabs=1e-15, epsrel=1e-13)[0]
    return abs(pairing - oracle) / abs(oracle)


def check_2():
    errs = {"flat": _bump_identity("flat", FlatEuclidean(2), [0.0, 0.0], [1.0, 0.5], [-0.5, 1.0]),
            "sphere": _bump_identity("sphere", RoundSphereChart(), [HALF_PI, 0.0], [0.0, np.pi], [1.0, 0.0])}
    return max(errs.values()) <= 1e-6, " ".join(f"{k}={v:.2e}" for k, v in errs.items())


def check_3():
    g = RoundSphereChart()
    curves = {m: integrate_geodesic(g, [HALF_PI, 0.0], [0.0, np.pi], m) for m in (32, 64, 128)}
    events = conjugate_points(g, curves[64]).events
    forms = {m: assemble_index_form(g, c) for m, c in curves.items()}
    ker = kernel(forms[64], 1e-2, forms[128])
    lam = {m: abs(f.eigen()[0][0]) for m, f in forms.items()}
    ratios = [lam[32] / lam[64], lam[64] / lam[128]]
    ok = (len(events) == 1 and events[0].multiplicity == 1 and abs(events[0].t - 1.0) <= 1e-6
          and ker.dimension == 1 and all(3.0 <= r <= 5.0 for r in ratios))
    t_star = events[0].t if events else float("nan")
    return ok, (f"events={len(events)} |t*-1|={abs(t_star - 1.0):.1e} kernel={ker.dimension} "
                f"ratios={ratios[0]:.4f},{ratios[1]:.4f}")


def check_4():
    stages = shipped_reports()["sphere-conjugate"][2]["stages"]
    certified = stages["surjectivity"]["classes"]["general"]["overall"] == "transversal"
    rows = {r["eps"]: r for r in stages["sweep"]["rows"]}
    eps = [0.005, 0.01, 0.02]
    dims_ok = all(rows[s * e]["kernel_dim"] == 0 for e in eps for s in (1, -1))
    lam = [min(rows[e]["min_abs_lambda"], rows[-e]["min_abs_lambda"]) for e in eps]
    monotone = all(x < y for x, y in zip(lam, lam[1:]))
    return certified and dims_ok and monotone, "min|λ| by |ε|: " + ", ".join(f"{x:.3e}" for x in lam)


def check_5():
    conf = shipped_reports()["lorentz-cylinder-null-conformal"][2]["stages"]["conformal"]
    n = len(conf["comparisons"])
    return n == 3 and conf["max_mismatch"] <= 1e-4, f"psi={n} max mismatch={conf['max_mismatch']:.2e}"


def check_6():
    g = RoundSphereChart()
    c = integrate_geodesic(g, [1.2, 0.3], [0.4, 1.1], 32)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        h = random_general_perturbation(rng, c.position_at(rng.uniform(0.2, 0.8)), spread=0.3, count=3,
                                        radius=(0.3, 0.8))
        coef = rng.normal(size=(3, 2))
        V = sum(np.outer(np.sin((j + 1) * np.pi * c.grid), coef[j]) for j in range(3))
        worst = max(worst, pairing_is_mixed_derivative_check(h, g, c, V, 1e-4).relative_error)
    return worst <= 1e-3, f"worst relative error over 50 draws={worst:.2e}"


def _scenario_curve(sc):
    m = sc.grid["m"]
    if sc.endpoints is not None:
        e = sc.endpoints
        try:
            return shoot_bvp(sc.metric, e["p"], e["q"], e["v_guess"], m=m)
        except SingularEndpointJacobian as exc:
            return exc.curve
    if sc.initial is not None:
        return integrate_geodesic(sc.metric, sc.initial["x0"], sc.initial["v0"], m)
    k = sc.metric.dim - 1
    return integrate_geodesic(sc.metric, np.zeros(k + 1), np.r_[np.full(k, 0.5), 1.0], 32)


def check_7():
    worst = 0.0
    constant_ok = True
    for name in list_scenarios():
        sc = shipped_scenario(name)
        rep = fredholm_split_check(assemble_index_form(sc.metric, _scenario_curve(sc)))
        worst = max(worst, rep.split_residual)
        if sc.metric.kind in ("flat-euclidean", "minkowski"):
            constant_ok = constant_ok and rep.e_part_zero
    return worst <= 1e-10 and constant_ok, f"max split residual={worst:.1e} constant e_part zero={constant_ok}"


def check_8():
    reps = shipped_reports()
    compact = reps["galphabeta-compact"][2]["stages"]["hyperbolic"]
    unbounded = reps["galphabeta-unbounded"][2]["stages"]["hyperbolic"]
    lip = compact["lipschitz"]
    ok = (compact["check"]["verdict"] == "criterion-satisfied-on-sample"
          and unbounded["check"]["verdict"] == "flagged-unbounded"
          and lip["samples"] == 1000 and lip["violations"] == 0 and lip["spd_violations"] == 0)
    return ok, (f"compact={compact['check']['verdict']} unbounded={unbounded['check']['verdict']} "
                f"lipschitz violations={lip['violations']}/{lip['samples']}")


def _great_circle(theta0, phi0, v0, t):
    p = np.array([np.sin(theta0) * np.cos(phi0), np.sin(theta0) * np.sin(phi0), np.cos(theta0)])
    e_th = np.array([np.cos(theta0) * np.cos(phi0), np.cos(theta0) * np.sin(phi0), -np.sin(theta0)])
    e_ph = np.array([-np.sin(phi0), np.cos(phi0), 0.0])
    u = v0[0] * e_th + v0[1] * np.sin(theta0) * e_ph
    w = np.linalg.norm(u)
    X = np.cos(w * t) * p + np.sin(w * t) * u / w
    return np.array([np.arccos(X[2]), np.arctan2(X[1], X[0])])


def check_9():
    g = RoundSphereChart()
    x0, v0 = (1.2, 0.3), (0.4, 1.1)
    exact = _great_circle(*x0, v0, 1.0)
    errs = [np.linalg.norm(integrate_geodesic(g, x0, v0, m, substeps=1, check_energy=False).positions[-1] - exact)
            for m in (16, 32, 64)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    drift = 0.0
    for x, v in ((x0, v0), ((HALF_PI, 0.0), (0.0, np.pi))):
        c = integrate_geodesic(g, x, v, 64)
        drift = max(drift, float(np.max(np.abs(c.node_energies(g) - c.energy))))
    ok = drift <= 1e-8 and all(12.0 <= r <= 20.0 for r in ratios)
    return ok, f"drift={drift:.1e} halving ratios={ratios[0]:.2f},{ratios[1]:.2f}"


def check_10(elapsed_seconds):
    reps = shipped_reports()
    same = [name for name, (a, b, _) in reps.items() if a == b]
    ok = len(same) == len(reps) and elapsed_seconds <= SUITE_BUDGET
    return ok, f"identical={len(same)}/{len(reps)} suite so far={elapsed_seconds:.1f}s"


def _record(request, number, result):
    ok, detail = result
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line(line)
    assert ok, line


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(request, number):
    _record(request, number, globals()[f"check_{number}"]())


def test_criterion_10_determinism_and_budget(request, elapsed):
    shipped_reports()
    _record(request, 10, check_10(elapsed()))


if __name__ == "__main__":
    start = time.perf_counter()
    failed = 0
    for n in range(1, 11):
        ok, detail = check_10(time.perf_counter() - start) if n == 10 else globals()[f"check_{n}"]()
        failed += not ok
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
