import numpy as np
import pytest

from semigeo.errors import DegenerateMetric, OrderUnsupported
from semigeo.fields import QuadraticField
from semigeo.metrics import (Box, FlatEuclidean, LorentzCylinder, Minkowski, RoundSphereChart, SplitProduct,
                             StandardStationary, christoffel, curvature, local_geometry, lowered_riemann,
                             metric_derivatives, metric_from_spec, metric_index, sectional_curvature)


def fd_jet(metric, x, h=1e-5):
    n = metric.dim
    dg = np.zeros((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dg[k] = (metric.jet(x + e, 0)[0] - metric.jet(x - e, 0)[0]) / (2 * h)
    return dg


@pytest.mark.parametrize("metric,x", [
    (RoundSphereChart(), np.array([1.1, 0.4])),
    (LorentzCylinder(), np.array([0.3, 0.9, 2.0])),
    (SplitProduct((2, 1, 1.0)), np.array([1.3, 0.2, 5.0])),
    (StandardStationary(1, QuadraticField(2, c=1.0, Q=[[3.0]], axes=(0,))), np.array([0.4, 1.0])),
])
def test_analytic_derivatives_match_finite_differences(metric, x):
    dg, ddg = metric_derivatives(metric, x, 2)
    assert np.allclose(dg, fd_jet(metric, x), atol=1e-8)
    h = 1e-5
    for k in range(metric.dim):
        e = np.zeros(metric.dim)
        e[k] = h
        num = (metric.jet(x + e, 1)[1] - metric.jet(x - e, 1)[1]) / (2 * h)
        assert np.allclose(ddg[k], num, atol=1e-7)


def test_sphere_christoffel_and_curvature():
    x = np.array([0.8, 0.1])
    G = christoffel(RoundSphereChart(), x).gamma
    assert G[0, 1, 1] == pytest.approx(-np.sin(0.8) * np.cos(0.8))
    assert G[1, 0, 1] == pytest.approx(np.cos(0.8) / np.sin(0.8))
    assert sectional_curvature(RoundSphereChart(), x, [1, 0], [0, 1]) == pytest.approx(1.0)
    assert sectional_curvature(RoundSphereChart((2.0,)), x, [1, 0], [0, 1]) == pytest.approx(0.25)


def test_riemann_symmetries():
    metric = SplitProduct((2, 1, 1.0))
    R = lowered_riemann(metric, np.array([1.0, 0.3, 0.0]))
    assert np.allclose(R, -R.transpose(1, 0, 2, 3), atol=1e-13)
    assert np.allclose(R, -R.transpose(0, 1, 3, 2), atol=1e-13)
    assert np.allclose(R, R.transpose(2, 3, 0, 1), atol=1e-13)
    assert np.allclose(curvature(FlatEuclidean(3), np.zeros(3)).riemann, 0.0)


def test_index_and_degeneracy():
    assert metric_index(Minkowski(4), np.zeros(4)) == 1
    assert metric_index(RoundSphereChart(), np.array([1.0, 0.0])) == 0
    assert metric_index(SplitProduct((2, 2, 0.0)), np.zeros(4)) == 2
    with pytest.raises(DegenerateMetric):
        local_geometry(RoundSphereChart(domain=Box.cube(2, 5.0)), np.array([0.0, 0.0]))
    with pytest.raises(OrderUnsupported):
        metric_derivatives(FlatEuclidean(2), np.zeros(2), 3)


def test_metric_from_spec_kinds():
    g = metric_from_spec({"kind": "g-alpha-beta",
                          "g0": {"kind": "flat-euclidean", "dim": 1},
                          "alpha": {"kind": "constant", "matrix": [[2.0]]},
                          "beta": {"kind": "constant", "c": 3.0}})
    assert np.allclose(g.jet(np.zeros(2), 0)[0], np.diag([2.0, -3.0]))
    with pytest.raises(ValueError):
        metric_from_spec({"kind": "nope"})
