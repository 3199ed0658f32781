import numpy as np
import pytest

from semigeo.errors import NotCriticalPoint, NotLightlike
from semigeo.fields import CosineField, QuadraticField
from semigeo.geodesics import integrate_geodesic
from semigeo.jacobi import (conformal_conjugate_compare, conjugate_points, jacobi_residual, jacobi_solve,
                            stationary_endpoint_map, stationary_jacobi)
from semigeo.metrics import FlatEuclidean, LorentzCylinder, RoundSphereChart

HALF_PI = np.pi / 2


def test_equator_jacobi_field_is_a_sine():
    g = RoundSphereChart()
    c = integrate_geodesic(g, [HALF_PI, 0], [0, np.pi], 64)
    J = jacobi_solve(g, c, [0, 0], [1.0, 0])
    assert np.allclose(J.values[:, 0], np.sin(np.pi * c.grid) / np.pi, atol=1e-7)
    assert np.max(jacobi_residual(g, c, J)) < 1e-8


def test_flat_has_no_conjugate_points():
    c = integrate_geodesic(FlatEuclidean(2), [0, 0], [1, 1], 32)
    assert conjugate_points(FlatEuclidean(2), c).events == []


def test_full_equator_has_conjugate_point_at_half():
    g = RoundSphereChart()
    c = integrate_geodesic(g, [HALF_PI, 0], [0, 2 * np.pi], 128)
    ts = [e.t for e in conjugate_points(g, c).events]
    assert ts[0] == pytest.approx(0.5, abs=1e-6)
    assert ts[-1] == pytest.approx(1.0, abs=1e-6)


def test_stationary_reduced_jacobi():
    beta = QuadraticField(2, c=1.0, Q=[[8 * np.pi ** 2]], axes=(0,))
    xi, sigma = stationary_jacobi(beta, [0.0], 64, dxi0=[1.0])
    t = np.linspace(0, 1, 65)
    assert np.allclose(xi[:, 0], np.sin(2 * np.pi * t) / (2 * np.pi), atol=1e-12)
    assert np.allclose(sigma, 0.0)
    assert abs(stationary_endpoint_map(beta, [0.0])[0, 0]) < 1e-12
    tilted = QuadraticField(2, c=1.0, b=[0.5], axes=(0,))
    with pytest.raises(NotCriticalPoint):
        stationary_jacobi(tilted, [0.0], 16)


def test_conformal_compare_needs_null_velocity():
    psi = CosineField(3, 1.0, 0.1, [0.2, 0.1, 0.3])
    with pytest.raises(NotLightlike):
        conformal_conjugate_compare(LorentzCylinder(), psi, [0, HALF_PI, 0], [1.0, 0, 0])
