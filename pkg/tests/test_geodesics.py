import numpy as np
import pytest

from semigeo.errors import EndpointsEqual, SingularEndpointJacobian
from semigeo.geodesics import (geodesic_residual, integrate_geodesic, self_intersections, shoot_bvp,
                               support_interval)
from semigeo.metrics import FlatEuclidean, Minkowski, RoundSphereChart

HALF_PI = np.pi / 2


def test_flat_shoot_is_straight():
    c = shoot_bvp(FlatEuclidean(2), [0, 0], [1.0, 0.5], [0.3, 0.3], m=16)
    assert np.allclose(c.positions, np.outer(c.grid, [1.0, 0.5]), atol=1e-12)
    assert c.energy == pytest.approx(1.25)


def test_minkowski_energy_sign():
    c = shoot_bvp(Minkowski(3), [0, 0, 0], [1.0, 0.3, -0.2], [1, 0, 0], m=16)
    assert c.energy < 0


def test_antipodal_shoot_raises_with_curve():
    with pytest.raises(SingularEndpointJacobian) as info:
        shoot_bvp(RoundSphereChart(), [HALF_PI, 0], [HALF_PI, np.pi], [0, 0.9], m=32)
    curve = info.value.curve
    assert curve is not None
    assert np.allclose(curve.positions[-1], [HALF_PI, np.pi], atol=1e-9)


def test_equal_endpoints_need_permission():
    with pytest.raises(EndpointsEqual):
        shoot_bvp(FlatEuclidean(2), [0, 0], [0, 0], [1, 0])


def test_coarsen_matches_direct_run():
    g = RoundSphereChart()
    fine = integrate_geodesic(g, [1.2, 0.3], [0.4, 1.1], 64, substeps=2)
    direct = integrate_geodesic(g, [1.2, 0.3], [0.4, 1.1], 32, substeps=4)
    coarse = fine.coarsen(2)
    assert np.array_equal(coarse.positions, direct.positions)
    assert np.array_equal(coarse.velocities, direct.velocities)
    assert np.max(geodesic_residual(g, coarse)) == 0.0


def test_closed_geodesic_detected():
    c = integrate_geodesic(RoundSphereChart(), [HALF_PI, 0], [0, 3 * np.pi], 96)
    info = self_intersections(c).periodic
    assert info is not None
    assert info.T == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_support_interval_avoids_parallel_points():
    c = integrate_geodesic(FlatEuclidean(2), [0, 0], [1, 0], 32)
    V = np.c_[np.zeros(33), np.sin(np.pi * c.grid)]
    I = support_interval(c, V)
    assert 0.0 < I.a < I.b < 1.0
