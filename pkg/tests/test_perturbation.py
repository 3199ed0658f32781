import numpy as np
import pytest

from semigeo.errors import BothVelocitiesVanish, NotJacobi, NotVertical, TubeIntersectsCurve
from semigeo.fields import QuadraticField
from semigeo.geodesics import integrate_geodesic
from semigeo.jacobi import jacobi_solve
from semigeo.metrics import FlatEuclidean, RoundSphereChart, SplitProduct, StandardStationary
from semigeo.perturbation import (EmptyKernel, ScalarProfile, bump_scalar, bump_tensor, conformal_pairing,
                                  random_stationary_perturbation, split_bump, stationary_family_pairing,
                                  surjectivity_criterion, transversality_pairing, velocity_profile)

HALF_PI = np.pi / 2
I = (0.4, 0.6)


@pytest.fixture(scope="module")
def equator():
    g = RoundSphereChart()
    c = integrate_geodesic(g, [HALF_PI, 0], [0, np.pi], 64)
    return g, c, jacobi_solve(g, c, [0, 0], [1.0, 0])


def test_bump_vanishes_on_curve_with_prescribed_derivative(equator):
    g, c, J = equator
    prof = velocity_profile(c, g, I)
    h = bump_tensor(c, I, J, prof, 0.3)
    for t in (0.3, 0.45, 0.5, 0.55):
        x = c.position_at(t)
        val, dh, _ = h.jet(x, 1)
        assert np.max(np.abs(val)) < 1e-13
        assert np.allclose(np.einsum("k,kij->ij", J.at(t), dh), prof.value(t), atol=1e-10)


def test_bump_jets_match_finite_differences(equator):
    g, c, J = equator
    h = bump_tensor(c, I, J, velocity_profile(c, g, I), 0.3)
    x = c.position_at(0.5) + np.array([0.05, -0.02])
    _, dh, ddh = h.jet(x, 2)
    eps = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = eps
        assert np.allclose(dh[k], (h.value(x + e) - h.value(x - e)) / (2 * eps), atol=1e-7)
        assert np.allclose(ddh[k], (h.jet(x + e, 1)[1] - h.jet(x - e, 1)[1]) / (2 * eps), atol=1e-6)


def test_tube_must_avoid_the_rest_of_the_curve():
    g = RoundSphereChart()
    c = integrate_geodesic(g, [HALF_PI, 0], [0, 2.2 * np.pi], 128)
    J = jacobi_solve(g, c, [0, 0], [1.0, 0])
    with pytest.raises(TubeIntersectsCurve):
        bump_tensor(c, (0.05, 0.12), J, velocity_profile(c, g, (0.05, 0.12)), 0.3)


def test_conformal_pairing_closed_form(equator):
    g, c, J = equator
    psi = bump_scalar(c, I, J, ScalarProfile(*I), 0.3)
    rep = conformal_pairing(psi, g, c, J)
    assert rep.agreement < 1e-12 * max(1.0, abs(rep.direct))
    not_jacobi = np.c_[np.zeros(65), np.sin(np.pi * c.grid)]
    with pytest.raises(NotJacobi):
        conformal_pairing(psi, g, c, not_jacobi)


def test_split_bump_is_block_diagonal():
    g = SplitProduct((2, 1, 1.0))
    c = integrate_geodesic(g, [HALF_PI, 0, 0], [0, np.pi, 0.3], 64)
    J = jacobi_solve(g, c, np.zeros(3), [1.0, 0, 0])
    h = split_bump(c, I, J, 2)
    _, dh, _ = h.jet(c.position_at(0.5) + np.array([0.02, 0.0, 0.0]), 1)
    assert np.all(dh[:, :2, 2] == 0.0)
    assert transversality_pairing(h, g, c, J) > 0.1
    still = integrate_geodesic(g, [HALF_PI, 0, 0], [0, 0, 0], 16)
    with pytest.raises(BothVelocitiesVanish):
        split_bump(still, I, J, 2)


def test_stationary_pairing_certificates():
    beta = QuadraticField(2, c=1.0, Q=[[8 * np.pi ** 2]], axes=(0,))
    g = StandardStationary(1, beta)
    c = integrate_geodesic(g, [0, 0], [0, 1], 64)
    J = np.c_[np.sin(2 * np.pi * c.grid), np.zeros(65)]
    h = random_stationary_perturbation(np.random.default_rng(3), [0.0])
    rep = stationary_family_pairing(h, c, J)
    assert abs(rep.value - rep.closed_form) < 1e-12
    assert abs(rep.value) < 1e-8
    tilted = integrate_geodesic(FlatEuclidean(2), [0, 0], [1, 1], 16)
    with pytest.raises(NotVertical):
        stationary_family_pairing(h, tilted, J)


def test_surjectivity_needs_kernel(equator):
    g, c, J = equator
    h = bump_tensor(c, I, J, velocity_profile(c, g, I), 0.3)
    with pytest.raises(EmptyKernel):
        surjectivity_criterion([], [h], g, c)
    v = surjectivity_criterion([J], [h], g, c)
    assert v.overall == "transversal" and v.rows == ["certified"]
