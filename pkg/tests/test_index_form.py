import numpy as np
import pytest

from semigeo.fields import QuadraticField
from semigeo.geodesics import integrate_geodesic
from semigeo.index_form import (assemble_index_form, block_kernel_dimension, fredholm_split_check, kernel,
                                kernel_jacobi_check, stationary_index_form)
from semigeo.metrics import FlatEuclidean, Minkowski, RoundSphereChart

HALF_PI = np.pi / 2


def test_flat_index_form_is_the_gram_form():
    g = FlatEuclidean(1)
    c = integrate_geodesic(g, [0.0], [1.0], 16)
    f = assemble_index_form(g, c)
    assert not np.any(f.e_part)
    lam = f.eigen()[0]
    assert np.allclose(lam, 1.0, atol=1e-12)
    assert kernel(f).dimension == 0


def test_minkowski_split_is_exact():
    g = Minkowski(2)
    c = integrate_geodesic(g, [0, 0], [1.0, 0.2], 16)
    rep = fredholm_split_check(assemble_index_form(g, c))
    assert rep.e_part_zero and rep.split_residual == 0.0


def test_sphere_kernel_matches_jacobi_field():
    g = RoundSphereChart()
    c = integrate_geodesic(g, [HALF_PI, 0], [0, np.pi], 32)
    c2 = integrate_geodesic(g, [HALF_PI, 0], [0, np.pi], 64)
    ker = kernel(assemble_index_form(g, c), 1e-2, assemble_index_form(g, c2))
    assert ker.dimension == 1
    match = kernel_jacobi_check(g, c, ker.fields[0])
    assert match.cosine > 0.999
    assert fredholm_split_check(assemble_index_form(g, c)).passes


def test_stationary_blocks():
    beta = QuadraticField(2, c=1.0, Q=[[8 * np.pi ** 2]], axes=(0,))
    f1 = stationary_index_form(beta, [0.0], 64)
    f2 = stationary_index_form(beta, [0.0], 128)
    assert kernel(f1, 1e-2, f2).dimension == 1
    assert block_kernel_dimension(f1, [0], 1e-2, f2) == 1
    assert block_kernel_dimension(f1, [1], 1e-2, f2) == 0
