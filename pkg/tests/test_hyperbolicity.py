import numpy as np
import pytest

from semigeo.errors import AlphaNotPositive
from semigeo.fields import (ConstantField, CosineField, ExpDistSquaredField, OnePlusDistSquaredField,
                            ScaledIdentityOperator)
from semigeo.fields import ConstantOperator
from semigeo.hyperbolicity import (AlphaBetaPair, build_galphabeta, hyperbolicity_check, lambda_lipschitz_property,
                                   lambda_min_alpha, seminorms)
from semigeo.metrics import FlatEuclidean, metric_index


def line_pair(beta, alpha=None):
    alpha = alpha or ConstantOperator(2, 1, [[1.0]])
    return AlphaBetaPair(FlatEuclidean(1), alpha, beta, [0.0])


def test_galphabeta_is_lorentzian():
    pair = line_pair(ConstantField(2, 2.0), ConstantOperator(2, 1, [[3.0]]))
    g = build_galphabeta(pair)
    assert np.allclose(g.jet(np.array([0.5, 1.0]), 0)[0], np.diag([3.0, -2.0]))
    assert metric_index(g, np.zeros(2)) == 1


def test_circle_base_satisfies_criterion():
    alpha = ScaledIdentityOperator(2, 1, CosineField(2, 2.0, 1.0, [1.0], axes=(0,)))
    pair = AlphaBetaPair(FlatEuclidean(1, periods=(2 * np.pi,)), alpha, ConstantField(2, 1.0), [0.0])
    rep = hyperbolicity_check(pair, np.linspace(0, 2 * np.pi, 41)[:, None], 2)
    assert rep.verdict == "criterion-satisfied-on-sample"


def test_growth_of_beta_decides_the_verdict():
    grid = np.linspace(-4, 4, 41)[:, None]
    fast = hyperbolicity_check(line_pair(ExpDistSquaredField(2, axes=(0,))), grid, 2)
    assert fast.verdict == "flagged-unbounded"
    slow = hyperbolicity_check(line_pair(OnePlusDistSquaredField(2, axes=(0,))), grid, 2)
    assert slow.verdict == "criterion-satisfied-on-sample"
    assert max(r.sup_ratio for r in slow.strips) == pytest.approx(1.0)


def test_seminorms_of_a_quadratic_beta():
    pair = line_pair(OnePlusDistSquaredField(2, axes=(0,)))
    sn = seminorms(pair, [np.array([x, 0.0]) for x in np.linspace(-2, 2, 9)])
    assert sn.D0 == pytest.approx(5.0)
    assert sn.D1 == pytest.approx(4.0)
    assert sn.D2 == pytest.approx(2.0)


def test_lambda_min_and_lipschitz():
    pair = line_pair(ConstantField(2, 1.0), ConstantOperator(2, 1, [[2.0]]))
    assert lambda_min_alpha(pair, [0.3], 0.0) == pytest.approx(2.0)
    bad = line_pair(ConstantField(2, 1.0), ConstantOperator(2, 1, [[-1.0]]))
    with pytest.raises(AlphaNotPositive):
        lambda_min_alpha(bad, [0.0], 0.0)
    assert lambda_lipschitz_property(200, seed=1).passed
