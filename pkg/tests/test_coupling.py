import math

import numpy as np
import pytest

from netident.coupling import (CubicLattice, classify_coupling, conjecture_falsify,
                               recover_model_cubic, recover_theta, witness_dgp)
from netident.dgp import CouplingSpec, DgpSpec, HomophilySpec, logistic_fixture
from netident.errors import UsageError
from netident.oracle import Oracle
from netident.recovery import NormalizationAnchors

from conftest import IQR, LN3


def cubic(theta=0.0, covs=(0.0, 1.0), homophily=None):
    return DgpSpec(homophily=homophily or HomophilySpec("ConstantZero", theta=theta),
                   coupling=CouplingSpec("Cubic"), covariates=covs)


def test_classification_flags():
    lin = classify_coupling(CouplingSpec("LinearSum"))
    assert lin.generalized_homogeneous and lin.generalized_translatable
    cub = classify_coupling(CouplingSpec("Cubic"))
    assert cub.generalized_homogeneous and not cub.generalized_translatable
    tc = classify_coupling(CouplingSpec("TranslatableCubic", offset=1.0))
    assert tc.generalized_translatable and not tc.generalized_homogeneous
    lam = classify_coupling(CouplingSpec("LambdaPeriodic"))
    assert lam.periodic_homogeneous and lam.period == 2.0 and not lam.generalized_homogeneous


def test_homogeneity_witness_identity():
    # phi(g_c(a1), g_c(a2)) = c * phi(a1, a2)
    rng = np.random.default_rng(0)
    a1, a2 = rng.normal(size=(2, 50))
    for fam, c in (("LinearSum", 2.5), ("Cubic", 2.5), ("LambdaPeriodic", 2.0)):
        spec = CouplingSpec(fam)
        g = classify_coupling(spec).g(c)
        np.testing.assert_allclose(spec.phi(g(a1), g(a2)), c * spec.phi(a1, a2), rtol=1e-12)


def test_translatability_witness_identity():
    rng = np.random.default_rng(1)
    a1, a2 = rng.normal(size=(2, 50))
    for spec in (CouplingSpec("LinearSum"), CouplingSpec("TranslatableCubic", offset=0.3)):
        h = classify_coupling(spec).h(1.7)
        np.testing.assert_allclose(spec.phi(h(a1), h(a2)), spec.phi(a1, a2) + 1.7, atol=1e-12)


def test_witness_errors():
    d = logistic_fixture(coupling=CouplingSpec("LambdaPeriodic"))
    with pytest.raises(UsageError):
        witness_dgp(d, "homogeneous", 3.0)
    with pytest.raises(UsageError):
        witness_dgp(d, "translatable", 1.0)
    with pytest.raises(UsageError):
        witness_dgp(d, "other", 1.0)


def test_conjecture_statistic_vanishes_only_at_truth():
    o = Oracle(cubic(2 * LN3))
    lat = CubicLattice(o, 0.0, NormalizationAnchors(), 6)
    truth = 2 * LN3 / IQR + 0.5
    at = conjecture_falsify(o, 0.0, truth, lattice=lat)
    off = conjecture_falsify(o, 0.0, truth + 0.3, lattice=lat)
    assert at.informative and off.informative
    assert at.D < 1e-5 < off.D
    with pytest.raises(UsageError):
        conjecture_falsify(o, 0.0, truth, eps=0.5)


def test_scan_is_nonnegative():
    fit = recover_theta(Oracle(cubic(-2 * LN3)), 0.0)
    assert min(d for _, d in fit.scan) >= -1e-8
    assert fit.theta == pytest.approx(-2 * LN3 / IQR + 0.5, abs=1e-6)


@pytest.mark.parametrize("theta0", [0.3, -0.8])
def test_recover_theta_other_values(theta0):
    fit = recover_theta(Oracle(cubic(theta0)), 0.0)
    assert fit.theta == pytest.approx(theta0 / IQR + 0.5, abs=1e-3)


def test_model_cubic_homophily():
    table = ((0.0, 1.0, -0.6),)
    d = cubic(homophily=HomophilySpec("TableLookup", table=table))
    m = recover_model_cubic(Oracle(d), L=6, M=4)
    theta = m.diagnostics["theta_hat"]["0.0"]
    assert theta == pytest.approx(0.5, abs=1e-3)
    assert m.w_hat[(0.0, 1.0)] == pytest.approx(-0.6 / IQR + 0.5, abs=1e-3)
    assert m.w_hat[(0.0, 1.0)] == m.w_hat[(1.0, 0.0)]


def test_constant_homophily_table_is_flat():
    m = recover_model_cubic(Oracle(cubic(2 * LN3, covs=(0.0, 1.0, 2.0))), L=6, M=4)
    theta = m.diagnostics["theta_hat"]["0.0"]
    vals = np.array(list(m.w_hat.values()))
    assert np.max(np.abs(vals - theta)) <= 1e-6
    assert theta == pytest.approx(2 * LN3 / IQR + 0.5, abs=1e-6)
