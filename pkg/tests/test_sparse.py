import json
import math

import numpy as np
import pytest

from netident.dgp import DgpSpec, FixedEffectLaw, HomophilySpec, SparsitySpec, logistic_fixture
from netident.errors import SaturationFailure, UsageError
from netident.extensions import estimate_kappa, recover_sparse, saturate, sparse_study
from netident.oracle import Oracle, OracleConfig
from netident.recovery import recover_model

from conftest import logistic_normalized_cdf

A_MAX = math.log(999) / 2
LAW = FixedEffectLaw("UniformLaw", lo=-30.0, hi=A_MAX)


def sparse(C=2.0, kappa=0.5, covs=(0.0, 1.0, 2.0), q=None, law=LAW):
    return DgpSpec(homophily=HomophilySpec("NegAbsDiff"), fixed_effects=law, covariates=covs,
                   sparsity=SparsitySpec("Sparse", C=C, kappa=kappa, q=q))


@pytest.mark.parametrize("probe", ["pair", "popularity", "density"])
@pytest.mark.parametrize("kappa", [0.0, 0.25, 0.9])
def test_kappa_exact_on_analytic_ladder(probe, kappa):
    o = Oracle(logistic_fixture(sparsity=SparsitySpec("Sparse", C=0.9, kappa=kappa)))
    fit = estimate_kappa(o, [50, 500, 5000, 50000], probe=probe)
    assert fit.kappa_hat == pytest.approx(kappa, abs=1e-12)
    assert np.max(np.abs(fit.residuals)) < 1e-12


def test_kappa_validation():
    o = Oracle(logistic_fixture(sparsity=SparsitySpec("Sparse", C=2.0, kappa=0.5)))
    with pytest.raises(UsageError):
        estimate_kappa(o, [100, 1000])
    with pytest.raises(UsageError):
        estimate_kappa(o, [100, 1000, 500])
    with pytest.raises(UsageError):
        estimate_kappa(o, [100, 1000, 10000], probe="degree")
    with pytest.raises(UsageError):
        estimate_kappa(Oracle(logistic_fixture()), [100, 1000, 10000])


def test_saturation_bias_matches_closed_form():
    o = Oracle(sparse())
    g, curve = saturate(o, 10000, 0.5, 0.0)
    assert curve.saturated
    # residual gap C (1 - F(2 a_max)) at the top of a bounded support
    assert g == pytest.approx(2.0 * 0.999, rel=1e-12)
    assert curve.g == sorted(curve.g)


def test_saturation_failure():
    o = Oracle(sparse())
    with pytest.raises(SaturationFailure) as info:
        saturate(o, 10000, 0.5, 0.0, tol=0.0, tails=(0.5, 0.4, 0.3))
    assert not info.value.curve.saturated
    assert len(info.value.curve.g) == 3


def test_recover_sparse_matches_dense():
    fit = recover_sparse(Oracle(sparse()), 0.5, 10000, L=6, M=0)
    dense = recover_model(Oracle(DgpSpec(homophily=HomophilySpec("NegAbsDiff"), fixed_effects=LAW,
                                         covariates=(0.0, 1.0, 2.0))), L=6, M=0)
    for t, v in dense.state.knots.items():
        assert fit.model.state.knots[t] == pytest.approx(v, abs=2e-3)
    out = json.loads(fit.to_json())
    assert out["C_hat"] == pytest.approx(1.998)
    assert out["n"] == 10000


def test_corner_case_is_dense_recovery():
    o = Oracle(logistic_fixture(sparsity=SparsitySpec("Sparse", C=1.0, kappa=0.0)))
    fit = recover_sparse(o, 0.0, 1000, saturation_tol=0.0, L=6, M=2)
    assert fit.C_hat == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(fit.model.f_hat.values, logistic_normalized_cdf(fit.model.f_hat.t),
                               atol=1e-10)


def test_heterogeneous_rates():
    d = sparse(C=1.0, covs=(0.0, 1.0), q=((0.0, 1.0, 0.5), (1.0, 1.0, 2.0)))
    fit = recover_sparse(Oracle(d), 0.5, 10000, heterogeneous=True, L=6, M=0)
    assert fit.q_hat[(0.0, 0.0)] == pytest.approx(0.999, rel=1e-9)
    assert fit.q_hat[(0.0, 1.0)] == pytest.approx(0.5 * (1 / (1 + math.exp(1 - 2 * A_MAX))), rel=1e-9)
    assert fit.q_hat[(1.0, 1.0)] == pytest.approx(2 * 0.999, rel=1e-9)
    assert json.loads(fit.to_json())["q_hat"][0][:2] == [0.0, 0.0]


def test_sparse_study_pipeline():
    study = sparse_study(Oracle(sparse()), [1000, 5000, 10000], probe="density", L=5, M=0)
    assert study.kappa.kappa_hat == pytest.approx(0.5, abs=1e-12)
    assert study.fit.n == 10000
    assert study.to_dict()["kappa_residual_max"] < 1e-12


def test_monte_carlo_ladder_concentrates():
    d = logistic_fixture(sparsity=SparsitySpec("Sparse", C=2.0, kappa=0.5))
    ks = [estimate_kappa(Oracle(d, OracleConfig("MonteCarlo", B="network", seed=s)),
                         [2000, 10000, 50000], probe="density").kappa_hat for s in range(5)]
    assert np.median(np.abs(np.array(ks) - 0.5)) < 0.02


def test_recover_sparse_rejects_dense():
    with pytest.raises(UsageError):
        recover_sparse(Oracle(logistic_fixture()), 0.5, 100)
