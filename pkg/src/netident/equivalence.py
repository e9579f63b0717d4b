"""Affine modeling-equivalence transforms and the normalized representative.

For an additive coupling, (w, A, U) and (c w + b, c A + a, c U + 2a + b)
generate the same links for every c > 0 and real a, b.  This module applies
such transforms to a :class:`~netident.dgp.DgpSpec`, picks the normalized
member of each class, and checks observational equivalence numerically.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .dgp import DgpSpec, FixedEffectLaw, HomophilySpec, ShockDistribution
from .errors import UsageError

__all__ = ["AffineTransform", "transform_dgp", "transform_homophily",
           "assert_observational_equivalence", "EquivalenceReport",
           "NormalizedTriple", "normalized_representative", "normalize_dgp",
           "recentering_panel_test"]


@dataclass(frozen=True)
class AffineTransform:
    """psi_{a,b,c}: A -> cA + a, w -> cw + b, U -> cU + 2a + b."""

    a: float = 0.0
    b: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise UsageError("c must be positive")

    def inverse(self):
        return AffineTransform(-self.a / self.c, -self.b / self.c, 1.0 / self.c)

    def compose(self, other):
        """self after other."""
        return AffineTransform(self.c * other.a + self.a, self.c * other.b + self.b,
                               self.c * other.c)

    def apply(self, w, a, u):
        return self.c * w + self.b, self.c * a + self.a, self.c * u + 2 * self.a + self.b


def transform_homophily(h: HomophilySpec, c, b) -> HomophilySpec:
    """w -> c w + b within the same family."""
    if h.family == "TableLookup":
        rows = tuple((x1, x2, c * v + b) for x1, x2, v in h.table)
        return dataclasses.replace(h, table=rows, theta=c * h.theta + b)
    if h.family == "ScaledLinear":
        beta = tuple(c * v for v in h.beta)
        return dataclasses.replace(h, beta=beta, theta=c * h.theta + b)
    return dataclasses.replace(h, theta=c * h.theta + b, scale=c * h.scale)


def transform_dgp(dgp: DgpSpec, t: AffineTransform) -> DgpSpec:
    """Image of the DGP under psi_{a,b,c} (additive coupling only)."""
    if dgp.coupling.family != "LinearSum":
        raise UsageError("affine transforms apply to LinearSum coupling; "
                         "use the coupling witnesses for other couplings")
    if dgp.index is not None and dgp.index.kind != "AdditiveWrap":
        raise UsageError("affine transforms need the separable index")
    return dataclasses.replace(
        dgp,
        homophily=transform_homophily(dgp.homophily, t.c, t.b),
        fixed_effects=dgp.fixed_effects.affine(t.c, t.a),
        shocks=dgp.shocks.affine(t.c, 2 * t.a + t.b),
    )


@dataclass
class EquivalenceReport:
    passed: bool
    max_deviation: float
    n_queries: int
    tol: float

    def to_dict(self):
        return dataclasses.asdict(self)


def assert_observational_equivalence(dgp1: DgpSpec, dgp2: DgpSpec, Q=1000, tol=1e-12,
                                     seed=0, n=None) -> EquivalenceReport:
    """Compare link probabilities at random covariate pairs and matched effect ranks.

    Fixed effects are matched at equal population quantiles of each DGP's own
    law, which is what the observable (distribution-level) surface pins down.
    """
    if tuple(dgp1.covariates) != tuple(dgp2.covariates):
        raise UsageError("covariate supports differ")
    rng = np.random.default_rng(seed)
    k = dgp1.n_cov
    i = rng.integers(0, k, Q)
    j = rng.integers(0, k, Q)
    u1 = rng.uniform(0.001, 0.999, Q)
    u2 = rng.uniform(0.001, 0.999, Q)

    def probs(d):
        w = d.homophily_matrix()[i, j]
        a1 = np.asarray(d.fixed_effects.quantile(u1))
        a2 = np.asarray(d.fixed_effects.quantile(u2))
        p = d.shocks.cdf(d.index_fn()(w, a1, a2))
        if d.sparsity.sparse:
            p = p * d.meeting_rate(n)[i, j]
        return np.asarray(p)

    dev = float(np.max(np.abs(probs(dgp1) - probs(dgp2))))
    return EquivalenceReport(dev <= tol, dev, int(Q), float(tol))


@dataclass(frozen=True)
class NormalizedTriple:
    """Normalized (w table, fixed-effect law, shocks) plus the map that produced it."""

    dgp: DgpSpec
    transform: AffineTransform


def normalized_representative(dgp: DgpSpec, alpha=0.25, beta=None, base=None) -> NormalizedTriple:
    """Apply psi_N: w(base, base) -> 0, F^{-1}(alpha) -> 0, F^{-1}(beta) -> 1."""
    beta = 1.0 - alpha if beta is None else beta
    q_a = float(dgp.shocks.quantile(alpha))
    q_b = float(dgp.shocks.quantile(beta))
    iqr = q_b - q_a
    if not np.isfinite(iqr) or iqr <= 0:
        raise UsageError("degenerate shock distribution: interquantile range is not positive")
    base = dgp.covariates[0] if base is None else base
    theta = dgp.homophily.evaluate(base, base)
    c = 1.0 / iqr
    b = -c * theta
    # c U + 2a + b has alpha-quantile c q_a + 2a + b = 0
    a = -0.5 * (c * q_a + b)
    t = AffineTransform(a, b, c)
    return NormalizedTriple(transform_dgp(dgp, t), t)


def normalize_dgp(dgp: DgpSpec, alpha=0.25, beta=None) -> DgpSpec:
    return normalized_representative(dgp, alpha, beta).dgp


def recentering_panel_test(law: FixedEffectLaw, n=200, reps=400, seed=0):
    """Recentering every effect on the first node's effect breaks i.i.d. draws.

    Under i.i.d. effects with variance s2, the cross-node mean of n effects
    has variance s2 / n.  With A_hat_i = A_i - A_1 the common shift inflates
    it to about s2.  Returns the z statistic comparing the simulated
    variance of network means with the i.i.d. prediction.
    """
    rng = np.random.default_rng(seed)
    draws = np.stack([law.sample(rng, n) for _ in range(reps)])
    recentred = draws - draws[:, :1]
    tail = recentred[:, 1:]
    s2 = float(np.mean(np.var(tail, axis=1, ddof=1)))
    means = tail.mean(axis=1)
    v = float(np.var(means, ddof=1))
    pred = s2 / tail.shape[1]
    # sampling sd of a variance estimate under normality: pred * sqrt(2 / (reps - 1))
    z = (v - pred) / (pred * np.sqrt(2.0 / (reps - 1)))
    return {"z": float(z), "observed_var": v, "iid_var": pred, "rejects_iid": bool(abs(z) > 4)}


def report_json(reports: dict) -> str:
    out = {k: (r.to_dict() if isinstance(r, EquivalenceReport) else r) for k, r in reports.items()}
    return json.dumps(out, indent=2, sort_keys=True)
