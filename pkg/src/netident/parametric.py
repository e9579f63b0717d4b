"""Recovery of the linear homophily parameter from zero-labeled probe pairs.

With w(x1, x2) = W(x1, x2)' beta and W vanishing on the diagonal, each probe
pair (x_i, x_j) yields xi_m = F_hat^{-1}(P(link | zero types at x_i, x_j)) =
W_m' beta in normalized units; stacking k independent probes gives beta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dgp import as_point, pairwise_features
from .errors import DesignSingular, UsageError
from .numerics import solve_pivoted
from .recovery import recover_homophily_many

__all__ = ["ParametricDesign", "BetaFit", "recover_beta"]


@dataclass(frozen=True)
class ParametricDesign:
    """Known pairwise map and the probe pairs whose W vectors form the design."""

    k: int
    pairwise_map: str
    probe_pairs: tuple
    condition_threshold: float = 1e8

    def __post_init__(self):
        pairs = tuple((as_point(a), as_point(b)) for a, b in self.probe_pairs)
        object.__setattr__(self, "probe_pairs", pairs)
        if len(pairs) < self.k:
            raise UsageError("need at least k probe pairs")

    def matrix(self):
        rows = [pairwise_features(self.pairwise_map, a, b) for a, b in self.probe_pairs]
        mat = np.array(rows, dtype=float)
        if mat.shape[1] != self.k:
            raise UsageError(f"pairwise map has dimension {mat.shape[1]}, not k={self.k}")
        return mat


@dataclass
class BetaFit:
    beta: np.ndarray
    residual: float
    condition: float
    xi: np.ndarray = field(repr=False)

    def to_json(self):
        return json.dumps({"beta": [float(b) for b in self.beta], "residual": self.residual,
                           "condition": self.condition}, indent=2, sort_keys=True)


def recover_beta(oracle, model, design: ParametricDesign, exact=None) -> BetaFit:
    """Solve W beta = xi with pivoted elimination (normal equations if overdetermined)."""
    W = design.matrix()
    cond = float(np.linalg.cond(W)) if W.shape[0] == W.shape[1] else float(np.linalg.cond(W.T @ W)) ** 0.5
    if not np.isfinite(cond) or cond > design.condition_threshold:
        raise DesignSingular(f"probe design condition number {cond:.3g} exceeds "
                             f"{design.condition_threshold:.3g}", condition=cond)
    xi = np.asarray(recover_homophily_many(oracle, model.state, design.probe_pairs, exact=exact))
    if W.shape[0] == design.k:
        beta = solve_pivoted(W, xi)
    else:
        beta = solve_pivoted(W.T @ W, W.T @ xi)
    residual = float(np.linalg.norm(W @ beta - xi))
    return BetaFit(beta, residual, cond, xi)
