"""Fully nonseparable index: phi(x1, x2; a1, a2) recovered as a probability table.

With a nonseparable index the shock law and the index cannot be told apart,
so the normalized model takes uniform shocks and labels every type by its
own self-pair link probability.  The diagonal of the normalized index is
then the identity, and the off-diagonal entries are plain pair
probabilities between labeled types.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dgp import DgpSpec
from ..errors import AssumptionViolated, UsageError
from ..numerics import bisect_increasing
from ..oracle import SELF_PAIR
from ..recovery import _point

__all__ = ["PhiTable", "default_t_grid", "check_diagonal_invariance", "recover_nonseparable",
           "resimulate_check", "true_phi"]


def default_t_grid(size=99):
    """Equally spaced interior grid {1/(size+1), ..., size/(size+1)}."""
    return np.arange(1, size + 1) / (size + 1.0)


@dataclass
class PhiTable:
    """phi_hat[i, j, k, l] = normalized index at (x_i, x_j; t_k, t_l)."""

    covariates: tuple
    t: np.ndarray
    values: np.ndarray
    handles: dict = field(default_factory=dict, repr=False)
    diagnostics: dict = field(default_factory=dict)

    def index(self, x):
        return self.covariates.index(x)

    def at(self, x1, x2):
        return self.values[self.index(x1), self.index(x2)]

    def rows(self):
        """(x1, x2, t1, t2, phi_hat) in deterministic order."""
        out = []
        for i, x1 in enumerate(self.covariates):
            for j, x2 in enumerate(self.covariates):
                block = self.values[i, j]
                for k, t1 in enumerate(self.t):
                    for l, t2 in enumerate(self.t):
                        out.append((x1, x2, float(t1), float(t2), float(block[k, l])))
        return out

    def interpolate(self, x1, x2, t1, t2, method="bilinear"):
        """Evaluate the table off the grid.

        ``"step"`` holds the value of the grid cell's lower corner;
        ``"bilinear"`` interpolates linearly in both labels.
        """
        block = self.at(x1, x2)
        t = self.t
        t1 = np.atleast_1d(np.asarray(t1, float))
        t2 = np.atleast_1d(np.asarray(t2, float))
        if np.any((t1 < t[0]) | (t1 > t[-1]) | (t2 < t[0]) | (t2 > t[-1])):
            raise UsageError("interpolation point outside the label grid")
        i = np.clip(np.searchsorted(t, t1, side="right") - 1, 0, t.size - 2)
        j = np.clip(np.searchsorted(t, t2, side="right") - 1, 0, t.size - 2)
        if method == "step":
            return block[i, j]
        if method != "bilinear":
            raise UsageError(f"unknown interpolation {method!r}")
        s = (t1 - t[i]) / (t[i + 1] - t[i])
        r = (t2 - t[j]) / (t[j + 1] - t[j])
        return ((1 - s) * (1 - r) * block[i, j] + s * (1 - r) * block[i + 1, j]
                + (1 - s) * r * block[i, j + 1] + s * r * block[i + 1, j + 1])


def check_diagonal_invariance(oracle, covariates, ranks=(0.1, 0.25, 0.5, 0.75, 0.9), tol=None):
    """Spot check that the diagonal index does not move with the covariate.

    Fixed effects are drawn independently of covariates, so the type at a
    given popularity rank has the same latent value in every covariate cell;
    its self-pair probability must then agree across cells.
    """
    covs = [_point(oracle, x) for x in covariates]
    if tol is None:
        tol = 1e-8 if oracle.mode == "Analytic" else 5.0 * oracle.tol
    rows = []
    for x in covs:
        hs = [oracle.handle_at_rank(x, u=u) for u in ranks]
        rows.append(oracle.pair_probs(hs, hs))
    rows = np.array(rows)
    worst = float(np.max(rows.max(axis=0) - rows.min(axis=0))) if len(covs) > 1 else 0.0
    if worst > tol:
        raise AssumptionViolated("1''", f"diagonal self-pair probability moves across covariates "
                                        f"by {worst:.3g} at equal ranks")
    return worst


def recover_nonseparable(oracle, covariates=None, t_grid=None, check=True) -> PhiTable:
    """Label types by self-pair probability and tabulate pair probabilities."""
    covs = tuple(_point(oracle, x) for x in (covariates or oracle.covariates))
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0) or t[0] <= 0 or t[-1] >= 1:
        raise UsageError("t grid must be strictly increasing inside (0, 1)")
    diag = {}
    if check:
        diag["diagonal_spread"] = check_diagonal_invariance(oracle, covs)
    handles = {x: oracle.find_handles(x, SELF_PAIR, t) for x in covs}
    k, T = len(covs), t.size
    vals = np.empty((k, k, T, T))
    for i, x1 in enumerate(covs):
        for j in range(i, k):
            x2 = covs[j]
            h1 = [h for h in handles[x1] for _ in range(T)]
            h2 = handles[x2] * T
            block = np.asarray(oracle.pair_probs(h1, h2)).reshape(T, T)
            vals[i, j] = block
            vals[j, i] = block.T
    return PhiTable(covs, t, vals, handles, diag)


# ---------------------------------------------------------------------------
# validation against the generating process
# ---------------------------------------------------------------------------

def _diag_types(dgp: DgpSpec, x, t):
    """Latent a with self-pair probability t at covariate x (closed form side)."""
    c = dgp.covariate_index(x)
    w = dgp.homophily_matrix()[c, c]
    index = dgp.index_fn()
    target = dgp.shocks.quantile(np.asarray(t, float))
    fun = lambda a: index(w, a, a)
    lo = np.full(target.shape, -1.0)
    hi = np.full(target.shape, 1.0)
    for _ in range(200):
        grow_lo = fun(lo) > target
        grow_hi = fun(hi) < target
        if not (np.any(grow_lo) or np.any(grow_hi)):
            break
        lo = np.where(grow_lo, 2 * lo, lo)
        hi = np.where(grow_hi, 2 * hi, hi)
    return bisect_increasing(fun, target, lo, hi)


def true_phi(dgp: DgpSpec, x1, x2, t1, t2):
    """Link probability of the types labeled t1 at x1 and t2 at x2."""
    t1 = np.atleast_1d(np.asarray(t1, float))
    t2 = np.atleast_1d(np.asarray(t2, float))
    a1 = _diag_types(dgp, x1, t1)
    a2 = _diag_types(dgp, x2, t2)
    i, j = dgp.covariate_index(x1), dgp.covariate_index(x2)
    w = dgp.homophily_matrix()[i, j]
    return dgp.shocks.cdf(dgp.index_fn()(w, a1[:, None], a2[None, :]))


def resimulate_check(table: PhiTable, dgp: DgpSpec, method="grid", draws=None, seed=0,
                     region=None):
    """Max |P_hat - P| between the normalized model and the original DGP.

    In the normalized model a dyad links when a Uniform(0, 1) shock falls
    below phi_hat, so its link probability is phi_hat itself.  ``method``:
    ``"grid"`` compares on the label grid, ``"step"`` and ``"bilinear"``
    compare at cell midpoints through the corresponding interpolation.
    With ``draws`` the normalized probabilities are replaced by simulated
    frequencies from that many uniform shocks per cell.  ``region = (lo, hi)``
    restricts the midpoint comparison to labels inside [lo, hi]; near the
    corners (t1 -> 0, t2 -> 1) the surface steepens without bound, so
    convergence under refinement is uniform only on such a fixed interior.
    """
    rng = np.random.default_rng(seed) if draws else None
    worst = 0.0
    t = table.t
    mids = 0.5 * (t[:-1] + t[1:])
    if region is not None:
        mids = mids[(mids >= region[0]) & (mids <= region[1])]
    for x1 in table.covariates:
        for x2 in table.covariates:
            if method == "grid":
                p_hat = table.at(x1, x2)
                p = true_phi(dgp, x1, x2, t, t)
            elif method in ("step", "bilinear"):
                g1, g2 = np.meshgrid(mids, mids, indexing="ij")
                p_hat = table.interpolate(x1, x2, g1.ravel(), g2.ravel(), method).reshape(g1.shape)
                p = true_phi(dgp, x1, x2, mids, mids)
            else:
                raise UsageError(f"unknown method {method!r}")
            if rng is not None:
                p_hat = rng.binomial(int(draws), np.clip(p_hat, 0, 1)) / float(draws)
            worst = max(worst, float(np.max(np.abs(p_hat - p))))
    return worst
