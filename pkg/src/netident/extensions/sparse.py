"""Sparse networks: meeting rate C n^-kappa q(x1, x2) in front of the link law.

The exponent kappa comes from the log-log slope of an observable moment
along a ladder of network sizes.  With kappa known, n^kappa times a self
pair probability tends to C F(2a), whose supremum over types is C; once C
is read off a saturated self-pair curve, dividing by it returns the dense
problem and the standard recovery runs unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import IdentificationFailure, SaturationFailure, UsageError
from ..oracle import SelfPair, Against
from ..recovery import NormalizationAnchors, recover_model, _point

__all__ = ["KappaFit", "estimate_kappa", "SaturationCurve", "saturate", "SparseFit",
           "recover_sparse", "SparseStudy", "sparse_study"]

DEFAULT_TAILS = tuple(10.0 ** -k for k in range(1, 301))


@dataclass
class KappaFit:
    kappa_hat: float
    log_intercept: float
    n_ladder: tuple
    values: np.ndarray
    residuals: np.ndarray


def _ladder(n_ladder):
    ns = tuple(int(n) for n in n_ladder)
    if len(ns) < 3:
        raise UsageError("the n ladder needs at least three sizes")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise UsageError("the n ladder must be strictly increasing")
    return ns


def estimate_kappa(oracle, n_ladder, probe="pair", x=None, rank=0.5) -> KappaFit:
    """OLS slope of log E_n[probe] on log n; kappa_hat is minus the slope.

    ``probe``: ``"pair"`` (self pair of the type at popularity rank ``rank``),
    ``"popularity"`` (that type against the population) or ``"density"``
    (a random dyad).
    """
    if not oracle.sparse:
        raise UsageError("kappa estimation needs a sparse DGP")
    ns = _ladder(n_ladder)
    x = _point(oracle, oracle.covariates[0] if x is None else x)
    h = oracle.handle_at_rank(x, u=rank) if probe in ("pair", "popularity") else None
    vals = []
    for n in ns:
        view = oracle.at_n(n)
        if probe == "pair":
            vals.append(view.pair_prob(h, h))
        elif probe == "popularity":
            vals.append(view.popularity(h))
        elif probe == "density":
            vals.append(view.density())
        else:
            raise UsageError(f"unknown probe {probe!r}")
    vals = np.array(vals, dtype=float)
    if np.any(vals <= 0):
        raise IdentificationFailure("degenerate probe: zero moment on the ladder", stage="kappa",
                                    detail={"n": list(ns), "values": vals.tolist()})
    lx = np.log(np.array(ns, dtype=float))
    ly = np.log(vals)
    xc = lx - lx.mean()
    slope = float(xc @ (ly - ly.mean()) / (xc @ xc))
    icpt = float(ly.mean() - slope * lx.mean())
    resid = ly - (icpt + slope * lx)
    return KappaFit(-slope, icpt, ns, vals, resid)


@dataclass
class SaturationCurve:
    """Scaled self-pair values g along a rank walk toward the top type."""

    tails: list
    g: list
    saturated: bool
    last_increment: float

    def to_dict(self):
        return {"tails": self.tails, "g": self.g, "saturated": self.saturated,
                "last_increment": self.last_increment}


def saturate(oracle, n, kappa_hat, x1, x2=None, tol=1e-12, tails=DEFAULT_TAILS):
    """Walk types toward the top of the popularity ranking until n^kappa p stops rising.

    Returns the supremum estimate and the curve.  The estimate is biased
    down by the residual gap C (1 - F(w + 2a)) at the last type walked.
    """
    x1 = _point(oracle, x1)
    x2 = x1 if x2 is None else _point(oracle, x2)
    scale = float(n) ** float(kappa_hat)
    view = oracle.at_n(n)
    g_prev = None
    curve_t, curve_g = [], []
    for tail in tails:
        h1 = oracle.handle_at_rank(x1, tail=tail)
        h2 = h1 if x2 == x1 else oracle.handle_at_rank(x2, tail=tail)
        g = scale * view.pair_prob(h1, h2)
        curve_t.append(float(tail))
        curve_g.append(float(g))
        if g_prev is not None and g - g_prev <= tol:
            return g, SaturationCurve(curve_t, curve_g, True, float(g - g_prev))
        g_prev = g
    inc = curve_g[-1] - curve_g[-2] if len(curve_g) > 1 else float("nan")
    raise SaturationFailure("self-pair curve did not saturate on the rank walk",
                            curve=SaturationCurve(curve_t, curve_g, False, float(inc)))


class _NormalizedView:
    """Dense-looking oracle: pair probabilities divided by the estimated meeting rate."""

    def __init__(self, base, rate):
        self._base = base
        self._rate = rate  # dict (x1, x2) -> estimated p_n(x1, x2)

    @property
    def covariates(self):
        return self._base.covariates

    @property
    def mode(self):
        return self._base.mode

    @property
    def tol(self):
        return self._base.tol

    @property
    def sparse(self):
        return False

    def _r(self, x1, x2):
        return self._rate[(x1, x2)]

    def pair_prob(self, h1, h2):
        return float(self.pair_probs([h1], [h2])[0])

    def pair_probs(self, hs1, hs2):
        raw = np.asarray(self._base.pair_probs(hs1, hs2), dtype=float)
        r = np.array([self._r(a.covariate, b.covariate) for a, b in zip(hs1, hs2)])
        return raw / r

    def find_handle(self, x, reference, target):
        return self.find_handles(x, reference, [target])[0]

    def find_handles(self, x, reference, targets, on_unreachable="raise"):
        x = _point(self._base, x)
        t = np.asarray(targets, dtype=float)
        if isinstance(reference, SelfPair):
            r = np.full(t.size, self._r(x, x))
        elif isinstance(reference, Against):
            r = np.full(t.size, self._r(reference.ref.covariate, x))
        else:
            r = np.array([self._r(ref.ref.covariate, x) for ref in reference])
        return self._base.find_handles(x, reference, t * r, on_unreachable=on_unreachable)

    def compare_popularity(self, h1, h2):
        return self._base.compare_popularity(h1, h2)

    def handle_at_rank(self, x, u=None, tail=None):
        return self._base.handle_at_rank(x, u=u, tail=tail)


def _plain(x):
    return list(x) if isinstance(x, tuple) else x


@dataclass
class SparseFit:
    kappa_hat: float
    n: int
    C_hat: float | None
    q_hat: dict | None
    saturation: dict
    model: object = field(default=None, repr=False)

    def to_dict(self):
        out = {"kappa_hat": self.kappa_hat, "n": self.n,
               "saturation": {k: v.to_dict() for k, v in self.saturation.items()}}
        if self.C_hat is not None:
            out["C_hat"] = self.C_hat
        if self.q_hat is not None:
            out["q_hat"] = [[_plain(k[0]), _plain(k[1]), v] for k, v in self.q_hat.items()]
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def recover_sparse(oracle, kappa_hat, n, covariates=None, heterogeneous=False,
                   saturation_tol=1e-12, tails=DEFAULT_TAILS, anchors=None, L=10, M=4,
                   cross_check=True, exact=None) -> SparseFit:
    """Estimate C (or q per covariate pair), rescale, then run the dense recovery.

    ``tails`` is the rank walk: the type with upper-tail popularity mass
    ``tail`` for each entry, in order.  Its last entry is the upper limit of
    the grid of types.
    """
    if not oracle.sparse:
        raise UsageError("recover_sparse needs a sparse DGP")
    covs = [_point(oracle, x) for x in (covariates or oracle.covariates)]
    n = int(n)
    shrink = float(n) ** (-float(kappa_hat))
    curves = {}
    rate = {}
    C_hat, q_hat = None, None
    if heterogeneous:
        q_hat = {}
        for i, a in enumerate(covs):
            for b in covs[i:]:
                g, curve = saturate(oracle, n, kappa_hat, a, b, saturation_tol, tails)
                q_hat[(a, b)] = g
                curves[f"{a}|{b}"] = curve
                rate[(a, b)] = rate[(b, a)] = g * shrink
    else:
        C_hat, curve = saturate(oracle, n, kappa_hat, covs[0], None, saturation_tol, tails)
        curves[str(covs[0])] = curve
        for a in covs:
            for b in covs:
                rate[(a, b)] = C_hat * shrink
    view = _NormalizedView(oracle.at_n(n), rate)
    model = recover_model(view, covs, anchors or NormalizationAnchors(), L=L, M=M,
                          cross_check=cross_check, exact=exact)
    return SparseFit(float(kappa_hat), n, C_hat, q_hat, curves, model)


@dataclass
class SparseStudy:
    n_ladder: tuple
    kappa: KappaFit
    fit: SparseFit

    def __post_init__(self):
        _ladder(self.n_ladder)

    def to_dict(self):
        out = self.fit.to_dict()
        out["n_ladder"] = list(self.n_ladder)
        out["kappa_residual_max"] = float(np.max(np.abs(self.kappa.residuals)))
        return out


def sparse_study(oracle, n_ladder, probe="pair", n_ref=None, heterogeneous=False,
                 saturation_tol=1e-12, L=10, M=4, anchors=None) -> SparseStudy:
    """kappa from the ladder, then C or q and the rescaled recovery at n_ref."""
    ns = _ladder(n_ladder)
    kfit = estimate_kappa(oracle, ns, probe)
    n_ref = ns[-1] if n_ref is None else int(n_ref)
    fit = recover_sparse(oracle, kfit.kappa_hat, n_ref, heterogeneous=heterogeneous,
                         saturation_tol=saturation_tol, anchors=anchors, L=L, M=M)
    return SparseStudy(ns, kfit, fit)
