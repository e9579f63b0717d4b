"""Population oracle: the observable surface the identification arguments use.

The oracle answers conditional link-probability questions about *individual
types*, named by opaque :class:`FixedEffectHandle` tokens.  The numeric fixed
effect behind a handle lives in a private store and is never returned by any
public method; the recovery engine can only select types by the moments they
generate (``find_handle``) and compare them (``compare_popularity``).

Two access modes are provided.  ``Analytic`` returns exact population values.
``MonteCarlo`` returns sample means of ``B`` simulated dyad indicators; each
query draws from its own stream derived from the master seed and a canonical
key of the query, so answers do not depend on call order.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .dgp import DgpSpec, as_point
from .errors import (DomainError, NumericError, OwnershipError, UnreachableTarget,
                     UsageError)
from .numerics import bisect_increasing

__all__ = ["OracleConfig", "FixedEffectHandle", "SelfPair", "SELF_PAIR", "Against",
           "Oracle", "LESS", "EQUAL", "GREATER"]

LESS, EQUAL, GREATER = "Less", "Equal", "Greater"


@dataclass(frozen=True)
class OracleConfig:
    """Oracle access mode.

    Args:
        mode: ``"Analytic"`` or ``"MonteCarlo"``.
        B: draws per MonteCarlo query; the string ``"network"`` means the
            number of dyads a size-``n`` network offers for that query.
        seed: master seed for MonteCarlo streams.
        quadrature: Gauss-Legendre order for integrating over partners.
        tol: probability tolerance for handle searches and popularity ties.
            Defaults to 1e-10 (Analytic) or 1/sqrt(B) (MonteCarlo).
        n: network size used for sparse meeting rates.
    """

    mode: str = "Analytic"
    B: int | str = 10_000
    seed: int = 0
    quadrature: int = 64
    tol: float | None = None
    n: int | None = None

    def __post_init__(self):
        if self.mode not in ("Analytic", "MonteCarlo"):
            raise UsageError(f"unknown oracle mode {self.mode!r}")
        if self.B != "network" and (not isinstance(self.B, (int, np.integer)) or self.B < 1):
            raise UsageError("B must be a positive integer or 'network'")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("tolerance must be positive")
        if self.quadrature < 2:
            raise UsageError("quadrature order must be at least 2")


@dataclass(frozen=True)
class FixedEffectHandle:
    """Opaque token naming an individual type (covariate, hidden fixed effect)."""

    id: int
    covariate: object
    _issuer: object = field(repr=False, compare=False, hash=False)


class SelfPair:
    """Reference: pair the searched type with an identical copy of itself."""

    def __repr__(self):
        return "SelfPair"


SELF_PAIR = SelfPair()


@dataclass(frozen=True)
class Against:
    """Reference: pair the searched type with a fixed reference handle."""

    ref: FixedEffectHandle


class _LatentStore:
    def __init__(self):
        self.cov = []
        self.a = []
        self.lock = threading.Lock()

    def add(self, covs, values):
        with self.lock:
            start = len(self.a)
            self.cov.extend(int(c) for c in covs)
            self.a.extend(float(v) for v in values)
            return range(start, len(self.a))


def _key_int(key):
    digest = hashlib.blake2b(repr(key).encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def _canon(a):
    return int(round(float(a) * 1e12))


class Oracle:
    """Observable population quantities for one DGP.

    Args:
        dgp: the true data-generating process (kept private).
        config: access mode and tolerances.
    """

    def __init__(self, dgp: DgpSpec, config: OracleConfig | None = None, _store=None):
        self._dgp = dgp
        self.config = config or OracleConfig()
        self._store = _store if _store is not None else _LatentStore()
        self._w = dgp.homophily_matrix()
        self._index = dgp.index_fn()
        self._cdf = dgp.shocks.cdf
        self._law = dgp.fixed_effects
        self._support = self._law.support()
        self._qnodes, self._qweights = self._law.quadrature(self.config.quadrature)
        self._cweights = dgp.weights()
        self._sparse = dgp.sparsity.sparse
        self._pn = dgp.meeting_rate(self.config.n) if (not self._sparse or self.config.n) else None

    # -- public, observable configuration ---------------------------------
    @property
    def covariates(self):
        return self._dgp.covariates

    @property
    def sparse(self):
        return self._sparse

    @property
    def mode(self):
        return self.config.mode

    @property
    def tol(self):
        if self.config.tol is not None:
            return self.config.tol
        if self.config.mode == "Analytic":
            return 1e-10
        return 1.0 / math.sqrt(self._draws("pair"))

    def at_n(self, n):
        """View of the same population at network size n (sharing handles)."""
        cfg = OracleConfig(self.config.mode, self.config.B, self.config.seed,
                           self.config.quadrature, self.config.tol, int(n))
        return Oracle(self._dgp, cfg, _store=self._store)

    # -- internals ----------------------------------------------------------
    def _cov(self, x):
        x = as_point(x)
        try:
            return self._dgp.covariates.index(x)
        except ValueError:
            raise DomainError(f"covariate {x!r} outside the configured support") from None

    def _lookup(self, handles):
        ids = []
        for h in handles:
            if not isinstance(h, FixedEffectHandle) or h._issuer is not self._store:
                raise OwnershipError("handle was not issued by this oracle")
            ids.append(h.id)
        cov = np.array([self._store.cov[i] for i in ids], dtype=int)
        a = np.array([self._store.a[i] for i in ids], dtype=float)
        return cov, a

    def _issue(self, covs, values):
        ids = self._store.add(covs, values)
        return [FixedEffectHandle(i, self._dgp.covariates[c], self._store)
                for i, c in zip(ids, covs)]

    def _meeting(self):
        if self._pn is None:
            raise UsageError("sparse DGP: configure the oracle with n (or use at_n)")
        return self._pn

    def _prob(self, c1, a1, c2, a2):
        w = self._w[c1, c2]
        p = self._cdf(self._index(w, a1, a2))
        if self._sparse:
            p = p * self._meeting()[c1, c2]
        return np.asarray(p, dtype=float)

    def _draws(self, kind):
        B = self.config.B
        if B != "network":
            return int(B)
        n = self.config.n
        if n is None:
            raise UsageError("B='network' needs the network size n")
        if kind == "density":
            return n * (n - 1) // 2
        return n - 1

    def _rng(self, key):
        ss = np.random.SeedSequence([int(self.config.seed) & 0xFFFFFFFFFFFFFFFF, _key_int(key)])
        return np.random.Generator(np.random.PCG64(ss))

    def _mc_mean(self, p, key, kind="pair"):
        B = self._draws(kind)
        return self._rng(key).binomial(B, min(max(float(p), 0.0), 1.0)) / B

    def _pair_key(self, c1, a1, c2, a2):
        left, right = (int(c1), _canon(a1)), (int(c2), _canon(a2))
        return ("pair", self.config.n) + tuple(sorted([left, right]))

    # -- link probabilities ------------------------------------------------
    def pair_prob(self, h1, h2):
        """E[D_ij | types h1, h2]."""
        return float(self.pair_probs([h1], [h2])[0])

    def pair_probs(self, hs1, hs2):
        """Vectorized pair_prob over two equal-length handle sequences."""
        if len(hs1) != len(hs2):
            raise UsageError("handle sequences differ in length")
        c1, a1 = self._lookup(hs1)
        c2, a2 = self._lookup(hs2)
        p = self._prob(c1, a1, c2, a2)
        if self.config.mode == "MonteCarlo":
            p = np.array([self._mc_mean(pi, self._pair_key(*args))
                          for pi, args in zip(p, zip(c1, a1, c2, a2))])
        return p

    def scaled_pair_prob(self, h1, h2, n, kappa_hat):
        """n**kappa_hat times the pair probability in a size-n network."""
        if not self._sparse:
            raise UsageError("scaled_pair_prob requires a sparse DGP")
        return float(n) ** float(kappa_hat) * self.at_n(n).pair_prob(h1, h2)

    # -- handle search -----------------------------------------------------
    def _query_map(self, c, ref, size):
        """Return m(a) for the reference and its (inf, sup) over the support."""
        if isinstance(ref, SelfPair):
            fun = lambda a: self._prob(c, a, c, a)
        elif isinstance(ref, Against):
            rc, ra = self._lookup([ref.ref])
            fun = lambda a: self._prob(rc[0], ra[0], c, a)
        elif isinstance(ref, (list, tuple)):
            rc, ra = self._lookup([r.ref for r in ref])
            fun = lambda a: self._prob(rc, ra, c, a)
        else:
            raise UsageError(f"unknown reference {ref!r}")
        return fun

    def reachable_range(self, x, reference=SELF_PAIR):
        """Closure of the range of the monotone query map over the support."""
        c = self._cov(x)
        fun = self._query_map(c, reference, 1)
        lo, hi = self._support
        with np.errstate(over="ignore"):
            f_lo = float(np.atleast_1d(fun(np.array([lo])))[0]) if math.isfinite(lo) else 0.0
            f_hi = float(np.atleast_1d(fun(np.array([hi])))[0]) if math.isfinite(hi) else 1.0
        if self._sparse and not math.isfinite(hi):
            f_hi = float(self._meeting()[c, c]) if isinstance(reference, SelfPair) else f_hi
        return f_lo, f_hi

    def find_handle(self, x, reference, target):
        """Handle h whose query (self pair or against a reference) hits ``target``."""
        out = self.find_handles(x, reference, [target])
        return out[0]

    def find_handles(self, x, reference, targets, on_unreachable="raise"):
        """Vectorized find_handle at covariate ``x``.

        ``reference`` is ``SELF_PAIR``, an :class:`Against`, or a list of
        ``Against`` (one per target).  With ``on_unreachable="skip"`` the
        unreachable targets yield ``None`` instead of raising.
        """
        c = self._cov(x)
        t = np.asarray(targets, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t <= 0) or np.any(t >= 1):
            raise UsageError("targets must lie in (0, 1)")
        if isinstance(reference, (list, tuple)) and len(reference) != t.size:
            raise UsageError("one reference per target is required")
        fun = self._query_map(c, reference, t.size)
        solve_t = t.copy()
        if self.config.mode == "MonteCarlo":
            solve_t = self._mc_order_statistics(c, reference, t)
        lo_s, hi_s = self._support
        lo, hi, ok = self._bracket(fun, solve_t, lo_s, hi_s)
        found = np.full(t.shape, np.nan)
        if np.any(ok):
            idx = np.nonzero(ok)[0]
            sub = lambda a: _take(fun(_full(a, idx, t.size, lo)), idx)
            found[idx] = bisect_increasing(sub, solve_t[idx], lo[idx], hi[idx])
            resid = np.abs(sub(found[idx]) - solve_t[idx])
            bad = resid > max(self.tol, 1e-12)
            if np.any(bad):
                # a flat stretch (saturation) makes the target numerically unreachable
                ok[idx[bad]] = False
        results = []
        for k in range(t.size):
            if ok[k]:
                continue
            if on_unreachable == "raise":
                f_lo, f_hi = self._range_for(fun, k, lo_s, hi_s, t.size)
                raise UnreachableTarget(t[k], f_lo, f_hi)
        handles = self._issue([c] * int(ok.sum()), found[ok])
        it = iter(handles)
        for k in range(t.size):
            results.append(next(it) if ok[k] else None)
        return results

    def _range_for(self, fun, k, lo_s, hi_s, size):
        def at(v):
            arr = np.full(size, v)
            with np.errstate(over="ignore"):
                return float(np.atleast_1d(fun(arr))[k])
        f_lo = at(lo_s) if math.isfinite(lo_s) else 0.0
        f_hi = at(hi_s) if math.isfinite(hi_s) else 1.0
        return f_lo, f_hi

    def _bracket(self, fun, t, lo_s, hi_s):
        n = t.size
        if math.isfinite(lo_s) and math.isfinite(hi_s):
            lo = np.full(n, lo_s)
            hi = np.full(n, hi_s)
            f_lo, f_hi = fun(lo), fun(hi)
            tol = 1e-15
            ok = (f_lo <= t + tol) & (f_hi >= t - tol)
            return lo, hi, ok
        q_lo = float(self._law.quantile(1e-6))
        q_hi = float(self._law.quantile(1 - 1e-6))
        lo = np.full(n, q_lo)
        hi = np.full(n, q_hi)
        width = max(q_hi - q_lo, 1.0)
        for _ in range(80):
            f_lo, f_hi = fun(lo), fun(hi)
            need_lo = f_lo > t
            need_hi = f_hi < t
            if not (np.any(need_lo) or np.any(need_hi)):
                break
            lo = np.where(need_lo, lo - width, lo)
            hi = np.where(need_hi, hi + width, hi)
            width *= 2.0
            if width > 1e300:
                break
        f_lo, f_hi = fun(lo), fun(hi)
        ok = (f_lo <= t) & (f_hi >= t)
        return lo, hi, ok

    def _mc_order_statistics(self, c, reference, t):
        """Crossing level of a common-random-numbers sample mean.

        Bisecting the B-draw sample mean m_hat(a) over a (with the draws held
        fixed) stops where m(a) equals the k-th order statistic of the B
        uniforms, k = ceil(t B).  That order statistic is Beta(k, B + 1 - k),
        which is sampled directly.
        """
        B = self._draws("pair")
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            if isinstance(reference, SelfPair):
                rkey = ("self",)
            else:
                r = reference[i] if isinstance(reference, (list, tuple)) else reference
                rc, ra = self._lookup([r.ref])
                rkey = ("against", int(rc[0]), _canon(ra[0]))
            k = min(max(int(math.ceil(ti * B - 1e-9)), 1), B)
            rng = self._rng(("find", self.config.n, int(c), rkey, _canon(ti)))
            out[i] = rng.beta(k, B + 1 - k)
        return np.clip(out, 1e-300, 1 - 1e-16)

    # -- popularity --------------------------------------------------------
    def _popularity_exact(self, c, a):
        a = np.atleast_1d(a)
        tot = np.zeros(a.size)
        nodes, wts = self._qnodes, self._qweights
        for j, cw in enumerate(self._cweights):
            w = self._w[c, j]
            vals = self._cdf(self._index(w, a[:, None], nodes[None, :])) @ wts
            if self._sparse:
                vals = vals * self._meeting()[c, j]
            tot += cw * vals
        if not np.all(np.isfinite(tot)):
            raise NumericError("non-finite popularity quadrature")
        return tot

    def popularity(self, h):
        """Link probability of type h against a random partner from the population."""
        return float(self.popularities([h])[0])

    def popularities(self, hs):
        cov, a = self._lookup(hs)
        out = np.empty(len(hs))
        for k in range(len(hs)):
            out[k] = self._popularity_exact(cov[k], a[k])[0]
        if self.config.mode == "MonteCarlo":
            out = np.array([self._mc_mean(p, ("pop", self.config.n, int(c), _canon(v)), "popularity")
                            for p, c, v in zip(out, cov, a)])
        return out

    def compare_popularity(self, h1, h2):
        """Order two same-covariate types by popularity (ties within tol)."""
        if as_point(h1.covariate) != as_point(h2.covariate):
            raise UsageError("popularity comparison needs a common covariate")
        p1, p2 = self.popularities([h1, h2])
        if abs(p1 - p2) <= self.tol:
            return EQUAL
        return GREATER if p1 > p2 else LESS

    def density(self):
        """Probability that a random dyad links (both partners from the population)."""
        nodes, wts = self._qnodes, self._qweights
        tot = 0.0
        for i, ci in enumerate(self._cweights):
            for j, cj in enumerate(self._cweights):
                mat = self._cdf(self._index(self._w[i, j], nodes[:, None], nodes[None, :]))
                val = wts @ mat @ wts
                if self._sparse:
                    val *= self._meeting()[i, j]
                tot += ci * cj * val
        if self.config.mode == "MonteCarlo":
            tot = self._mc_mean(tot, ("density", self.config.n), "density")
        return float(tot)

    # -- rank selection ----------------------------------------------------
    def handle_at_rank(self, x, u=None, tail=None):
        """Type at a given population rank of popularity among covariate-x individuals.

        Popularity orders fixed effects within a covariate cell, so the type
        at rank ``u`` (or with upper-tail mass ``tail``) is observable.
        """
        if (u is None) == (tail is None):
            raise UsageError("give exactly one of u or tail")
        c = self._cov(x)
        if tail is not None:
            if not 0 < tail < 1:
                raise UsageError("tail mass must lie in (0, 1)")
            a = float(self._law.isf(tail))
        else:
            if not 0 < u < 1:
                raise UsageError("rank must lie in (0, 1)")
            a = float(self._law.quantile(u))
        return self._issue([c], [a])[0]


def _full(a_sub, idx, size, fill):
    arr = np.array(fill, dtype=float, copy=True)
    arr[idx] = a_sub
    return arr


def _take(vals, idx):
    return np.asarray(vals)[idx]
