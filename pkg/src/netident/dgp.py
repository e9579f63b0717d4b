"""True data-generating process for the dyadic link-formation model.

A link between ``i`` and ``j`` forms when ``w(X_i, X_j) + phi(A_i, A_j) >= U_ij``
where ``U_ij`` is an i.i.d. shock with CDF ``F``.  Everything in this module is
an *unknown* from the point of view of the recovery engine, which only sees
the oracle surface built on top of it.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, UsageError

__all__ = [
    "lambda_eval", "HomophilySpec", "ShockDistribution", "FixedEffectLaw",
    "CouplingSpec", "SparsitySpec", "NonseparableSpec", "DgpSpec",
    "SimulatedNetwork", "link_probability", "simulate_network",
    "as_point", "logistic_fixture",
]


def as_point(x):
    """Normalize a covariate value: scalars become floats, vectors tuples."""
    if isinstance(x, (list, tuple, np.ndarray)):
        vals = tuple(float(v) for v in np.ravel(x))
        return vals[0] if len(vals) == 1 else vals
    return float(x)


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# lambda: the periodic-homogeneous coupling
# ---------------------------------------------------------------------------

def lambda_eval(a):
    """Periodic-homogeneous function with period 2.

    lambda(a) = a + sign(a) * 2**m / (4 pi) * sin(4 pi a / 2**m),
    m = floor(log2 |a|), and lambda(0) = 0.  Accepts scalars or arrays.
    """
    arr = np.asarray(a, dtype=float)
    out = np.zeros_like(arr)
    nz = arr != 0.0
    if np.any(nz):
        x = arr[nz]
        m = np.floor(np.log2(np.abs(x)))
        p = np.exp2(m)
        out[nz] = x + np.sign(x) * p / (4.0 * np.pi) * np.sin(4.0 * np.pi * x / p)
    if np.ndim(a) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# homophily
# ---------------------------------------------------------------------------

HOMOPHILY_FAMILIES = ("NegAbsDiff", "NegEuclid", "ScaledLinear", "ConstantZero", "TableLookup")
PAIRWISE_MAPS = ("absdiff", "absdiff_components", "sqdiff_components")


def pairwise_features(name, x1, x2):
    """Built-in W-tilde families; each vanishes on the diagonal."""
    d = _vec(x1) - _vec(x2)
    if name == "absdiff":
        return np.array([np.sum(np.abs(d))])
    if name == "absdiff_components":
        return np.abs(d)
    if name == "sqdiff_components":
        return d * d
    raise UsageError(f"unknown pairwise map {name!r}")


@dataclass(frozen=True)
class HomophilySpec:
    """Homophily function w(x1, x2) = theta + scale * g(x1, x2) with g(x, x) = 0.

    ``TableLookup`` stores w values directly as (x1, x2, w) triples; its
    diagonal must equal ``theta`` unless ``enforce_diagonal`` is switched off
    (used only for fixtures that deliberately break the constant diagonal).
    """

    family: str = "ConstantZero"
    theta: float = 0.0
    scale: float = 1.0
    beta: tuple | None = None
    pairwise_map: str | None = None
    table: tuple | None = None
    enforce_diagonal: bool = True

    def __post_init__(self):
        if self.family not in HOMOPHILY_FAMILIES:
            raise UsageError(f"unknown homophily family {self.family!r}")
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(float(b) for b in np.ravel(self.beta)))
        if self.family == "ScaledLinear":
            if self.beta is None or self.pairwise_map not in PAIRWISE_MAPS:
                raise UsageError("ScaledLinear needs beta and a built-in pairwise_map")
        if self.table is not None:
            rows = tuple((as_point(r[0]), as_point(r[1]), float(r[2])) for r in self.table)
            object.__setattr__(self, "table", rows)
        if self.family == "TableLookup":
            if not self.table:
                raise UsageError("TableLookup needs a table")
            if self.enforce_diagonal:
                for x1, x2, val in self.table:
                    if x1 == x2 and abs(val - self.theta) > 1e-12:
                        raise UsageError("TableLookup diagonal differs from theta")

    def _table_map(self):
        out = {}
        for x1, x2, val in self.table:
            out[(x1, x2)] = val
            out.setdefault((x2, x1), val)
        return out

    def evaluate(self, x1, x2):
        x1, x2 = as_point(x1), as_point(x2)
        if self.family == "TableLookup":
            tab = self._table_map()
            if (x1, x2) in tab:
                return tab[(x1, x2)]
            if x1 == x2 and self.enforce_diagonal:
                return self.theta
            raise DomainError(f"no table entry for ({x1}, {x2})")
        if self.family == "ConstantZero":
            g = 0.0
        elif self.family == "NegAbsDiff":
            g = -float(np.sum(np.abs(_vec(x1) - _vec(x2))))
        elif self.family == "NegEuclid":
            g = -float(np.linalg.norm(_vec(x1) - _vec(x2)))
        else:
            feats = pairwise_features(self.pairwise_map, x1, x2)
            if feats.size != len(self.beta):
                raise UsageError("beta length does not match pairwise map dimension")
            g = float(feats @ np.asarray(self.beta))
        return self.theta + self.scale * g


# ---------------------------------------------------------------------------
# shocks
# ---------------------------------------------------------------------------

SHOCK_FAMILIES = ("Logistic", "Normal", "Cauchy", "PiecewiseLinearCdf")


@dataclass(frozen=True)
class ShockDistribution:
    """Continuous, strictly increasing shock CDF F.

    ``PiecewiseLinearCdf`` interpolates a (u, p) table linearly and attaches
    exponential tails whose slopes match the end segments.
    """

    family: str = "Logistic"
    loc: float = 0.0
    scale: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        if self.family not in SHOCK_FAMILIES:
            raise UsageError(f"unknown shock family {self.family!r}")
        if self.family == "PiecewiseLinearCdf":
            if not self.table or len(self.table) < 2:
                raise UsageError("PiecewiseLinearCdf needs at least two knots")
            rows = tuple((float(u), float(p)) for u, p in self.table)
            u = np.array([r[0] for r in rows])
            p = np.array([r[1] for r in rows])
            if np.any(np.diff(u) <= 0) or np.any(np.diff(p) <= 0) or p[0] <= 0 or p[-1] >= 1:
                raise UsageError("PiecewiseLinearCdf table must be strictly increasing inside (0,1)")
            object.__setattr__(self, "table", rows)
        elif not self.scale > 0:
            raise UsageError("shock scale must be positive")

    def _pw(self):
        u = np.array([r[0] for r in self.table])
        p = np.array([r[1] for r in self.table])
        s0 = (p[1] - p[0]) / (u[1] - u[0])
        s1 = (p[-1] - p[-2]) / (u[-1] - u[-2])
        return u, p, s0, s1

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "Logistic":
            out = special.expit((x - self.loc) / self.scale)
        elif self.family == "Normal":
            out = special.ndtr((x - self.loc) / self.scale)
        elif self.family == "Cauchy":
            out = 0.5 + np.arctan((x - self.loc) / self.scale) / np.pi
        else:
            u, p, s0, s1 = self._pw()
            out = np.interp(x, u, p)
            lo = x < u[0]
            hi = x > u[-1]
            with np.errstate(over="ignore", under="ignore"):
                out = np.where(lo, p[0] * np.exp(s0 * (x - u[0]) / p[0]), out)
                out = np.where(hi, 1.0 - (1.0 - p[-1]) * np.exp(-s1 * (x - u[-1]) / (1.0 - p[-1])), out)
        return out if out.ndim else float(out)

    def quantile(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "Logistic":
            out = self.loc + self.scale * special.logit(t)
        elif self.family == "Normal":
            out = self.loc + self.scale * special.ndtri(t)
        elif self.family == "Cauchy":
            out = self.loc + self.scale * np.tan(np.pi * (t - 0.5))
        else:
            u, p, s0, s1 = self._pw()
            out = np.interp(t, p, u)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(t < p[0], u[0] + p[0] / s0 * np.log(t / p[0]), out)
                out = np.where(t > p[-1], u[-1] - (1 - p[-1]) / s1 * np.log((1 - t) / (1 - p[-1])), out)
        return out if out.ndim else float(out)

    def affine(self, c, shift):
        """Law of c * U + shift."""
        if not c > 0:
            raise UsageError("scale factor must be positive")
        if self.family == "PiecewiseLinearCdf":
            rows = tuple((c * u + shift, p) for u, p in self.table)
            return dataclasses.replace(self, table=rows)
        return dataclasses.replace(self, loc=c * self.loc + shift, scale=c * self.scale)


# ---------------------------------------------------------------------------
# fixed effects
# ---------------------------------------------------------------------------

FE_FAMILIES = ("NormalLaw", "UniformLaw", "DyadicGridLaw", "Degenerate")
FE_MAPS = ("affine", "cubic_shift")


def _apply_map(kind, params, a):
    if kind == "affine":
        c, shift = params
        return c * a + shift
    if kind == "cubic_shift":
        (b,) = params
        return np.cbrt(a ** 3 + 0.5 * b)
    raise UsageError(f"unknown fixed-effect map {kind!r}")


def _invert_map(kind, params, a):
    if kind == "affine":
        c, shift = params
        return (a - shift) / c
    (b,) = params
    return np.cbrt(a ** 3 - 0.5 * b)


@dataclass(frozen=True)
class FixedEffectLaw:
    """Law of A (independent of X).

    ``maps`` is a sequence of strictly increasing transforms applied to a base
    draw, e.g. ``(("affine", (c, a)),)`` for ``c * A + a`` or
    ``(("cubic_shift", (b,)),)`` for ``cbrt(A**3 + b/2)``.
    """

    family: str = "NormalLaw"
    mu: float = 0.0
    sigma: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    depth: int = 4
    maps: tuple = ()

    def __post_init__(self):
        if self.family not in FE_FAMILIES:
            raise UsageError(f"unknown fixed-effect family {self.family!r}")
        if self.family == "NormalLaw" and not self.sigma > 0:
            raise UsageError("NormalLaw sigma must be positive")
        if self.family in ("UniformLaw", "DyadicGridLaw") and not self.lo < self.hi:
            raise UsageError("bounded support needs lo < hi")
        maps = tuple((str(k), tuple(float(v) for v in p)) for k, p in self.maps)
        for k, p in maps:
            if k not in FE_MAPS:
                raise UsageError(f"unknown fixed-effect map {k!r}")
            if k == "affine" and not p[0] > 0:
                raise UsageError("affine map needs a positive scale")
        object.__setattr__(self, "maps", maps)

    @property
    def bounded(self):
        return self.family != "NormalLaw"

    def _fwd(self, a):
        for k, p in self.maps:
            a = _apply_map(k, p, a)
        return a

    def _inv(self, a):
        for k, p in reversed(self.maps):
            a = _invert_map(k, p, a)
        return a

    def base_support(self):
        if self.family == "NormalLaw":
            return -math.inf, math.inf
        if self.family == "Degenerate":
            return self.mu, self.mu
        return self.lo, self.hi

    def support(self):
        lo, hi = self.base_support()
        f = lambda v: v if math.isinf(v) else float(self._fwd(np.float64(v)))
        return f(lo), f(hi)

    def _base_quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "NormalLaw":
            return self.mu + self.sigma * special.ndtri(u)
        if self.family == "UniformLaw":
            return self.lo + (self.hi - self.lo) * u
        if self.family == "Degenerate":
            return np.full_like(u, self.mu)
        n = 2 ** self.depth
        k = np.clip(np.ceil(u * (n + 1)) - 1, 0, n)
        return self.lo + (self.hi - self.lo) * k / n

    def quantile(self, u):
        """Population quantile of A at rank u in (0, 1)."""
        out = self._fwd(self._base_quantile(u))
        return out if np.ndim(out) else float(out)

    def isf(self, tail):
        """Value exceeded with probability ``tail`` (accurate for tiny tails)."""
        tail = np.asarray(tail, dtype=float)
        if self.family == "NormalLaw":
            base = self.mu - self.sigma * special.ndtri(tail)
        else:
            base = self._base_quantile(1.0 - tail)
        out = self._fwd(base)
        return out if np.ndim(out) else float(out)

    def cdf(self, a):
        base = self._inv(np.asarray(a, dtype=float))
        if self.family == "NormalLaw":
            out = special.ndtr((base - self.mu) / self.sigma)
        elif self.family == "UniformLaw":
            out = np.clip((base - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        elif self.family == "Degenerate":
            out = (base >= self.mu).astype(float)
        else:
            n = 2 ** self.depth
            k = np.floor((base - self.lo) / (self.hi - self.lo) * n + 1e-9)
            out = np.clip((k + 1) / (n + 1), 0.0, 1.0)
        return out if np.ndim(out) else float(out)

    def sample(self, rng, size):
        if self.family == "NormalLaw":
            base = rng.normal(self.mu, self.sigma, size)
        elif self.family == "UniformLaw":
            base = rng.uniform(self.lo, self.hi, size)
        elif self.family == "Degenerate":
            base = np.full(size, self.mu)
        else:
            n = 2 ** self.depth
            base = self.lo + (self.hi - self.lo) * rng.integers(0, n + 1, size) / n
        return self._fwd(base)

    def quadrature(self, order=64):
        """Nodes and weights integrating against the law.

        Gauss-Legendre over a truncated range carrying at least 1 - 1e-10 of
        the mass (NormalLaw), Gauss-Legendre over the support (UniformLaw),
        exact atoms otherwise.
        """
        if self.family == "Degenerate":
            return self._fwd(np.array([self.mu])), np.array([1.0])
        if self.family == "DyadicGridLaw":
            n = 2 ** self.depth
            atoms = self.lo + (self.hi - self.lo) * np.arange(n + 1) / n
            return self._fwd(atoms), np.full(n + 1, 1.0 / (n + 1))
        x, wts = np.polynomial.legendre.leggauss(order)
        if self.family == "UniformLaw":
            lo, hi = self.lo, self.hi
            nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            return self._fwd(nodes), 0.5 * wts
        half = 6.47 * self.sigma
        nodes = self.mu + half * x
        dens = np.exp(-0.5 * ((nodes - self.mu) / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi))
        w = wts * half * dens
        return self._fwd(nodes), w / w.sum()

    def affine(self, c, shift):
        """Law of c * A + shift, keeping the family when possible."""
        if not c > 0:
            raise UsageError("scale factor must be positive")
        if self.maps:
            return dataclasses.replace(self, maps=self.maps + (("affine", (c, shift)),))
        if self.family == "NormalLaw":
            return dataclasses.replace(self, mu=c * self.mu + shift, sigma=c * self.sigma)
        if self.family == "Degenerate":
            return dataclasses.replace(self, mu=c * self.mu + shift)
        return dataclasses.replace(self, lo=c * self.lo + shift, hi=c * self.hi + shift)

    def with_map(self, kind, params):
        return dataclasses.replace(self, maps=self.maps + ((kind, tuple(params)),))


# ---------------------------------------------------------------------------
# coupling, sparsity, nonseparable index
# ---------------------------------------------------------------------------

COUPLING_FAMILIES = ("LinearSum", "Cubic", "LambdaPeriodic", "TranslatableCubic")


@dataclass(frozen=True)
class CouplingSpec:
    """Symmetric, strictly increasing coupling phi(a1, a2)."""

    family: str = "LinearSum"
    offset: float = 0.0

    def __post_init__(self):
        if self.family not in COUPLING_FAMILIES:
            raise UsageError(f"unknown coupling family {self.family!r}")

    def phi(self, a1, a2):
        a1 = np.asarray(a1, dtype=float)
        a2 = np.asarray(a2, dtype=float)
        if self.family == "LinearSum":
            out = a1 + a2
        elif self.family == "Cubic":
            out = (a1 + a2) ** 3
        elif self.family == "LambdaPeriodic":
            out = lambda_eval(a1 + a2)
        else:
            out = self.offset + a1 ** 3 + a2 ** 3
        return out if np.ndim(out) else float(out)

    def phi_bar(self, a):
        return self.phi(a, a)


@dataclass(frozen=True)
class SparsitySpec:
    """Meeting-rate regime: p_n(x1, x2) = C n^-kappa q(x1, x2) when sparse."""

    mode: str = "Dense"
    C: float = 1.0
    kappa: float = 0.0
    q: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("Dense", "Sparse"):
            raise UsageError(f"unknown sparsity mode {self.mode!r}")
        if self.mode == "Sparse":
            if not self.C > 0:
                raise UsageError("C must be positive")
            if not 0.0 <= self.kappa < 1.0:
                raise UsageError("kappa must lie in [0, 1)")
        if self.q is not None:
            rows = tuple((as_point(r[0]), as_point(r[1]), float(r[2])) for r in self.q)
            if any(r[2] <= 0 for r in rows):
                raise UsageError("q must be positive")
            object.__setattr__(self, "q", rows)

    @property
    def sparse(self):
        return self.mode == "Sparse"

    def q_value(self, x1, x2):
        if self.q is None:
            return 1.0
        x1, x2 = as_point(x1), as_point(x2)
        for a, b, v in self.q:
            if (a, b) == (x1, x2) or (b, a) == (x1, x2):
                return v
        return 1.0


@dataclass(frozen=True)
class NonseparableSpec:
    """Optional nonseparable index.

    ``AdditiveWrap`` reproduces w + phi; ``InteractedDemo`` uses
    w(x1, x2) * (1 + rho * (a1 + a2)) + a1 + a2.
    """

    kind: str = "AdditiveWrap"
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("AdditiveWrap", "InteractedDemo"):
            raise UsageError(f"unknown nonseparable kind {self.kind!r}")


# ---------------------------------------------------------------------------
# the full DGP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DgpSpec:
    homophily: HomophilySpec = field(default_factory=HomophilySpec)
    shocks: ShockDistribution = field(default_factory=ShockDistribution)
    fixed_effects: FixedEffectLaw = field(default_factory=FixedEffectLaw)
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    covariates: tuple = (0.0,)
    covariate_weights: tuple | None = None
    sparsity: SparsitySpec = field(default_factory=SparsitySpec)
    index: NonseparableSpec | None = None

    def __post_init__(self):
        covs = tuple(as_point(x) for x in self.covariates)
        if not covs:
            raise UsageError("covariate support is empty")
        if len(set(covs)) != len(covs):
            raise UsageError("duplicate covariate points")
        object.__setattr__(self, "covariates", covs)
        if self.covariate_weights is not None:
            wts = np.asarray(self.covariate_weights, dtype=float)
            if wts.shape != (len(covs),) or np.any(wts <= 0):
                raise UsageError("covariate weights must be positive, one per point")
            object.__setattr__(self, "covariate_weights", tuple(wts / wts.sum()))
        # evaluating the matrix validates table coverage and symmetry
        w = self.homophily_matrix()
        if not np.allclose(w, w.T, rtol=0, atol=1e-12):
            raise UsageError("homophily is not symmetric")

    @property
    def n_cov(self):
        return len(self.covariates)

    def weights(self):
        if self.covariate_weights is None:
            return np.full(self.n_cov, 1.0 / self.n_cov)
        return np.asarray(self.covariate_weights)

    def covariate_index(self, x):
        x = as_point(x)
        try:
            return self.covariates.index(x)
        except ValueError:
            raise DomainError(f"covariate {x!r} outside the configured support") from None

    def homophily_matrix(self):
        k = len(self.covariates)
        out = np.empty((k, k))
        for i, x1 in enumerate(self.covariates):
            for j, x2 in enumerate(self.covariates):
                out[i, j] = self.homophily.evaluate(x1, x2)
        return out

    def q_matrix(self):
        k = len(self.covariates)
        out = np.ones((k, k))
        for i, x1 in enumerate(self.covariates):
            for j, x2 in enumerate(self.covariates):
                out[i, j] = self.sparsity.q_value(x1, x2)
        return out

    def meeting_rate(self, n):
        """Matrix of p_n(x1, x2); all ones in dense mode."""
        if not self.sparsity.sparse:
            return np.ones((self.n_cov, self.n_cov))
        if n is None:
            raise UsageError("sparse mode needs the network size n")
        p = self.sparsity.C * float(n) ** (-self.sparsity.kappa) * self.q_matrix()
        if np.any(p > 1.0):
            raise UsageError(f"meeting rate exceeds one at n={n}")
        return p

    def index_fn(self):
        """Return f(w, a1, a2) giving the latent index from a homophily value."""
        if self.index is not None and self.index.kind == "InteractedDemo":
            rho = self.index.rho
            return lambda w, a1, a2: w * (1.0 + rho * (a1 + a2)) + a1 + a2
        phi = self.coupling.phi
        return lambda w, a1, a2: w + phi(a1, a2)

    def to_dict(self):
        return _to_jsonable(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kw = {}
        kw["homophily"] = HomophilySpec(**_tupled(d.get("homophily", {})))
        kw["shocks"] = ShockDistribution(**_tupled(d.get("shocks", {})))
        kw["fixed_effects"] = FixedEffectLaw(**_tupled(d.get("fixed_effects", {})))
        kw["coupling"] = CouplingSpec(**d.get("coupling", {}))
        kw["sparsity"] = SparsitySpec(**_tupled(d.get("sparsity", {})))
        if d.get("index") is not None:
            kw["index"] = NonseparableSpec(**d["index"])
        kw["covariates"] = tuple(as_point(x) for x in d.get("covariates", [0.0]))
        if d.get("covariate_weights") is not None:
            kw["covariate_weights"] = tuple(d["covariate_weights"])
        return cls(**kw)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _tupled(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, list):
            out[k] = tuple(tuple(r) if isinstance(r, list) else r for r in v)
            if k == "maps":
                out[k] = tuple((r[0], tuple(r[1])) for r in v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def link_probability(dgp: DgpSpec, x1, x2, a1, a2, n=None):
    """P(D_12 = 1 | x1, x2, a1, a2), including the meeting rate when sparse."""
    i, j = dgp.covariate_index(x1), dgp.covariate_index(x2)
    w = dgp.homophily_matrix()[i, j]
    p = dgp.shocks.cdf(dgp.index_fn()(w, np.asarray(a1, float), np.asarray(a2, float)))
    if dgp.sparsity.sparse:
        if n is None:
            raise UsageError("sparse mode needs the network size n")
        p = p * dgp.meeting_rate(n)[i, j]
    return p if np.ndim(p) else float(p)


@dataclass(frozen=True)
class SimulatedNetwork:
    n: int
    covariates: tuple
    covariate_index: np.ndarray
    adjacency: np.ndarray
    seed: int
    _latent: np.ndarray = field(repr=False, compare=False, default=None)

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return np.column_stack([i, j])

    def degrees(self):
        return self.adjacency.sum(axis=1)


def simulate_network(dgp: DgpSpec, n: int, seed: int) -> SimulatedNetwork:
    """Draw one network of size n.

    Node draws and dyad shocks use separate child streams of ``seed``.  Dyad
    uniforms are consumed in canonical upper-triangular order, so the shock of
    dyad (i, j) depends only on (seed, pair index).
    """
    if n < 2:
        raise UsageError("n must be at least 2")
    ss = np.random.SeedSequence(int(seed))
    node_ss, dyad_ss, meet_ss = ss.spawn(3)
    node_rng = np.random.Generator(np.random.PCG64(node_ss))
    cidx = node_rng.choice(dgp.n_cov, size=n, p=dgp.weights())
    a = dgp.fixed_effects.sample(node_rng, n)
    iu, ju = np.triu_indices(n, 1)
    u = np.random.Generator(np.random.Philox(dyad_ss)).random(iu.size)
    w = dgp.homophily_matrix()[cidx[iu], cidx[ju]]
    prob = dgp.shocks.cdf(dgp.index_fn()(w, a[iu], a[ju]))
    link = u < prob
    if dgp.sparsity.sparse:
        meet = np.random.Generator(np.random.Philox(meet_ss)).random(iu.size)
        link &= meet < dgp.meeting_rate(n)[cidx[iu], cidx[ju]]
    adj = np.zeros((n, n), dtype=np.uint8)
    adj[iu[link], ju[link]] = 1
    adj[ju[link], iu[link]] = 1
    return SimulatedNetwork(n=n, covariates=tuple(dgp.covariates[c] for c in cidx),
                            covariate_index=cidx, adjacency=adj, seed=int(seed), _latent=a)


def logistic_fixture(covariates=(0.0, 1.0, 2.0), homophily=None, fixed_effects=None, **kw):
    """The standard logistic test DGP: Logistic(0,1) shocks, NegAbsDiff, N(0,1) effects."""
    return DgpSpec(
        homophily=homophily or HomophilySpec("NegAbsDiff"),
        shocks=kw.pop("shocks", ShockDistribution("Logistic", 0.0, 1.0)),
        fixed_effects=fixed_effects or FixedEffectLaw("NormalLaw", 0.0, 1.0),
        covariates=tuple(covariates),
        **kw,
    )
