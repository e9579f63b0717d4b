"""Known nonlinear couplings: cubic conjecture-and-falsification and witnesses.

For phi(a1, a2) = (a1 + a2)^3 the location of the diagonal homophily value
theta cannot be normalized away.  A conjecture theta = a0 fixes labels for
the two anchor types (-cbrt(a0)/2 and cbrt(1 - a0)/2); under the correct
conjecture the self-pair link probability, viewed as a function of the
label, is flat at label 0 because d/da (2a)^3 vanishes there.  The
statistic D(a0) is the finite-difference slope at the conceived zero.

The lattice of types used here is built without any conjecture: midpoints
of already found types are found by self-pair matching (valid for every
coupling of the form f(a1 + a2)) and the lattice is extended by reflections
about the two anchors.  A conjecture only assigns labels to lattice indices.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .dgp import CouplingSpec, DgpSpec, lambda_eval
from .errors import AmbiguousConjecture, IdentificationFailure, UnreachableTarget, UsageError
from .numerics import MonotoneTable, lagrange_eval
from .oracle import SELF_PAIR, Against
from .recovery import (LabeledHandleSet, NormalizationAnchors, RecoveredModel,
                       label_midpoints, _point)

__all__ = ["CouplingClass", "classify_coupling", "witness_dgp", "CubicLattice",
           "ConjectureState", "conjecture_falsify", "recover_theta", "ThetaFit",
           "recover_model_cubic"]


# ---------------------------------------------------------------------------
# classification and witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CouplingClass:
    """Homogeneity / translatability flags with executable witnesses.

    ``g(c)`` returns the homogeneity witness g_c, ``h(b)`` the translatability
    witness h_b; for periodic homogeneity ``period`` is T and ``g(T)`` is g_T.
    """

    generalized_homogeneous: bool
    generalized_translatable: bool
    periodic_homogeneous: bool = False
    periodic_translatable: bool = False
    period: float | None = None
    g: object = field(default=None, repr=False, compare=False)
    h: object = field(default=None, repr=False, compare=False)


def classify_coupling(spec: CouplingSpec) -> CouplingClass:
    fam = spec.family
    if fam == "LinearSum":
        return CouplingClass(True, True, True, True, None,
                             g=lambda c: (lambda a: c * np.asarray(a, float)),
                             h=lambda b: (lambda a: np.asarray(a, float) + 0.5 * b))
    if fam == "Cubic":
        return CouplingClass(True, False, True, False, None,
                             g=lambda c: (lambda a: np.cbrt(c) * np.asarray(a, float)))
    if fam == "TranslatableCubic":
        hom = spec.offset == 0.0
        return CouplingClass(hom, True, hom, True, None,
                             g=(lambda c: (lambda a: np.cbrt(c) * np.asarray(a, float))) if hom else None,
                             h=lambda b: (lambda a: np.cbrt(np.asarray(a, float) ** 3 + 0.5 * b)))
    if fam == "LambdaPeriodic":
        return CouplingClass(False, False, True, False, 2.0,
                             g=lambda T: (lambda a: T * np.asarray(a, float)))
    raise UsageError(f"unknown coupling {fam!r}")


def witness_dgp(dgp: DgpSpec, kind: str, param: float) -> DgpSpec:
    """DGP transformed by a coupling witness; observationally equivalent to ``dgp``.

    ``kind="homogeneous"``: A -> g_c(A), U -> c U, w -> c w (c = T for the
    periodic case).  ``kind="translatable"``: A -> h_b(A), U -> U + b.
    """
    from .equivalence import transform_homophily
    cls = classify_coupling(dgp.coupling)
    fam = dgp.coupling.family
    law = dgp.fixed_effects
    if kind == "homogeneous":
        if cls.g is None:
            raise UsageError(f"{fam} has no homogeneity witness")
        if fam == "LambdaPeriodic" and param != cls.period:
            raise UsageError("the lambda coupling is homogeneous only at its period")
        c = float(param)
        scale = c if fam in ("LinearSum", "LambdaPeriodic") else np.cbrt(c)
        return dataclasses.replace(dgp, fixed_effects=law.affine(scale, 0.0),
                                   shocks=dgp.shocks.affine(c, 0.0),
                                   homophily=transform_homophily(dgp.homophily, c, 0.0))
    if kind == "translatable":
        if cls.h is None:
            raise UsageError(f"{fam} has no translatability witness")
        b = float(param)
        if fam == "LinearSum":
            new_law = law.affine(1.0, 0.5 * b)
        else:
            new_law = law.with_map("cubic_shift", (b,))
        return dataclasses.replace(dgp, fixed_effects=new_law, shocks=dgp.shocks.affine(1.0, b))
    raise UsageError(f"unknown witness kind {kind!r}")


# ---------------------------------------------------------------------------
# conjecture-free lattice
# ---------------------------------------------------------------------------

class CubicLattice:
    """Types on an evenly spaced latent lattice at one covariate.

    Index 0 is the type with self-pair probability alpha, index K = 2^L the
    type with self-pair probability beta; intermediate indices are midpoint
    types, indices outside [0, K] come from reflections about 0 and K.
    """

    SATURATED = 1e-13

    def __init__(self, oracle, x, anchors: NormalizationAnchors, L=6):
        self.oracle = oracle
        self.x = _point(oracle, x)
        self.anchors = anchors
        self.K = 2 ** L
        self.h = {}
        try:
            h0, hK = oracle.find_handles(self.x, SELF_PAIR, [anchors.alpha, anchors.beta])
        except UnreachableTarget as exc:
            raise IdentificationFailure("anchor types unreachable", stage="cubic_lattice") from exc
        self.h[0], self.h[self.K] = h0, hK
        step = self.K
        while step > 1:
            lows = list(range(0, self.K, step))
            mids = label_midpoints(oracle, self.x, [self.h[k] for k in lows],
                                   [self.h[k + step] for k in lows])
            for k, hm in zip(lows, mids):
                self.h[k + step // 2] = hm
            step //= 2
        self.G = {}
        self._measure(range(self.K + 1))
        self.lo_closed = False
        self.hi_closed = False

    def _measure(self, ks):
        ks = [k for k in ks if k not in self.G]
        if ks:
            vals = self.oracle.pair_probs([self.h[k] for k in ks], [self.h[k] for k in ks])
            for k, v in zip(ks, vals):
                self.G[k] = float(v)

    @property
    def k_min(self):
        return min(self.h)

    @property
    def k_max(self):
        return max(self.h)

    def _reflect(self, center, target, want):
        todo = [(k, 2 * center - k) for k in sorted(self.h) if 2 * center - k in want
                and 2 * center - k not in self.h]
        if not todo:
            return 0
        got = self.oracle.find_handles(self.x, [Against(self.h[k]) for k, _ in todo],
                                       [target] * len(todo), on_unreachable="skip")
        n = 0
        for (_, new), hh in zip(todo, got):
            if hh is not None:
                self.h[new] = hh
                n += 1
        self._measure([new for (_, new), hh in zip(todo, got) if hh is not None])
        return n

    def extend_to(self, k_lo, k_hi):
        """Grow the lattice until it covers [k_lo, k_hi] or self-pairs saturate."""
        for _ in range(400):
            need_lo = k_lo < self.k_min and not self.lo_closed
            need_hi = k_hi > self.k_max and not self.hi_closed
            if not (need_lo or need_hi):
                return
            # a reflection about one anchor can only reach as far as the other
            # side of the lattice allows, so both sides grow together
            added_lo = added_hi = 0
            if need_lo or (need_hi and 2 * self.K - self.k_min <= self.k_max and not self.lo_closed):
                added_lo = self._reflect(0, self.anchors.alpha,
                                         set(range(self.k_min - self.K, self.k_min)))
                if self.G[self.k_min] <= self.SATURATED:
                    self.lo_closed = True
            if need_hi or (need_lo and -self.k_max >= self.k_min and not self.hi_closed):
                added_hi = self._reflect(self.K, self.anchors.beta,
                                         set(range(self.k_max + 1, self.k_max + self.K + 1)))
                if self.G[self.k_max] >= 1.0 - self.SATURATED:
                    self.hi_closed = True
            if added_lo == 0 and added_hi == 0:
                self.lo_closed = self.lo_closed or need_lo
                self.hi_closed = self.hi_closed or need_hi

    def g_interp(self, k, order=5):
        """Self-pair probability at fractional index k (local Lagrange interpolation)."""
        npts = order + 1
        start = int(math.floor(k)) - order // 2
        start = min(max(start, self.k_min), self.k_max - order)
        ks = np.arange(start, start + npts)
        return lagrange_eval(ks, [self.G[int(j)] for j in ks], k)

    def covers(self, k_lo, k_hi):
        return self.k_min + 2 <= k_lo and k_hi <= self.k_max - 2


def _conj_labels(a0, K):
    lo = -0.5 * np.cbrt(a0)
    hi = 0.5 * np.cbrt(1.0 - a0)
    return float(lo), float((hi - lo) / K)


@dataclass
class ConjectureState:
    """Falsification statistic for one conjecture theta = a0."""

    a0: float
    D: float
    k_zero: float
    lower_label: float
    spacing: float
    g_zero: float
    informative: bool


def conjecture_falsify(oracle, x, a0, L=6, eps=1e-3, lattice=None, anchors=None):
    """Finite-difference slope of the self-pair curve at the conceived zero."""
    if not 0.0 < eps < 0.1:
        raise UsageError("eps must lie in (0, 0.1)")
    anchors = anchors or NormalizationAnchors()
    lat = lattice or CubicLattice(oracle, x, anchors, L)
    lo, spacing = _conj_labels(float(a0), lat.K)
    k0 = -lo / spacing
    dk = eps / spacing
    lat.extend_to(int(math.floor(k0 - dk)) - 4, int(math.ceil(k0 + dk)) + 4)
    if not lat.covers(k0 - dk, k0 + dk):
        # the conceived zero sits where self-pair probabilities are saturated
        edge = lat.G[lat.k_min] if k0 < lat.k_min else lat.G[lat.k_max]
        return ConjectureState(float(a0), 0.0, k0, lo, spacing, edge, False)
    g_plus = lat.g_interp(k0 + dk)
    g_minus = lat.g_interp(k0 - dk)
    g0 = lat.g_interp(k0)
    D = (g_plus - g_minus) / (2.0 * eps)
    informative = 1e-6 < g0 < 1 - 1e-6
    return ConjectureState(float(a0), float(D), k0, lo, spacing, float(g0), bool(informative))


@dataclass
class ThetaFit:
    theta: float
    D: float
    scan: list
    candidates: list
    lattice: CubicLattice = field(repr=False, default=None)


def _richardson(oracle, x, a0, L, eps, lat, anchors):
    d1 = conjecture_falsify(oracle, x, a0, L, eps, lat, anchors)
    d2 = conjecture_falsify(oracle, x, a0, L, eps / 2, lat, anchors)
    return (4.0 * d2.D - d1.D) / 3.0


def _curvature(lat, a0):
    """Second difference of the self-pair curve at the conceived zero of a0."""
    lo, spacing = _conj_labels(float(a0), lat.K)
    k0 = -lo / spacing
    lat.extend_to(int(math.floor(k0)) - 5, int(math.ceil(k0)) + 5)
    if not lat.covers(k0 - 1, k0 + 1):
        return float("nan")
    return lat.g_interp(k0 + 1) - 2.0 * lat.g_interp(k0) + lat.g_interp(k0 - 1)


def _golden(obj, a, b, iters):
    gr = (math.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = obj(d)
        if b - a < 1e-10:
            break
    return 0.5 * (a + b)


def _polish(lat, theta, width):
    """Bisect the sign change of the curvature at the conceived zero.

    D(a0) vanishes to second order at the truth, so its minimizer is only
    located to about the square root of the working precision.  At the
    minimizer the conceived zero is a stationary inflection point of the
    self-pair curve, where the curvature changes sign linearly; bisecting
    that sign change pins the same point much more sharply.
    """
    a, b = theta - width, theta + width
    ca, cb = _curvature(lat, a), _curvature(lat, b)
    if not (np.isfinite(ca) and np.isfinite(cb)) or ca * cb > 0:
        return theta, False
    for _ in range(100):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        cm = _curvature(lat, m)
        if cm == 0.0:
            return m, True
        if (cm > 0) == (ca > 0):
            a, ca = m, cm
        else:
            b = m
    return 0.5 * (a + b), True


def recover_theta(oracle, x, grid=(-2.0, 3.0, 0.05), refine_iters=80, L=6, eps=1e-3,
                  near_zero=1e-4, anchors=None, richardson=True, polish=True):
    """Coarse scan of D(a0), golden-section refinement of each interior minimum.

    Only local minima whose conceived zero is informative (self-pair
    probability away from 0 and 1) are refined.  A refined minimum survives
    when its D is below ``near_zero``; several separated survivors raise
    AmbiguousConjecture.
    """
    anchors = anchors or NormalizationAnchors()
    x = _point(oracle, x)
    lat = CubicLattice(oracle, x, anchors, L)
    lo, hi, step = grid
    a0s = np.arange(lo, hi + 0.5 * step, step)
    states = [conjecture_falsify(oracle, x, a, L, eps, lat, anchors) for a in a0s]
    D = np.array([s.D for s in states])
    inf = np.array([s.informative for s in states])
    minima = [i for i in range(1, len(a0s) - 1)
              if inf[i - 1] and inf[i] and inf[i + 1] and D[i] <= D[i - 1] and D[i] <= D[i + 1]]
    if richardson:
        obj = lambda a: abs(_richardson(oracle, x, a, L, eps, lat, anchors))
    else:
        obj = lambda a: abs(conjecture_falsify(oracle, x, a, L, eps, lat, anchors).D)
    survivors = []
    for i in minima:
        th = _golden(obj, a0s[i] - step, a0s[i] + step, refine_iters)
        d_th = conjecture_falsify(oracle, x, th, L, eps, lat, anchors).D
        if d_th <= near_zero:
            survivors.append((th, d_th))
    merged = []
    for th, d_th in sorted(survivors):
        if merged and th - merged[-1][0] <= 2 * step:
            if d_th < merged[-1][1]:
                merged[-1] = (th, d_th)
        else:
            merged.append((th, d_th))
    if not merged:
        raise IdentificationFailure("no conjecture survives falsification on the scan",
                                    stage="recover_theta", detail={"grid": list(grid)})
    if len(merged) > 1:
        raise AmbiguousConjecture("several separated conjectures survive",
                                  candidates=[th for th, _ in merged])
    theta = merged[0][0]
    polished = False
    if polish:
        theta, polished = _polish(lat, theta, max(1e-3, 10 * eps * eps))
    Dt = conjecture_falsify(oracle, x, theta, L, eps, lat, anchors).D
    scan = [(float(s.a0), float(s.D)) for s in states]
    fit = ThetaFit(float(theta), float(Dt), scan, [th for th, _ in merged], lat)
    fit.polished = polished
    return fit


# ---------------------------------------------------------------------------
# full recovery in decrypted coordinates
# ---------------------------------------------------------------------------

def _pair_curve(oracle, lat):
    """Link probability as a function of the summed lattice index j = k1 + k2."""
    ks = sorted(lat.h)
    js, h1, h2 = [], [], []
    for k in ks:
        js.append(2 * k)
        h1.append(lat.h[k])
        h2.append(lat.h[k])
        if k + 1 in lat.h:
            js.append(2 * k + 1)
            h1.append(lat.h[k])
            h2.append(lat.h[k + 1])
    vals = oracle.pair_probs(h1, h2)
    return np.array(js), np.asarray(vals)


def _invert_curve(js, vals, p, order=5):
    """Fractional j with interpolated curve value p (bisection on the interpolant)."""
    i = int(np.searchsorted(vals, p))
    if i == 0 or i == len(vals):
        raise IdentificationFailure("probability outside the lattice range", stage="cubic_invert",
                                    detail={"p": float(p)})
    lo, hi = float(js[i - 1]), float(js[i])
    start = min(max(i - 1 - order // 2, 0), len(js) - order - 1)
    xs, ys = js[start:start + order + 1], vals[start:start + order + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if lagrange_eval(xs, ys, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def recover_model_cubic(oracle, covariates=None, L=6, M=4, per_covariate=False,
                        anchors=None, theta_search=None):
    """F_hat, labels and w_hat under cubic coupling.

    With ``per_covariate`` the diagonal value is recovered separately at every
    covariate, so a constant diagonal is not needed.
    """
    anchors = anchors or NormalizationAnchors()
    covs = [_point(oracle, x) for x in (covariates or oracle.covariates)]
    search = dict(theta_search or {})
    base = covs[0]
    fits = {}
    fits[base] = recover_theta(oracle, base, L=L, anchors=anchors, **search)
    if per_covariate:
        for x in covs[1:]:
            fits[x] = recover_theta(oracle, x, L=L, anchors=anchors, **search)
    fit = fits[base]
    lat = fit.lattice
    lo, spacing = _conj_labels(fit.theta, lat.K)
    labels = LabeledHandleSet()
    for x, f in fits.items():
        lo_x, sp_x = _conj_labels(f.theta, f.lattice.K)
        for k, hh in sorted(f.lattice.h.items()):
            labels.add(x, lo_x + k * sp_x, hh)
    js, vals = _pair_curve(oracle, lat)
    s = fit.theta + (2 * lo + js * spacing) ** 3
    keep = (np.abs(s) <= 2.0 ** M)
    table = MonotoneTable.from_knots(s[keep], vals[keep])
    zeros = {}
    for x in covs:
        if x in fits:
            f = fits[x]
            k0 = -_conj_labels(f.theta, f.lattice.K)[0] / _conj_labels(f.theta, f.lattice.K)[1]
            target = f.lattice.g_interp(k0)
        else:
            target = lat.g_interp(-lo / spacing)
        zeros[x] = oracle.find_handle(x, SELF_PAIR, target)
        labels.add(x, 0.0, zeros[x])
    w_hat = {}
    for i, a in enumerate(covs):
        for b in covs[i:]:
            if a == b:
                v = fits[a].theta if a in fits else fit.theta
            else:
                p = oracle.pair_prob(zeros[a], zeros[b])
                j = _invert_curve(js, vals, p)
                v = fit.theta + (2 * lo + j * spacing) ** 3
            w_hat[(a, b)] = float(v)
            w_hat[(b, a)] = float(v)
    diag = {"theta_hat": {str(x): f.theta for x, f in fits.items()},
            "D_at_theta": {str(x): f.D for x, f in fits.items()},
            "lattice_range": [lat.k_min, lat.k_max], "K": lat.K,
            "f_domain": list(table.domain), "per_covariate": per_covariate,
            "theta_scan": fit.scan}
    return RecoveredModel(anchors, table, labels, w_hat, diag)
