"""Constructive recovery of (w, A, F) from the oracle surface.

The engine follows the two-quantile anchoring, the dyadic in-fill on [0, 1]
and the doubling out-expansion, then reads the homophily function off pairs
of zero-labeled types.  It consumes only the public oracle API: handles are
selected by the link probabilities they generate and never by their latent
values.

Labels are dyadic rationals stored as floats (exact for the depths used).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (AssumptionViolated, BoundaryReached, DomainExceeded,
                     IdentificationFailure, UnreachableTarget, UsageError)
from .numerics import MonotoneTable
from .oracle import EQUAL, GREATER, LESS, SELF_PAIR, Against

__all__ = ["NormalizationAnchors", "LabeledHandleSet", "RecoveryState", "RecoveredModel",
           "anchor_quantiles", "start_state", "infill", "out_expand", "recover_fixed_effect",
           "recover_homophily", "recover_model", "invert_exact", "transfer_labels",
           "label_midpoints"]

TARGET_CLAMP = 1e-12


@dataclass(frozen=True)
class NormalizationAnchors:
    """F_hat^{-1}(alpha) = 0 and F_hat^{-1}(beta) = 1; beta defaults to 1 - alpha."""

    alpha: float = 0.25
    beta: float | None = None

    def __post_init__(self):
        if self.beta is None:
            object.__setattr__(self, "beta", 1.0 - self.alpha)
        if not 0.0 < self.alpha < self.beta < 1.0:
            raise UsageError("anchors need 0 < alpha < beta < 1")


class LabeledHandleSet:
    """Recovered labels, grouped by covariate."""

    def __init__(self):
        self._by_cov = {}
        self._label_of = {}

    def add(self, x, label, handle):
        group = self._by_cov.setdefault(x, {})
        group[float(label)] = handle
        self._label_of[handle.id] = float(label)

    def get(self, x, label):
        return self._by_cov.get(x, {}).get(float(label))

    def has(self, x, label):
        return float(label) in self._by_cov.get(x, {})

    def group(self, x):
        return self._by_cov.get(x, {})

    def labels(self, x):
        return np.array(sorted(self._by_cov.get(x, {})))

    def label_of(self, handle):
        return self._label_of.get(handle.id)

    def covariates(self):
        return list(self._by_cov)

    def rows(self):
        """(handle_id, covariate, label) rows in deterministic order."""
        out = []
        for x in self._by_cov:
            for lab in sorted(self._by_cov[x]):
                out.append((self._by_cov[x][lab].id, x, lab))
        return out

    def __len__(self):
        return len(self._label_of)


@dataclass
class RecoveryState:
    oracle: object
    anchors: NormalizationAnchors
    base: object
    labels: LabeledHandleSet = field(default_factory=LabeledHandleSet)
    knots: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    bounded: bool = False

    def table(self):
        t = sorted(self.knots)
        return MonotoneTable.from_knots(t, [self.knots[k] for k in t])

    def zero(self, x):
        return self.labels.get(x, 0.0)

    def note(self, key, value):
        self.diagnostics.setdefault(key, []).append(value)


@dataclass
class RecoveredModel:
    """Normalized representative: F_hat, labels, w_hat and diagnostics."""

    anchors: NormalizationAnchors
    f_hat: MonotoneTable
    labels: LabeledHandleSet
    w_hat: dict
    diagnostics: dict
    state: RecoveryState = field(default=None, repr=False, compare=False)

    def w_rows(self):
        return [(x1, x2, v) for (x1, x2), v in self.w_hat.items()]


def _clamp_targets(state, targets, where):
    t = np.asarray(targets, dtype=float)
    bad = (t < TARGET_CLAMP) | (t > 1 - TARGET_CLAMP)
    if np.any(bad):
        state.note("clamped_targets", {"stage": where, "count": int(bad.sum())})
    return np.clip(t, TARGET_CLAMP, 1 - TARGET_CLAMP)


def _point(oracle, x):
    from .dgp import as_point
    x = as_point(x)
    if x not in oracle.covariates:
        raise UsageError(f"covariate {x!r} not offered by the oracle")
    return x


# ---------------------------------------------------------------------------
# anchoring
# ---------------------------------------------------------------------------

def anchor_quantiles(oracle, x, anchors: NormalizationAnchors):
    """Types labeled 0 and 1/2: self-pair probabilities alpha and beta."""
    x = _point(oracle, x)
    try:
        h0, h_half = oracle.find_handles(x, SELF_PAIR, [anchors.alpha, anchors.beta])
    except UnreachableTarget as exc:
        raise IdentificationFailure(
            "anchors outside reachable range; see bounded-support mode",
            stage="anchor", detail={"low": exc.low, "high": exc.high}) from exc
    p0, p1 = oracle.pair_probs([h0, h_half], [h0, h_half])
    if abs(p1 - p0) <= oracle.tol:
        raise IdentificationFailure("degenerate shock distribution", stage="anchor")
    return h0, h_half


def start_state(oracle, anchors, base, bounded=False):
    base = _point(oracle, base)
    state = RecoveryState(oracle, anchors, base, bounded=bounded)
    h0, h_half = anchor_quantiles(oracle, base, anchors)
    state.labels.add(base, 0.0, h0)
    state.labels.add(base, 0.5, h_half)
    state.knots[0.0] = anchors.alpha
    state.knots[1.0] = anchors.beta
    return state


# ---------------------------------------------------------------------------
# in-fill
# ---------------------------------------------------------------------------

def infill(oracle, x, state: RecoveryState, L: int):
    """Dyadic in-fill: F_hat on {m / 2^L} and labels on {m / 2^(L+1)} within [0, 1]."""
    if L < 1:
        raise UsageError("in-fill depth must be at least 1")
    x = _point(oracle, x)
    labels = state.labels
    skipped = 0
    for n in range(L):
        step = 2.0 ** -(n + 1)
        # (i) F_hat at odd multiples of step from labeled pairs inside [0, 1/2]
        js = np.arange(2 ** n)
        a_lab = js * step
        b_lab = (js + 1) * step
        try:
            ha = [labels.get(x, a) for a in a_lab]
            hb = [labels.get(x, b) for b in b_lab]
            if any(h is None for h in ha + hb):
                raise KeyError
        except KeyError:
            raise IdentificationFailure("missing labeled grid point", stage="infill",
                                        detail={"level": n}) from None
        vals = oracle.pair_probs(ha, hb)
        for t, v in zip(a_lab + b_lab, vals):
            state.knots[float(t)] = float(v)
        # (ii) self-pair matches: labels m / 2^(n+2) for odd m
        ms = np.arange(1, 2 ** (n + 1), 2)
        targets = _clamp_targets(state, [state.knots[float(m * step)] for m in ms], "infill")
        try:
            new = oracle.find_handles(x, SELF_PAIR, targets)
        except UnreachableTarget as exc:
            raise IdentificationFailure("in-fill self-pair target unreachable", stage="infill",
                                        detail={"level": n, "target": exc.target}) from exc
        for m, h in zip(ms, new):
            labels.add(x, m * step / 2.0, h)
        # (iii) triangulate labels 1 - l against F_hat(1)
        lows = [lab for lab in labels.labels(x) if 0.0 <= lab <= 0.5 and not labels.has(x, 1.0 - lab)]
        if lows:
            refs = [Against(labels.get(x, lab)) for lab in lows]
            beta = state.knots[1.0]
            try:
                got = oracle.find_handles(x, refs, [beta] * len(lows),
                                          on_unreachable="skip" if state.bounded else "raise")
            except UnreachableTarget as exc:
                raise BoundaryReached("in-fill triangulation hit the fixed-effect support edge",
                                      stage="infill", detail={"level": n, "low": exc.low,
                                                              "high": exc.high}) from exc
            for lab, h in zip(lows, got):
                if h is None:
                    skipped += 1
                else:
                    labels.add(x, 1.0 - lab, h)
    if skipped:
        state.note("infill_unreachable", skipped)
    state.diagnostics["L"] = L
    return state.table(), labels


# ---------------------------------------------------------------------------
# out-expansion
# ---------------------------------------------------------------------------

def _grid(lo, hi, delta):
    k0 = math.ceil(lo / delta - 1e-9)
    k1 = math.floor(hi / delta + 1e-9)
    return np.arange(k0, k1 + 1) * delta


def _reflect_wave(oracle, x, state, center_label, target, delta, limit):
    """Label 2c - l for every labeled l with an unlabeled mirror inside the range."""
    labels = state.labels
    have = set(labels.group(x))
    todo = []
    for lab in sorted(have):
        if abs(lab / delta - round(lab / delta)) > 1e-9:
            continue
        mirror = 2 * center_label - lab
        if -limit - 1e-12 <= mirror <= limit + 1e-12 and mirror not in have:
            todo.append((lab, mirror))
            have.add(mirror)
    if not todo:
        return 0, 0
    refs = [Against(labels.get(x, lab)) for lab, _ in todo]
    got = oracle.find_handles(x, refs, [target] * len(todo),
                              on_unreachable="skip" if state.bounded else "raise")
    added = 0
    for (lab, mirror), h in zip(todo, got):
        if h is not None:
            labels.add(x, mirror, h)
            added += 1
    return added, len(todo) - added


def _pair_for_sum(label_set, t, delta):
    """Labeled (a, b) with a + b = t and a close to t / 2, or None."""
    a0 = math.floor(t / (2 * delta) + 1e-9) * delta
    for k in range(64):
        for a in (a0 - k * delta, a0 + (k + 1) * delta):
            if a in label_set and (t - a) in label_set:
                return a, t - a
    return None


def out_expand(oracle, x, state: RecoveryState, M: int, delta: float | None = None):
    """Extend labels and F_hat from [0, 1] to [-2^M, 2^M] on the delta grid.

    Label -l comes from pairing h_l with a type whose link probability
    against it equals alpha = F_hat(0); label 1 - l from probability
    beta = F_hat(1).  Alternating these reflections keeps every search target
    at one of the two anchors, which are interior for any continuous F.
    """
    x = _point(oracle, x)
    L = state.diagnostics.get("L")
    if delta is None:
        if L is None:
            raise UsageError("run infill first or pass delta")
        delta = 2.0 ** -L
    if M < 0:
        raise UsageError("out-expansion depth must be nonnegative")
    limit = 2.0 ** M
    alpha, beta = state.knots[0.0], state.knots[1.0]
    unreachable = 0
    # level 0: negative labels by reflection about 0, then alternate
    grid = _grid(-limit, limit, delta)
    idle = 0
    for wave in range(4 * int(limit) + 8):
        center, target = (0.0, alpha) if wave % 2 == 0 else (0.5, beta)
        try:
            added, miss = _reflect_wave(oracle, x, state, center, target, delta, limit)
        except UnreachableTarget as exc:
            raise BoundaryReached("out-expansion hit the fixed-effect support edge",
                                  stage="out_expand", detail={"wave": wave, "low": exc.low,
                                                              "high": exc.high}) from exc
        unreachable += miss
        have = state.labels.group(x)
        if all(g in have for g in grid):
            break
        idle = idle + 1 if added == 0 else 0
        if idle >= 2:
            break
    have = set(state.labels.group(x))
    lab_grid = [g for g in _grid(-limit, limit, delta) if g in have]
    # knots on the delta grid from labeled pairs
    want = [t for t in _grid(-limit, limit, delta) if t not in state.knots]
    pairs, ts = [], []
    for t in want:
        ab = _pair_for_sum(have, t, delta)
        if ab is not None:
            pairs.append(ab)
            ts.append(t)
    if pairs:
        vals = oracle.pair_probs([state.labels.get(x, a) for a, _ in pairs],
                                 [state.labels.get(x, b) for _, b in pairs])
        for t, v in zip(ts, vals):
            state.knots[float(t)] = float(v)
    missing = len(want) - len(pairs)
    lo_lab, hi_lab = (min(lab_grid), max(lab_grid)) if lab_grid else (0.0, 0.0)
    state.diagnostics.update({"M": M, "delta": delta,
                              "label_range": [lo_lab, hi_lab],
                              "missing_knots": missing})
    if unreachable or missing:
        info = {"unreachable_targets": unreachable, "label_range": [lo_lab, hi_lab]}
        state.diagnostics["boundary"] = info
        if not state.bounded:
            raise BoundaryReached("out-expansion hit unreachable targets", stage="out_expand",
                                  detail=info)
    return state.table(), state.labels


# ---------------------------------------------------------------------------
# exact inversion by label midpoints
# ---------------------------------------------------------------------------

def label_midpoints(oracle, x, lo_handles, hi_handles):
    """Types labeled (p + q) / 2 from types labeled p and q at covariate x.

    Under an additive coupling the self pair at the midpoint generates the
    same link probability as the (p, q) pair, so the midpoint type is found
    by a self-pair search, whatever the shock law.
    """
    targets = oracle.pair_probs(lo_handles, hi_handles)
    return oracle.find_handles(x, SELF_PAIR, np.clip(targets, TARGET_CLAMP, 1 - TARGET_CLAMP))


def invert_exact(state: RecoveryState, probs, context=None, steps=48):
    """Solve F_hat(t) = p beyond the resolution of the knot grid.

    ``context = (x1, x2, offset)`` means F_hat(offset + u + v) is realized by
    pairing a type labeled u at x1 with a type labeled v at x2.  A labeled u
    is fixed, v is bracketed between labeled types, and the bracket is halved
    by constructing midpoint types.
    """
    oracle = state.oracle
    p = np.atleast_1d(np.asarray(probs, dtype=float))
    if context is None:
        context = (state.base, state.base, 0.0)
    x1, x2, offset = context
    g1 = state.labels.group(x1)
    g2 = state.labels.group(x2)
    lab1 = np.array(sorted(g1))
    lab2 = np.array(sorted(g2))
    if lab1.size == 0 or lab2.size < 2:
        raise IdentificationFailure("no labeled types for inversion", stage="invert",
                                    detail={"context": context})
    table = state.table()
    vlo, vhi = table.value_range
    est = []
    for pk in p:
        if not vlo <= pk <= vhi:
            raise DomainExceeded("probability outside F_hat's identified range; "
                                 "increase M or use bounded-support recursion",
                                 stage="invert", detail={"p": float(pk), "range": [vlo, vhi]})
        est.append(table.inverse(pk))
    est = np.array(est)
    mid2 = 0.5 * (lab2[0] + lab2[-1])
    u = []
    for e in est:
        want = e - offset - mid2
        u.append(lab1[np.argmin(np.abs(lab1 - want))])
    u = np.array(u)
    hu = [g1[v] for v in u]
    # bracket v among labeled types at x2
    probs2 = {}
    lo_lab = np.empty(p.size)
    hi_lab = np.empty(p.size)
    for k in range(p.size):
        row = _bracket_row(oracle, hu[k], g2, lab2, p[k], e_guess=est[k] - offset - u[k], cache=probs2)
        if row is None:
            raise DomainExceeded("no labeled bracket for inversion", stage="invert",
                                 detail={"p": float(p[k]), "context": list(map(str, context))})
        lo_lab[k], hi_lab[k] = row
    h_lo = [g2[v] for v in lo_lab]
    h_hi = [g2[v] for v in hi_lab]
    f_lo = oracle.pair_probs(hu, h_lo)
    f_hi = oracle.pair_probs(hu, h_hi)
    for _ in range(steps):
        active = (hi_lab - lo_lab > 1e-15 * np.maximum(1.0, np.abs(hi_lab))) & (f_hi > f_lo)
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        mids = label_midpoints(oracle, x2, [h_lo[i] for i in idx], [h_hi[i] for i in idx])
        f_mid = oracle.pair_probs([hu[i] for i in idx], mids)
        for j, i in enumerate(idx):
            m_lab = 0.5 * (lo_lab[i] + hi_lab[i])
            if f_mid[j] <= p[i]:
                lo_lab[i], h_lo[i], f_lo[i] = m_lab, mids[j], f_mid[j]
            else:
                hi_lab[i], h_hi[i], f_hi[i] = m_lab, mids[j], f_mid[j]
    span = f_hi - f_lo
    frac = np.where(span > 0, (p - f_lo) / np.where(span > 0, span, 1.0), 0.5)
    v = lo_lab + np.clip(frac, 0.0, 1.0) * (hi_lab - lo_lab)
    return offset + u + v


def _bracket_row(oracle, hu, g2, lab2, target, e_guess, cache):
    """Adjacent labels (v_lo, v_hi) at x2 with pair probabilities around target."""
    n = lab2.size
    i = int(np.clip(np.searchsorted(lab2, e_guess), 1, n - 1))
    width = 2
    while True:
        lo_i = max(i - width, 0)
        hi_i = min(i + width, n - 1)
        idx = list(range(lo_i, hi_i + 1))
        vals = oracle.pair_probs([hu] * len(idx), [g2[lab2[j]] for j in idx])
        if vals[0] <= target <= vals[-1]:
            k = int(np.searchsorted(vals, target, side="left"))
            k = min(max(k, 1), len(idx) - 1)
            while k > 1 and vals[k - 1] >= target:
                k -= 1
            return lab2[idx[k - 1]], lab2[idx[k]]
        if lo_i == 0 and hi_i == n - 1:
            return None
        width *= 4


# ---------------------------------------------------------------------------
# fixed effects and homophily
# ---------------------------------------------------------------------------

def transfer_labels(oracle, state, x, labels_to_copy=None):
    """Label types at covariate x by matching base-covariate self-pair probabilities.

    Valid because the homophily diagonal is constant, so equal self-pair
    probabilities at two covariates mean equal fixed effects.
    """
    x = _point(oracle, x)
    base = state.base
    g = state.labels.group(base)
    labs = sorted(g) if labels_to_copy is None else list(labels_to_copy)
    labs = [lab for lab in labs if not state.labels.has(x, lab)]
    if not labs:
        return
    hs = [g[lab] for lab in labs]
    self_p = oracle.pair_probs(hs, hs)
    got = oracle.find_handles(x, SELF_PAIR, np.clip(self_p, TARGET_CLAMP, 1 - TARGET_CLAMP),
                              on_unreachable="skip")
    for lab, h in zip(labs, got):
        if h is not None:
            state.labels.add(x, lab, h)


def _zero_handle(oracle, state, x):
    h = state.zero(x)
    if h is None:
        try:
            h = oracle.find_handle(x, SELF_PAIR, state.anchors.alpha)
        except UnreachableTarget as exc:
            raise IdentificationFailure("zero type unreachable", stage="homophily",
                                        detail={"covariate": x}) from exc
        state.labels.add(x, 0.0, h)
    return h


def recover_homophily(oracle, state: RecoveryState, x1, x2, exact=None):
    """w_hat(x1, x2) = F_hat^{-1}(link probability of two zero-labeled types)."""
    return float(recover_homophily_many(oracle, state, [(x1, x2)], exact=exact)[0])


def recover_homophily_many(oracle, state, pairs, exact=None):
    pairs = [(_point(oracle, a), _point(oracle, b)) for a, b in pairs]
    if exact is None:
        exact = oracle.mode == "Analytic"
    h1 = [_zero_handle(oracle, state, a) for a, _ in pairs]
    h2 = [_zero_handle(oracle, state, b) for _, b in pairs]
    p = oracle.pair_probs(h1, h2)
    table = state.table()
    vlo, vhi = table.value_range
    for (a, b), pk in zip(pairs, p):
        if not vlo <= pk <= vhi:
            raise DomainExceeded("increase M or use bounded-support recursion", stage="homophily",
                                 detail={"pair": [a, b], "p": float(pk), "range": [vlo, vhi]})
    if exact:
        return invert_exact(state, p)
    return np.array([table.inverse(pk) for pk in p])


def recover_fixed_effect(state: RecoveryState, h, exact=None):
    """Label of an arbitrary type h at a processed covariate."""
    oracle = state.oracle
    lab = state.labels.label_of(h)
    if lab is not None:
        return lab
    x = h.covariate
    g = state.labels.group(x)
    labs = np.array(sorted(g))
    if labs.size == 0:
        raise IdentificationFailure("covariate group not processed", stage="fixed_effect",
                                    detail={"covariate": x})
    # bracket by popularity between adjacent labeled types
    lo, hi = 0, labs.size - 1
    if oracle.compare_popularity(h, g[labs[lo]]) == LESS or oracle.compare_popularity(h, g[labs[hi]]) == GREATER:
        raise IdentificationFailure("type outside the identified label range", stage="fixed_effect",
                                    detail={"range": [float(labs[0]), float(labs[-1])]})
    while hi - lo > 1:
        mid = (lo + hi) // 2
        c = oracle.compare_popularity(h, g[labs[mid]])
        if c == EQUAL:
            return float(labs[mid])
        if c == GREATER:
            lo = mid
        else:
            hi = mid
    # refine with the self-pair probability: F_hat(2 l) = self prob
    p_self = oracle.pair_prob(h, h)
    if exact is None:
        exact = oracle.mode == "Analytic"
    try:
        if exact:
            val = float(invert_exact(state, [p_self], context=(x, x, 0.0))[0]) / 2.0
        else:
            val = state.table().inverse(p_self) / 2.0
    except (DomainExceeded, UsageError):
        val = 0.5 * (labs[lo] + labs[hi])
    return float(min(max(val, labs[lo]), labs[hi]))


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def recover_model(oracle, covariates=None, anchors=None, L=10, M=4, delta=None,
                  cross_check=True, exact=None):
    """Full pipeline: anchors, in-fill, out-expansion at the first covariate, then w_hat."""
    anchors = anchors or NormalizationAnchors()
    covs = [_point(oracle, x) for x in (covariates or oracle.covariates)]
    base = covs[0]
    stage = "anchor"
    try:
        state = start_state(oracle, anchors, base)
        stage = "infill"
        infill(oracle, base, state, L)
        stage = "out_expand"
        out_expand(oracle, base, state, M, delta)
        stage = "homophily"
        for x in covs[1:]:
            _zero_handle(oracle, state, x)
        pairs = [(a, b) for i, a in enumerate(covs) for b in covs[i:]]
        vals = recover_homophily_many(oracle, state, pairs, exact=exact)
    except IdentificationFailure as exc:
        if exc.stage is None:
            exc.stage = stage
        raise
    w_hat = {}
    for (a, b), v in zip(pairs, vals):
        v = 0.0 if a == b and abs(v) <= 1e-9 else float(v)
        w_hat[(a, b)] = v
        w_hat[(b, a)] = v
    table = state.table()
    diag = dict(state.diagnostics)
    diag.update({"base_covariate": base, "f_domain": list(table.domain),
                 "value_range": list(table.value_range), "dropped_knots": len(table.dropped),
                 "n_knots": int(table.t.size), "n_labels": len(state.labels)})
    if cross_check and len(covs) > 1:
        diag["cross_check"] = _cross_check(oracle, anchors, covs[1], state, L)
    return RecoveredModel(anchors, table, state.labels, w_hat, diag, state)


def _cross_check(oracle, anchors, x, state, L):
    """Re-run anchoring and in-fill at a second covariate and compare knots."""
    other = start_state(oracle, anchors, x)
    infill(oracle, x, other, min(L, 6))
    diffs = [abs(other.knots[t] - state.knots[t]) for t in other.knots if t in state.knots]
    worst = float(max(diffs))
    tol = 1e-8 if oracle.mode == "Analytic" else 10 * oracle.tol
    if worst > tol:
        raise AssumptionViolated("1", f"F_hat differs across covariates by {worst:.3g}")
    return {"covariate": x, "max_abs_diff": worst}
