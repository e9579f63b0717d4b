"""Recursive identification when fixed effects have bounded support.

With A confined to [a_lo, a_hi] only a window of F is reached by pairing
types alone.  Homophily values identified inside that window let pairs from
the most (and least) homophilous covariate cells push F's identified domain
out, which in turn identifies more homophily values, round after round:

    F-domain(m + 1) = [w_lo(m) + 2 a_lo, w_hi(m) + 2 a_hi],
    w identified in round m  iff  w in [F_lo(m) - 2 a_hi, F_hi(m) - 2 a_lo].

All quantities are in normalized units and taken over the configured
covariate grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import AssumptionViolated, DomainExceeded, FeasibilityError, UsageError
from ..oracle import SELF_PAIR
from ..recovery import (NormalizationAnchors, RecoveredModel, infill, invert_exact,
                        out_expand, start_state, transfer_labels, _point)

__all__ = ["BoundedState", "check_feasibility", "bounded_recover", "interval_recursion"]

EDGE_RANK = 1e-15


def _plain(x):
    return list(x) if isinstance(x, tuple) else x


@dataclass
class BoundedState:
    anchors: NormalizationAnchors
    a_range: tuple
    f_domain: tuple
    w_range: tuple
    m: int
    trace: list = field(default_factory=list)
    identified: dict = field(default_factory=dict)
    unidentified: list = field(default_factory=list)
    exhausted: bool = False

    def to_dict(self):
        return {"alpha": self.anchors.alpha, "beta": self.anchors.beta,
                "a_range": list(self.a_range), "f_domain": list(self.f_domain),
                "w_range": list(self.w_range), "rounds": self.m, "trace": self.trace,
                "unidentified_pairs": [[_plain(a), _plain(b)] for a, b in self.unidentified],
                "exhausted_covariate_grid": self.exhausted}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_feasibility(oracle, x, anchors: NormalizationAnchors):
    """Both anchor probabilities must be reachable by self pairs at x."""
    lo, hi = oracle.reachable_range(x, SELF_PAIR)
    if not (lo <= anchors.alpha and anchors.beta <= hi):
        raise FeasibilityError(
            f"anchors ({anchors.alpha}, {anchors.beta}) outside the reachable self-pair "
            f"range [{lo:.6g}, {hi:.6g}]; choose anchors inside it", low=lo, high=hi)
    return lo, hi


def interval_recursion(w_values, a_lo, a_hi, max_rounds=50, tol=0.0):
    """Domain recursion on known quantities (used to cross-check recoveries).

    Returns a list of (f_domain, w_lo, w_hi) per round.
    """
    w = np.asarray(sorted(set(float(v) for v in w_values)))
    d = (2 * a_lo, 2 * a_hi)
    out = []
    for _ in range(max_rounds + 1):
        ok = w[(w >= d[0] - 2 * a_hi - tol) & (w <= d[1] - 2 * a_lo + tol)]
        w_lo, w_hi = float(ok.min()), float(ok.max())
        out.append((d, w_lo, w_hi))
        nd = (min(d[0], w_lo + 2 * a_lo), max(d[1], w_hi + 2 * a_hi))
        if nd == d:
            break
        d = nd
    return out


def _edge_types(oracle, state, covs):
    """Least and most popular types in every covariate cell, labeled.

    The edge ranks select the same latent value in every cell; equality of
    their self-pair probabilities across cells is checked before the base
    labels are copied.
    """
    base = state.base
    g = state.labels.group(base)
    labs = np.array(sorted(g))
    lo_h = {x: oracle.handle_at_rank(x, u=EDGE_RANK) for x in covs}
    hi_h = {x: oracle.handle_at_rank(x, tail=EDGE_RANK) for x in covs}
    out = []
    for edge in (lo_h, hi_h):
        h = edge[base]
        ref_lab = labs[-1] if edge is lo_h else labs[0]
        p = oracle.pair_prob(h, g[ref_lab])
        t = float(invert_exact(state, [p])[0])
        out.append(t - float(ref_lab))
    a_lo, a_hi = out
    self_lo = oracle.pair_probs([lo_h[x] for x in covs], [lo_h[x] for x in covs])
    self_hi = oracle.pair_probs([hi_h[x] for x in covs], [hi_h[x] for x in covs])
    tol = 1e-9 if oracle.mode == "Analytic" else 5 * oracle.tol
    if np.ptp(self_lo) > tol or np.ptp(self_hi) > tol:
        raise AssumptionViolated("1", "edge types differ in self-pair probability across cells")
    for x in covs:
        state.labels.add(x, a_lo, lo_h[x])
        state.labels.add(x, a_hi, hi_h[x])
    return a_lo, a_hi


def _extend_knots(oracle, state, x1, x2, offset):
    """Knots offset + u + v from labeled types at (x1, x2) along u = v and u = v + step."""
    labs1 = sorted(state.labels.group(x1))
    g1, g2 = state.labels.group(x1), state.labels.group(x2)
    common = [lab for lab in labs1 if lab in g2]
    pairs = [(u, u) for u in common] + [(u, v) for u, v in zip(common, common[1:])]
    vals = oracle.pair_probs([g1[u] for u, _ in pairs], [g2[v] for _, v in pairs])
    for (u, v), p in zip(pairs, vals):
        t = float(offset + u + v)
        state.knots.setdefault(t, float(p))


def _coverage(state, ctx):
    x1, x2, off = ctx
    l1 = state.labels.labels(x1)
    l2 = state.labels.labels(x2)
    return off + l1[0] + l2[0], off + l1[-1] + l2[-1]


def _identify_w(oracle, state, x1, x2, contexts):
    """w_hat(x1, x2) from a diagonal labeled pair whose probability is in range."""
    g1, g2 = state.labels.group(x1), state.labels.group(x2)
    common = [lab for lab in sorted(g1) if lab in g2]
    probs = oracle.pair_probs([g1[u] for u in common], [g2[u] for u in common])
    table = state.table()
    vlo, vhi = table.value_range
    best = None
    for u, p in zip(common, probs):
        if not vlo <= p <= vhi:
            continue
        t = table.inverse(p)
        for ctx in contexts:
            c_lo, c_hi = _coverage(state, ctx)
            margin = min(t - c_lo, c_hi - t)
            if best is None or margin > best[0]:
                best = (margin, u, p, ctx)
    if best is None:
        return None
    _, u, p, ctx = best
    try:
        t = float(invert_exact(state, [p], context=ctx)[0])
    except DomainExceeded:
        return None
    return t - 2.0 * u


def bounded_recover(oracle, covariates=None, anchors=None, L=6, M=3, max_rounds=10):
    """Anchoring, in-fill and out-expansion up to the support edges, then the rounds.

    Returns ``(RecoveredModel, BoundedState)``.
    """
    anchors = anchors or NormalizationAnchors()
    covs = [_point(oracle, x) for x in (covariates or oracle.covariates)]
    base = covs[0]
    if max_rounds < 0:
        raise UsageError("max_rounds must be nonnegative")
    check_feasibility(oracle, base, anchors)
    state = start_state(oracle, anchors, base, bounded=True)
    infill(oracle, base, state, L)
    out_expand(oracle, base, state, M)
    grid_labels = sorted(state.labels.group(base))
    for x in covs[1:]:
        transfer_labels(oracle, state, x, grid_labels)
    a_lo, a_hi = _edge_types(oracle, state, covs)
    # round-0 window: all pairs of base types, edges included
    _extend_knots(oracle, state, base, base, 0.0)
    lo_h, hi_h = state.labels.get(base, a_lo), state.labels.get(base, a_hi)
    for t, (h1, h2) in ((2 * a_lo, (lo_h, lo_h)), (2 * a_hi, (hi_h, hi_h))):
        state.knots[t] = oracle.pair_prob(h1, h2)
    for k in [k for k in state.knots if k < 2 * a_lo or k > 2 * a_hi]:
        del state.knots[k]
    domain = (2 * a_lo, 2 * a_hi)
    contexts = [(base, base, 0.0)]
    pairs = [(a, b) for i, a in enumerate(covs) for b in covs[i:]]
    w_hat = {}
    trace = []
    prev = None
    m = 0
    for m in range(max_rounds + 1):
        for a, b in pairs:
            if (a, b) in w_hat:
                continue
            ends = oracle.pair_probs([state.labels.get(a, a_lo), state.labels.get(a, a_hi)],
                                     [state.labels.get(b, a_lo), state.labels.get(b, a_hi)])
            vlo, vhi = state.table().value_range
            if ends[0] > vhi or ends[1] < vlo:
                continue
            w = _identify_w(oracle, state, a, b, contexts)
            if w is not None:
                w_hat[(a, b)] = w
        w_lo = min(w_hat.values())
        w_hi = max(w_hat.values())
        if prev is None:
            flag = w_lo < 0.0 < w_hi
        else:
            flag = w_lo < prev[0] and prev[1] < w_hi
        new_domain = (min(domain[0], w_lo + 2 * a_lo), max(domain[1], w_hi + 2 * a_hi))
        strict = new_domain != domain
        trace.append({"round": m, "f_domain": list(domain), "w_lo": w_lo, "w_hi": w_hi,
                      "assumption_7m": bool(flag), "expands": bool(strict),
                      "n_identified": len(w_hat)})
        prev = (w_lo, w_hi)
        if not strict or m == max_rounds:
            break
        for target in (w_hi, w_lo):
            (x1, x2), w = next(((k, v) for k, v in w_hat.items() if v == target))
            ctx = (x1, x2, w)
            if ctx not in contexts:
                contexts.append(ctx)
                _extend_knots(oracle, state, x1, x2, w)
        domain = new_domain
    unident = [p for p in pairs if p not in w_hat]
    sym = {}
    for (a, b), v in w_hat.items():
        sym[(a, b)] = sym[(b, a)] = float(v)
    table = state.table()
    bstate = BoundedState(anchors, (a_lo, a_hi), domain, (min(w_hat.values()), max(w_hat.values())),
                          m, trace, sym, unident, not unident)
    diag = dict(state.diagnostics)
    diag.update({"bounded": bstate.to_dict(), "f_domain": list(table.domain),
                 "value_range": list(table.value_range), "n_labels": len(state.labels)})
    model = RecoveredModel(anchors, table, state.labels, sym, diag, state)
    return model, bstate
