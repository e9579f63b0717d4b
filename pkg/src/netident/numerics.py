"""Small deterministic numerical kernels: bisection, monotone tables, pivoted solves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DesignSingular, NumericError, UsageError

__all__ = ["bisect_increasing", "MonotoneTable", "solve_pivoted", "lagrange_eval"]


def bisect_increasing(fun, targets, lo, hi, max_iter=200):
    """Solve fun(x) = target for a nondecreasing vectorized ``fun``.

    ``lo``/``hi`` are arrays (or scalars) that must already bracket every
    target.  Iterates to floating-point convergence or ``max_iter`` halvings
    and returns, per target, the endpoint whose value is closer to it.
    """
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    lo = np.broadcast_to(np.asarray(lo, dtype=float), t.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), t.shape).copy()
    if np.any(lo > hi):
        raise UsageError("bisection bracket is inverted")
    active = np.ones(t.shape, dtype=bool)
    for _ in range(max_iter):
        mid = lo + 0.5 * (hi - lo)
        active = (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        val = fun(np.where(active, mid, lo))
        if not np.all(np.isfinite(val[active])):
            raise NumericError("non-finite value inside bisection")
        go_right = active & (val < t)
        go_left = active & ~(val < t)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_left, mid, hi)
    flo = fun(lo)
    fhi = fun(hi)
    return np.where(np.abs(flo - t) <= np.abs(fhi - t), lo, hi)


@dataclass
class MonotoneTable:
    """Strictly increasing piecewise-linear map with an exact inverse.

    Knots that would break strict monotonicity (saturated or noisy values)
    are dropped at construction and listed in ``dropped``.
    """

    t: np.ndarray
    values: np.ndarray
    dropped: list = field(default_factory=list)

    @classmethod
    def from_knots(cls, t, values, protect=()):
        t = np.asarray(t, dtype=float)
        v = np.asarray(values, dtype=float)
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]
        if np.any(np.diff(t) <= 0):
            raise UsageError("duplicate knot locations")
        keep_t, keep_v, dropped = [], [], []
        protect = set(float(p) for p in protect)
        for ti, vi in zip(t, v):
            ok = 0.0 < vi < 1.0 and (not keep_v or vi > keep_v[-1])
            if ok or (ti in protect and (not keep_v or vi > keep_v[-1])):
                keep_t.append(ti)
                keep_v.append(vi)
            else:
                dropped.append((float(ti), float(vi)))
        if len(keep_t) < 2:
            raise UsageError("a monotone table needs two strictly increasing knots")
        return cls(np.array(keep_t), np.array(keep_v), dropped)

    @property
    def domain(self):
        return float(self.t[0]), float(self.t[-1])

    @property
    def value_range(self):
        return float(self.values[0]), float(self.values[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < self.t[0]) | (x > self.t[-1])):
            raise UsageError("evaluation outside the table domain")
        out = np.interp(x, self.t, self.values)
        return out if out.ndim else float(out)

    def inverse(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < self.values[0]) | (p > self.values[-1])):
            raise UsageError("inverse outside the table value range")
        out = np.interp(p, self.values, self.t)
        return out if out.ndim else float(out)

    def value_at(self, t):
        """Exact knot value at ``t`` (KeyError when t is not a knot)."""
        i = np.searchsorted(self.t, t)
        if i < len(self.t) and self.t[i] == t:
            return float(self.values[i])
        raise KeyError(t)


def solve_pivoted(a, b, tol=1e-14):
    """Solve a x = b by Gaussian elimination with scaled partial pivoting.

    Works on copies; raises DesignSingular when a pivot collapses below
    ``tol`` relative to its row scale.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n:
        raise UsageError("solve_pivoted needs a square system")
    s = np.max(np.abs(a), axis=1)
    if np.any(s == 0):
        raise DesignSingular("zero row in design matrix")
    for k in range(n - 1):
        p = int(np.argmax(np.abs(a[k:, k]) / s[k:])) + k
        if abs(a[p, k]) <= tol * s[p]:
            raise DesignSingular("matrix is singular to working precision")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
            s[[k, p]] = s[[p, k]]
        for i in range(k + 1, n):
            lam = a[i, k] / a[k, k]
            if lam != 0.0:
                a[i, k + 1:] -= lam * a[k, k + 1:]
                a[i, k] = 0.0
                b[i] -= lam * b[k]
    if abs(a[n - 1, n - 1]) <= tol * s[n - 1]:
        raise DesignSingular("matrix is singular to working precision")
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def lagrange_eval(xs, ys, x):
    """Evaluate the interpolating polynomial through (xs, ys) at x (barycentric)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    diff = x - xs
    hit = np.nonzero(diff == 0)[0]
    if hit.size:
        return float(ys[hit[0]])
    w = np.array([1.0 / np.prod(xs[j] - np.delete(xs, j)) for j in range(xs.size)])
    terms = w / diff
    return float(terms @ ys / terms.sum())
