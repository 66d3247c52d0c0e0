"""NumPy fallback for the projection kernel.

Projects batches of points (a, b) in R x R^2 onto the convex set
    K = { (a, b) : a + |b|^2 / 4 <= 0 }.
Feasible points pass through unchanged.  For the rest, the nearest
boundary point solves

    (a - lam) (1 + lam/2)^2 + |b|^2 / 4 = 0,      lam >= 0,
    b* = b / (1 + lam/2),   a* = a - lam,

and the cubic has exactly one root in [0, a + |b|^2/4 + 1].  The root is
found by Newton steps safeguarded with a shrinking bracket; the bracket
endpoint with nonpositive value is returned, so the output never
violates the constraint.
"""

import numpy as np

from ..exceptions import RootFindFailure

BACKEND = "numpy"


def project_paraboloid(a, bx, by, tol=1e-13, maxit=200):
    """Batch projection onto K; returns new arrays (a*, bx*, by*)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    bx = np.ascontiguousarray(bx, dtype=np.float64)
    by = np.ascontiguousarray(by, dtype=np.float64)
    if not (a.shape == bx.shape == by.shape) or a.ndim != 1:
        raise ValueError("expected matching one-dimensional arrays")

    q = bx * bx + by * by
    slack = a + 0.25 * q
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(q))):
        raise RootFindFailure("non-finite input to paraboloid projection")

    out_a = a.copy()
    out_bx = bx.copy()
    out_by = by.copy()
    idx = np.nonzero(slack > 0.0)[0]
    if idx.size == 0:
        return out_a, out_bx, out_by

    av = a[idx]
    qv = q[idx]

    lo = np.zeros(idx.size)
    hi = av + 0.25 * qv + 1.0  # value there is provably negative
    lam = 0.5 * hi

    def value(x):
        s = 1.0 + 0.5 * x
        return (av - x) * s * s + 0.25 * qv

    for _ in range(maxit):
        f = value(lam)
        pos = f > 0.0
        lo = np.where(pos, lam, lo)
        hi = np.where(pos, hi, lam)
        if np.all(hi - lo <= tol * (1.0 + hi)):
            break
        s = 1.0 + 0.5 * lam
        fp = s * (av - 1.0 - 1.5 * lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = lam - f / fp
        good = np.isfinite(newton) & (newton > lo) & (newton < hi)
        lam = np.where(good, newton, 0.5 * (lo + hi))

    lam = hi  # nonpositive cubic value, hence a feasible output
    scale = 1.0 / (1.0 + 0.5 * lam)
    out_a[idx] = av - lam
    out_bx[idx] = bx[idx] * scale
    out_by[idx] = by[idx] * scale
    return out_a, out_bx, out_by
