# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled projection onto K = {(a, b) : a + |b|^2/4 <= 0}.

Same contract as the NumPy reference implementation, one safeguarded
Newton solve per infeasible element.  Serial on purpose: runs are
deterministic and the per-element work is tiny.
"""

import numpy as np

cimport numpy as cnp

from ..exceptions import RootFindFailure

cnp.import_array()

BACKEND = "cython"


cdef inline double _cubic(double a, double q, double lam) nogil:
    cdef double s = 1.0 + 0.5 * lam
    return (a - lam) * s * s + 0.25 * q


def project_paraboloid(a, bx, by, double tol=1e-13, int maxit=200):
    """Batch projection onto K; returns new arrays (a*, bx*, by*)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bxv = np.ascontiguousarray(bx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] byv = np.ascontiguousarray(by, dtype=np.float64)
    if av.shape[0] != bxv.shape[0] or av.shape[0] != byv.shape[0]:
        raise ValueError("expected matching one-dimensional arrays")

    cdef Py_ssize_t n = av.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] oa = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] obx = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] oby = np.empty(n, dtype=np.float64)

    cdef Py_ssize_t e
    cdef int it, bad = 0
    cdef double ai, xi, yi, q, slack, lo, hi, lam, f, fp, s, newton, scale

    with nogil:
        for e in range(n):
            ai = av[e]
            xi = bxv[e]
            yi = byv[e]
            q = xi * xi + yi * yi
            slack = ai + 0.25 * q
            if not (slack == slack and slack - slack == 0.0):
                bad = 1
                break
            if slack <= 0.0:
                oa[e] = ai
                obx[e] = xi
                oby[e] = yi
                continue
            lo = 0.0
            hi = slack + 1.0
            lam = 0.5 * hi
            for it in range(maxit):
                f = _cubic(ai, q, lam)
                if f > 0.0:
                    lo = lam
                else:
                    hi = lam
                if hi - lo <= tol * (1.0 + hi):
                    break
                s = 1.0 + 0.5 * lam
                fp = s * (ai - 1.0 - 1.5 * lam)
                if fp != 0.0:
                    newton = lam - f / fp
                    if newton > lo and newton < hi:
                        lam = newton
                        continue
                lam = 0.5 * (lo + hi)
            lam = hi  # cubic value nonpositive here: output stays feasible
            scale = 1.0 / (1.0 + 0.5 * lam)
            oa[e] = ai - lam
            obx[e] = xi * scale
            oby[e] = yi * scale
    if bad:
        raise RootFindFailure("non-finite input to paraboloid projection")
    return oa, obx, oby
