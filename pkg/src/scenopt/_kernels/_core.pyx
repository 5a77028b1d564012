# cython: language_level=3
"""Compiled kernels: binomial tail sum and the revised-simplex pivot loop.

Semantics match ``_fallback`` exactly (same pricing, ratio test and tie
breaking); only summation order inside dot products may differ.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, exp, fabs, INFINITY

cnp.import_array()

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITER_LIMIT = 2
DEF SINGULAR = 3
DEF HARRIS_TOL = 1e-9


def binomial_tail(long long d, long long n, double alpha):
    cdef long long kmax = n if n < d + 1 else d + 1
    cdef long long k
    cdef double t, top, s, odds
    if kmax <= 0:
        return 0.0
    odds = log(alpha) - log1p(-alpha)
    t = d * log1p(-alpha)
    top = t
    s = 1.0
    for k in range(kmax - 1):
        t += log((<double>(d - k)) / (k + 1.0)) + odds
        if t > top:
            s = s * exp(top - t) + 1.0
            top = t
        else:
            s += exp(t - top)
    s = exp(top) * s
    if s > 1.0:
        return 1.0
    if s < 0.0:
        return 0.0
    return s


cdef bint _refactor(const double[:, ::1] A, const long long[::1] basis,
                    const double[::1] rhs, double[:, ::1] Binv, double[::1] xB,
                    double[:, ::1] work) noexcept nogil:
    # Gauss-Jordan on [B | I] with partial pivoting.
    cdef Py_ssize_t n = basis.shape[0]
    cdef Py_ssize_t i, j, k, piv
    cdef double big, f, tmp, scale = 0.0
    for i in range(n):
        for j in range(n):
            work[i, j] = A[basis[j], i]
            if fabs(work[i, j]) > scale:
                scale = fabs(work[i, j])
            Binv[i, j] = 1.0 if i == j else 0.0
    if scale == 0.0:
        return False
    for k in range(n):
        piv = k
        big = fabs(work[k, k])
        for i in range(k + 1, n):
            if fabs(work[i, k]) > big:
                big = fabs(work[i, k])
                piv = i
        if big <= 1e-14 * scale:
            return False
        if piv != k:
            for j in range(n):
                tmp = work[k, j]; work[k, j] = work[piv, j]; work[piv, j] = tmp
                tmp = Binv[k, j]; Binv[k, j] = Binv[piv, j]; Binv[piv, j] = tmp
        f = 1.0 / work[k, k]
        for j in range(n):
            work[k, j] *= f
            Binv[k, j] *= f
        for i in range(n):
            if i != k and work[i, k] != 0.0:
                f = work[i, k]
                for j in range(n):
                    work[i, j] -= f * work[k, j]
                    Binv[i, j] -= f * Binv[k, j]
    for i in range(n):
        tmp = 0.0
        for j in range(n):
            tmp += Binv[i, j] * rhs[j]
        xB[i] = tmp
    return True


def refactor(A, basis, rhs, Binv, xB):
    n = basis.shape[0]
    work = np.empty((n, n))
    return bool(_refactor(A, basis, rhs, Binv, xB, work))


def simplex_loop(const double[:, ::1] A, const double[::1] cost,
                 const unsigned char[::1] eligible, const double[::1] rhs,
                 long long[::1] basis, double[:, ::1] Binv, double[::1] xB,
                 unsigned char[::1] in_basis, const double[::1] rownorm,
                 double tol, double piv_tol, long long max_iter,
                 long long bland_after, long long refactor_every,
                 long long streak):
    cdef Py_ssize_t M = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef double[::1] pi = np.empty(n)
    cdef double[::1] alpha = np.empty(n)
    cdef double[::1] row = np.empty(n)
    cdef double[:, ::1] work = np.empty((n, n))
    cdef Py_ssize_t i, j, k, p
    cdef long long it, q, since = 0, bestb
    cdef double dj, score, best, theta, r, cut, a_p, amax, ptol, bound, xp, big
    cdef int status = ITER_LIMIT
    cdef long long done = max_iter, entering = -1

    with nogil:
        for it in range(max_iter):
            for k in range(n):
                r = 0.0
                for i in range(n):
                    r += Binv[i, k] * cost[basis[i]]
                pi[k] = r
            q = -1
            best = INFINITY
            for j in range(M):
                if eligible[j] == 0 or in_basis[j] != 0:
                    continue
                dj = cost[j]
                for k in range(n):
                    dj -= A[j, k] * pi[k]
                if dj < -tol:
                    if streak >= bland_after:
                        q = j
                        break
                    score = dj / rownorm[j]
                    if score < best:
                        best = score
                        q = j
            if q < 0:
                status = OPTIMAL
                done = it
                break
            for i in range(n):
                r = 0.0
                for k in range(n):
                    r += Binv[i, k] * A[q, k]
                alpha[i] = r
            amax = 1.0
            for i in range(n):
                if alpha[i] > amax:
                    amax = alpha[i]
            ptol = piv_tol * amax
            theta = INFINITY
            bound = INFINITY
            for i in range(n):
                if alpha[i] > ptol:
                    xp = xB[i] if xB[i] > 0.0 else 0.0
                    r = xp / alpha[i]
                    if r < theta:
                        theta = r
                    r = (xp + HARRIS_TOL) / alpha[i]
                    if r < bound:
                        bound = r
            if theta == INFINITY:
                status = UNBOUNDED
                done = it
                entering = q
                break
            p = -1
            bestb = -1
            if streak >= bland_after:
                cut = theta * (1.0 + 1e-12) + 1e-300
                for i in range(n):
                    if alpha[i] > ptol:
                        r = (xB[i] if xB[i] > 0.0 else 0.0) / alpha[i]
                        if r <= cut and (p < 0 or basis[i] < bestb):
                            p = i
                            bestb = basis[i]
            else:
                big = 0.0
                for i in range(n):
                    if alpha[i] > ptol:
                        r = (xB[i] if xB[i] > 0.0 else 0.0) / alpha[i]
                        if r <= bound and alpha[i] > big:
                            big = alpha[i]
                cut = big * (1.0 - 1e-12)
                for i in range(n):
                    if alpha[i] > ptol and alpha[i] >= cut:
                        r = (xB[i] if xB[i] > 0.0 else 0.0) / alpha[i]
                        if r <= bound and (p < 0 or basis[i] < bestb):
                            p = i
                            bestb = basis[i]
            if xB[p] < 0.0:
                xB[p] = 0.0
            a_p = alpha[p]
            theta = xB[p] / a_p
            for i in range(n):
                xB[i] -= theta * alpha[i]
            xB[p] = theta
            for k in range(n):
                row[k] = Binv[p, k] / a_p
            for i in range(n):
                if alpha[i] != 0.0:
                    for k in range(n):
                        Binv[i, k] -= alpha[i] * row[k]
            for k in range(n):
                Binv[p, k] = row[k]
            in_basis[basis[p]] = 0
            basis[p] = q
            in_basis[q] = 1
            if theta <= 1e-12:
                streak += 1
            else:
                streak = 0
            since += 1
            if since >= refactor_every:
                since = 0
                if not _refactor(A, basis, rhs, Binv, xB, work):
                    status = SINGULAR
                    done = it + 1
                    break
    return status, done, entering, streak
