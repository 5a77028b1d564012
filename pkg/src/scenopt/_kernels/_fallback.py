"""Pure-Python (numpy) kernels.

Same contracts as the compiled ``_core`` module; selected automatically when
the extension is not built or ``SCENOPT_PURE_PYTHON`` is set.
"""
import math

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITER_LIMIT = 2
SINGULAR = 3

HARRIS_TOL = 1e-9


def binomial_tail(d, n, alpha):
    """Sum of the first ``min(n, d + 1)`` binomial(d, alpha) probabilities."""
    kmax = min(n, d + 1)
    if kmax <= 0:
        return 0.0
    k = np.arange(kmax - 1, dtype=float)
    step = np.log((d - k) / (k + 1.0)) + (math.log(alpha) - math.log1p(-alpha))
    logs = np.empty(kmax)
    logs[0] = d * math.log1p(-alpha)
    if kmax > 1:
        logs[1:] = logs[0] + np.cumsum(step)
    top = logs.max()
    total = math.exp(top) * float(np.exp(logs - top).sum())
    return min(1.0, max(0.0, total))


def refactor(A, basis, rhs, Binv, xB):
    """Recompute the basis inverse and basic values in place; False if singular.

    Gauss-Jordan with partial pivoting and the compiled kernel's pivot floor,
    so both backends agree on when a basis counts as singular.
    """
    work = A[basis].T.copy()
    n = work.shape[0]
    scale = np.abs(work).max(initial=0.0)
    if scale == 0.0:
        return False
    inv = np.eye(n)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(work[k:, k])))
        if abs(work[piv, k]) <= 1e-14 * scale:
            return False
        if piv != k:
            work[[k, piv]] = work[[piv, k]]
            inv[[k, piv]] = inv[[piv, k]]
        f = 1.0 / work[k, k]
        work[k] *= f
        inv[k] *= f
        col = work[:, k].copy()
        col[k] = 0.0
        work -= np.outer(col, work[k])
        inv -= np.outer(col, inv[k])
    Binv[...] = inv
    xB[...] = inv @ rhs
    return True


def pivot(A, basis, Binv, xB, in_basis, q, p, alpha):
    theta = xB[p] / alpha[p]
    xB -= theta * alpha
    xB[p] = theta
    row = Binv[p] / alpha[p]
    Binv -= np.outer(alpha, row)
    Binv[p] = row
    in_basis[basis[p]] = 0
    basis[p] = q
    in_basis[q] = 1
    return theta


def simplex_loop(A, cost, eligible, rhs, basis, Binv, xB, in_basis, rownorm,
                 tol, piv_tol, max_iter, bland_after, refactor_every, streak):
    """Revised simplex pivots on ``min cost.y  s.t.  A.T y = rhs, y >= 0``.

    Column ``j`` of the standard form is row ``j`` of ``A``. Mutates the basis
    state in place and returns ``(status, iterations, entering, streak)``;
    ``entering`` is the unbounded column when status is UNBOUNDED.
    """
    candidates = (eligible != 0)
    since = 0
    for it in range(max_iter):
        pi = Binv.T @ cost[basis]
        d = cost - A @ pi
        mask = candidates & (in_basis == 0) & (d < -tol)
        if not mask.any():
            return OPTIMAL, it, -1, streak
        if streak >= bland_after:
            q = int(np.flatnonzero(mask)[0])
        else:
            score = np.where(mask, d / rownorm, np.inf)
            q = int(np.argmin(score))
        alpha = Binv @ A[q]
        pos = alpha > piv_tol * max(1.0, float(alpha.max()))
        if not pos.any():
            return UNBOUNDED, it, q, streak
        xpos = np.maximum(xB, 0.0)
        ratios = np.full(alpha.shape, np.inf)
        ratios[pos] = xpos[pos] / alpha[pos]
        if streak >= bland_after:
            # strict minimum ratio, smallest basic index first
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta * (1.0 + 1e-12) + 1e-300)
            p = int(ties[np.argmin(basis[ties])])
        else:
            # two-pass test: within a small slack of the minimum take the largest pivot
            bound = ((xpos[pos] + HARRIS_TOL) / alpha[pos]).min()
            ties = np.flatnonzero(ratios <= bound)
            big = alpha[ties].max()
            ties = ties[alpha[ties] >= big * (1.0 - 1e-12)]
            p = int(ties[np.argmin(basis[ties])])
        xB[p] = xpos[p]
        step = pivot(A, basis, Binv, xB, in_basis, q, p, alpha)
        streak = streak + 1 if step <= 1e-12 else 0
        since += 1
        if since >= refactor_every:
            since = 0
            if not refactor(A, basis, rhs, Binv, xB):
                return SINGULAR, it + 1, -1, streak
    return ITER_LIMIT, max_iter, -1, streak
