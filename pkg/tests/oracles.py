"""Independent reference computations used by the tests."""
import itertools
from fractions import Fraction
from math import comb

import numpy as np


def exact_tail(d, n, alpha):
    """Binomial CDF P(X <= n - 1) in exact rational arithmetic."""
    a = Fraction(alpha)
    total = sum(comb(d, k) * a**k * (1 - a) ** (d - k) for k in range(min(n, d + 1)))
    return float(total)


def direct_tail(d, n, alpha):
    """Plain floating-point summation, no log space."""
    return sum(comb(d, k) * alpha**k * (1 - alpha) ** (d - k) for k in range(min(n, d + 1)))


def scan_min_scenarios(n, alpha, epsilon):
    d = 1
    while exact_tail(d, n, alpha) > 1 - epsilon:
        d += 1
    return d


def vertex_enumeration(c, A, b, tol=1e-9):
    """Exact LP optimum of ``min c.x s.t. A x <= b`` over all basic solutions.

    Returns (objective, x) or (None, None) when no vertex is feasible.
    Assumes the LP is bounded and its feasible set has a vertex.
    """
    m, n = A.shape
    best, arg = np.inf, None
    subsets = np.array(list(itertools.combinations(range(m), n)))
    B = A[subsets]
    rhs = b[subsets]
    ok = np.abs(np.linalg.det(B)) > 1e-10
    X = np.linalg.solve(B[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(X @ A.T <= b + tol * (1 + np.abs(b)), axis=1)
    if not feas.any():
        return None, None
    vals = X[feas] @ c
    k = int(np.argmin(vals))
    return float(vals[k]), X[feas][k]


def random_bounded_lp(rng, n, m, box=10.0):
    """Feasible LP with m random rows plus the box |x_i| <= box."""
    x0 = rng.uniform(-1, 1, size=n)
    A = rng.normal(size=(m, n))
    b = A @ x0 + rng.uniform(0.1, 2.0, size=m)
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    b = np.concatenate([b, np.full(2 * n, box)])
    c = rng.normal(size=n)
    return c, A, b


def golden_section(f, lo, hi, tol=1e-10):
    g = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1, x2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - g * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + g * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)
