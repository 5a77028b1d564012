import os
import subprocess
import sys

import numpy as np
import pytest

from oracles import exact_tail
from scenopt import _kernels

BACKENDS = _kernels.backends()


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("d,n,alpha", [(59, 1, 0.05), (447, 10, 0.05), (5000, 30, 0.003),
                                       (20, 21, 0.5), (1, 1, 0.999)])
def test_binomial_tail(name, d, n, alpha):
    assert BACKENDS[name].binomial_tail(d, n, alpha) == pytest.approx(exact_tail(d, n, alpha),
                                                                      rel=1e-11, abs=1e-15)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_refactor(name, rng):
    A = rng.normal(size=(8, 4))
    basis = np.array([1, 3, 4, 6], dtype=np.int64)
    rhs = rng.normal(size=4)
    Binv, xB = np.empty((4, 4)), np.empty(4)
    assert BACKENDS[name].refactor(A, basis, rhs, Binv, xB)
    np.testing.assert_allclose(Binv @ A[basis].T, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(A[basis].T @ xB, rhs, atol=1e-10)
    A[3] = A[1]
    assert not BACKENDS[name].refactor(A, basis, rhs, Binv, xB)


def test_active_backend_is_listed():
    assert _kernels.BACKEND in BACKENDS


def test_env_forces_python():
    code = "from scenopt import _kernels; print(_kernels.BACKEND)"
    env = dict(os.environ, SCENOPT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
