"""Sample-size arithmetic for random and grid-based scenario programs.

``min_scenarios`` returns the number of i.i.d. scenarios after which the
optimum of a convex scenario program with ``n`` decision variables violates
the chance constraint (level ``alpha``) with probability at most
``1 - epsilon``. ``pd_grid_count`` gives the size of the Cartesian grid used
by distribution-based sampling, which grows as ``b ** m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels

DEFAULT_CAP = 10**9
_EXACT_LIMIT = 2**53


class ScenarioCapError(OverflowError):
    """Raised when the required scenario count exceeds the configured cap."""


@dataclass(frozen=True)
class ChanceSpec:
    """Decision dimension, violation level and confidence of a chance constraint."""

    n: int
    alpha: float
    epsilon: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        _check_open_unit("alpha", self.alpha)
        _check_open_unit("epsilon", self.epsilon)


def _check_open_unit(name, value):
    if not (0.0 < value < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class BigCount:
    """A count that is exact when small and kept in log10 form when huge.

    ``exact`` holds the integer when it does not exceed 2**53; otherwise it
    is None and the value is ``mantissa * 10**exponent10``.
    """

    mantissa: float
    exponent10: int
    exact: int | None = None

    @classmethod
    def from_int(cls, value: int) -> "BigCount":
        if value < 0:
            raise ValueError("counts are non-negative")
        if value == 0:
            return cls(0.0, 0, 0)
        digits = len(str(value)) - 1
        lead = int(str(value)[:17])
        mantissa = lead / 10 ** (len(str(lead)) - 1)
        return cls(mantissa, digits, value if value <= _EXACT_LIMIT else None)

    @classmethod
    def from_log10(cls, log10_value: float) -> "BigCount":
        if log10_value < math.log10(_EXACT_LIMIT):
            return cls.from_int(round(10.0**log10_value))
        exponent = math.floor(log10_value)
        mantissa = 10.0 ** (log10_value - exponent)
        if mantissa >= 10.0:  # rounding at the boundary
            mantissa /= 10.0
            exponent += 1
        return cls(mantissa, int(exponent), None)

    @property
    def log10(self) -> float:
        if self.exact is not None:
            return math.log10(self.exact) if self.exact > 0 else -math.inf
        return self.exponent10 + math.log10(self.mantissa)

    def __float__(self):
        if self.exact is not None:
            return float(self.exact)
        return self.mantissa * 10.0**self.exponent10

    def __mul__(self, other: "BigCount") -> "BigCount":
        if self.exact is not None and other.exact is not None:
            return BigCount.from_int(self.exact * other.exact)
        if self.exact == 0 or other.exact == 0:
            return BigCount.from_int(0)
        return BigCount.from_log10(self.log10 + other.log10)

    def exceeds(self, cap: int) -> bool:
        if self.exact is not None:
            return self.exact > cap
        return self.log10 > math.log10(cap)

    def short_format(self) -> str:
        """Compact rendering used in scenario-count tables ("0.6k", "2.2e29").

        Counts below 10**4 are shown in thousands, larger ones in scientific
        notation; the last shown digit is truncated, never rounded up, and a
        trailing ".0" is dropped.
        """
        if self.exact is not None and self.exact < 100:
            return str(self.exact)
        if self.exact is not None and self.exact < 10**4:
            return _trim(math.floor(self.exact / 100) / 10) + "k"
        mant = math.floor(self.mantissa * 10 + 1e-9) / 10
        return f"{_trim(mant)}e{self.exponent10}"

    def __str__(self):
        if self.exact is not None:
            return str(self.exact)
        return f"{self.mantissa:.6g}e{self.exponent10}"


def _trim(value: float) -> str:
    text = f"{value:.1f}"
    return text[:-2] if text.endswith(".0") else text


def binomial_tail(d: int, n: int, alpha: float) -> float:
    """P(X <= n - 1) for X ~ Binomial(d, alpha), summed in log space."""
    _check_open_unit("alpha", alpha)
    if n < 1 or d < 1:
        raise ValueError("d and n must be positive integers")
    return _kernels.binomial_tail(int(d), int(n), float(alpha))


def min_scenarios(spec: ChanceSpec, cap: int = DEFAULT_CAP) -> int:
    """Smallest d with ``binomial_tail(d, n, alpha) <= 1 - epsilon``."""
    target = 1.0 - spec.epsilon
    lo, hi = 0, 1
    while binomial_tail(hi, spec.n, spec.alpha) > target:
        lo = hi
        if hi >= cap:
            raise ScenarioCapError(
                f"more than {cap} scenarios needed for n={spec.n}, "
                f"alpha={spec.alpha}, epsilon={spec.epsilon}")
        hi = min(2 * hi, cap)
    # invariant: tail(lo) > target (or lo == 0), tail(hi) <= target
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if binomial_tail(mid, spec.n, spec.alpha) > target:
            lo = mid
        else:
            hi = mid
    return hi


def pd_grid_count(b: int, num_uncertain: int) -> BigCount:
    """Number of grid scenarios, ``b ** num_uncertain``."""
    if b < 1:
        raise ValueError("b must be a positive integer")
    if num_uncertain < 0:
        raise ValueError("num_uncertain must be non-negative")
    log_value = num_uncertain * math.log10(b) if b > 1 else 0.0
    if log_value <= math.log10(_EXACT_LIMIT):
        return BigCount.from_int(b**num_uncertain)
    return BigCount.from_log10(log_value)


def implied_dimension(N: int, alpha: float, epsilon: float) -> int:
    """Largest n whose bound ``min_scenarios(n, alpha, epsilon)`` is at most N.

    Uses ``min_scenarios(n) <= N  <=>  binomial_tail(N, n) <= 1 - epsilon``;
    the tail grows with n, so a bisection over n in [1, N] suffices.
    Returns 0 when even n = 1 needs more than N scenarios.
    """
    if N < 1:
        raise ValueError("N must be a positive integer")
    _check_open_unit("alpha", alpha)
    _check_open_unit("epsilon", epsilon)
    target = 1.0 - epsilon
    if binomial_tail(N, 1, alpha) > target:
        return 0
    lo, hi = 1, N + 1  # tail(N, N + 1) == 1 > target
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if binomial_tail(N, mid, alpha) <= target:
            lo = mid
        else:
            hi = mid
    return lo
