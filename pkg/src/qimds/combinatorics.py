"""Exact and log-space combinatorial kernels.

Everything that touches a factorial goes through here. Probabilities at
N = 200 involve factorials far outside double range, so prefactors are
carried as logarithms and signed sums as ``(sign, log|x|)``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

# Reduced, positive-denominator rationals; Fraction already guarantees both.
ExactRational = Fraction

LOG_ZERO = float("-inf")


class DomainError(ValueError):
    """Raised when a combinatorial argument lies outside its domain."""


class LogFactorialTable:
    """Immutable table of ``ln(n!)`` for ``0 <= n <= n_max``."""

    __slots__ = ("_values",)

    def __init__(self, n_max: int):
        if n_max < 0:
            raise DomainError(f"n_max must be nonnegative, got {n_max}")
        values = np.empty(n_max + 1)
        values[0] = 0.0
        for n in range(1, n_max + 1):
            values[n] = math.lgamma(n + 1)
        values.setflags(write=False)
        self._values = values

    @property
    def n_max(self) -> int:
        return len(self._values) - 1

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __getitem__(self, n):
        return self._values[n]

    def __len__(self) -> int:
        return len(self._values)

    def log_binomial(self, n: int, k: int) -> float:
        if n < 0 or k < 0 or k > n:
            raise DomainError(f"log_binomial needs 0 <= k <= n, got n={n}, k={k}")
        if n > self.n_max:
            raise DomainError(f"n={n} exceeds table size n_max={self.n_max}")
        v = self._values
        return float(v[n] - v[k] - v[n - k])


@lru_cache(maxsize=None)
def _table_for(n_max: int) -> LogFactorialTable:
    return LogFactorialTable(n_max)


def log_factorial_table(n_max: int) -> LogFactorialTable:
    """Shared table of at least ``n_max + 1`` entries.

    Tables are rounded up to a multiple of 256 so a sweep over growing N
    reuses a handful of instances.
    """
    size = max(256, -(-(n_max + 1) // 256) * 256)
    return _table_for(size - 1)


def log_factorial(n: int) -> float:
    return float(log_factorial_table(n)[n])


def log_binomial(n: int, k: int) -> float:
    """``ln C(n, k)`` from the shared log-factorial table."""
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"log_binomial needs 0 <= k <= n, got n={n}, k={k}")
    return log_factorial_table(n).log_binomial(n, k)


def exact_binomial(n: int, k: int) -> int:
    """Exact ``C(n, k)`` by the multiplicative formula."""
    if n < 0 or k < 0:
        raise DomainError(f"exact_binomial needs nonnegative arguments, got n={n}, k={k}")
    if k > n:
        raise DomainError(f"exact_binomial needs k <= n, got n={n}, k={k}")
    k = min(k, n - k)
    result = 1
    for i in range(1, k + 1):
        # exact at every step: C(n-k+i, i) is an integer
        result = result * (n - k + i) // i
    return result


def signed_log_sum(terms: Iterable[tuple[int, float]]) -> tuple[int, float]:
    """Sign and log-magnitude of ``sum(sign * exp(log_mag))``.

    Terms are shifted by the largest log-magnitude and accumulated with
    ``math.fsum``, so the result is correctly rounded and independent of
    term order. Exact cancellation returns ``(0, -inf)``.
    """
    terms = [(s, l) for s, l in terms if s != 0 and l != LOG_ZERO]
    if not terms:
        return 0, LOG_ZERO
    shift = max(l for _, l in terms)
    if math.isinf(shift):
        raise DomainError("signed_log_sum received an infinite log-magnitude")
    total = math.fsum(s * math.exp(l - shift) for s, l in terms)
    if total == 0.0:
        return 0, LOG_ZERO
    return (1 if total > 0 else -1), shift + math.log(abs(total))


def signed_logsumexp(
    signs: np.ndarray, logs: np.ndarray, axis: int = -1
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`signed_log_sum` along ``axis``.

    Uses numpy's pairwise summation (fixed order, hence bit-stable) rather
    than fsum; the scalar version is the reference.
    """
    signs = np.asarray(signs, dtype=float)
    logs = np.asarray(logs, dtype=float)
    live = (signs != 0) & np.isfinite(logs)
    masked = np.where(live, logs, -np.inf)
    shift = np.max(masked, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    with np.errstate(under="ignore"):
        scaled = np.where(live, signs * np.exp(masked - shift), 0.0)
    total = np.sum(scaled, axis=axis)
    shift = np.squeeze(shift, axis=axis)
    out_sign = np.sign(total)
    with np.errstate(divide="ignore"):
        out_log = np.where(total != 0, shift + np.log(np.abs(total)), -np.inf)
    return out_sign, out_log


def signed_log_power(base: np.ndarray, exponent: int) -> tuple[np.ndarray, np.ndarray]:
    """``(sign, log|.|)`` of ``base ** exponent`` with ``0 ** 0 == 1``."""
    base = np.asarray(base, dtype=float)
    if exponent == 0:
        return np.ones_like(base), np.zeros_like(base)
    with np.errstate(divide="ignore"):
        logs = exponent * np.log(np.abs(base))
    signs = np.sign(base) ** exponent
    return signs, logs


def log_multinomial_weight(counts: Sequence[int], numerators: Sequence[int] = ()) -> float:
    """``ln(prod(numerators!) / prod(counts!))``."""
    top = max([0, *counts, *numerators])
    table = log_factorial_table(top)
    return float(sum(table[n] for n in numerators) - sum(table[c] for c in counts))
