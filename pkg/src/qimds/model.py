"""Sources, interferometer geometry and measurement outcomes."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

DEFAULT_THETA = math.pi / 2
DEFAULT_ENUMERATION_CAP = 40


class InvalidOutcomeError(ValueError):
    """Counts that are negative or do not fit the source configuration."""


class CapExceededError(RuntimeError):
    """A request exceeds a configured size cap (enumeration, oracle tier)."""


def normalize_angle(angle: float) -> float:
    """Map an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


@dataclass(frozen=True)
class SourceConfig:
    n_alpha: int
    n_beta: int

    def __post_init__(self):
        if self.n_alpha < 0 or self.n_beta < 0:
            raise InvalidOutcomeError(
                f"source occupations must be nonnegative: {self.n_alpha}, {self.n_beta}"
            )

    def total(self) -> int:
        return self.n_alpha + self.n_beta


@dataclass(frozen=True)
class InterferometerConfig:
    source: SourceConfig
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @classmethod
    def of(cls, n_alpha: int, n_beta: int, theta: float = DEFAULT_THETA) -> "InterferometerConfig":
        return cls(SourceConfig(n_alpha, n_beta), theta)

    @property
    def n_alpha(self) -> int:
        return self.source.n_alpha

    @property
    def n_beta(self) -> int:
        return self.source.n_beta

    @property
    def total(self) -> int:
        return self.source.total()

    @property
    def is_quadrature_phase(self) -> bool:
        """True at the symmetric setting theta = pi/2."""
        return math.isclose(self.theta, math.pi / 2, rel_tol=0, abs_tol=1e-15)


@dataclass(frozen=True)
class ModeExpansion:
    """Row i holds (v_i_alpha, v_i_beta) so that a_i = v_ia a_alpha + v_ib a_beta."""

    coefficients: np.ndarray = field(repr=False)

    def row(self, detector: int) -> tuple[complex, complex]:
        """Coefficients for detector 1..4."""
        a, b = self.coefficients[detector - 1]
        return complex(a), complex(b)


def standard_mode_expansion(cfg: InterferometerConfig) -> ModeExpansion:
    """Output modes of the four-detector interferometer traced back to the sources.

    Every beam splitter contributes 1/sqrt(2) and every reflection a factor i;
    the alpha arm carries the extra path phase theta.
    """
    e = cmath.exp(1j * cfg.theta)
    r = 1 / math.sqrt(2)
    coeffs = np.array(
        [
            [e / 2, 1j / 2],
            [1j * e / 2, 1 / 2],
            [1j * r, 0],
            [0, 1j * r],
        ],
        dtype=complex,
    )
    coeffs.setflags(write=False)
    return ModeExpansion(coeffs)


@dataclass(frozen=True, order=True)
class OutcomeRecord:
    m1: int
    m2: int
    m_alpha: int
    m_beta: int

    def __post_init__(self):
        if min(self.m1, self.m2, self.m_alpha, self.m_beta) < 0:
            raise InvalidOutcomeError(f"negative detector count in {self}")

    @property
    def M(self) -> int:
        return self.m1 + self.m2

    def total(self) -> int:
        return self.m1 + self.m2 + self.m_alpha + self.m_beta

    def check_against(self, source: SourceConfig) -> None:
        if self.total() != source.total():
            raise InvalidOutcomeError(
                f"counts {self.m1, self.m2, self.m_alpha, self.m_beta} sum to "
                f"{self.total()}, expected N={source.total()}"
            )


def iter_outcomes(N: int) -> Iterator[OutcomeRecord]:
    """4-part compositions of N in lexicographic order."""
    for m1 in range(N + 1):
        for m2 in range(N - m1 + 1):
            rest = N - m1 - m2
            for m_alpha in range(rest + 1):
                yield OutcomeRecord(m1, m2, m_alpha, rest - m_alpha)


def enumerate_outcomes(
    source: SourceConfig, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[OutcomeRecord]:
    N = source.total()
    if N > cap:
        raise CapExceededError(
            f"N={N} exceeds the enumeration cap {cap}; "
            f"the full table would hold {math.comb(N + 3, 3)} outcomes"
        )
    return list(iter_outcomes(N))
