"""Ground-truth transition amplitudes for the double Fock state.

Two independent routes to the same matrix element:

* :func:`amplitude` binomially expands ``a1**m1 a2**m2`` and keeps the single
  sum of terms whose alpha/beta annihilation counts match the source;
* :func:`brute_force_amplitude` multiplies out all ``N`` linear forms as a
  dense polynomial in the two (commuting) annihilation symbols.

Neither touches the integral representation in :mod:`qimds.quadrature`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Optional

import numpy as np

from .combinatorics import log_multinomial_weight
from .model import (
    CapExceededError,
    InterferometerConfig,
    OutcomeRecord,
    iter_outcomes,
    standard_mode_expansion,
)

EXACT_TIER_MAX_N = 30
BRUTE_FORCE_MAX_N = 16

_I_POWERS = (1, 1j, -1, -1j)


@dataclass(frozen=True)
class ExactAmplitude:
    """``(re + i*im) * sqrt(radicand) * 2**(-half_power_of_two / 2)``.

    ``re``/``im`` are Gaussian-rational parts; ``radicand`` is the factorial
    ratio ``N_a! N_b! / (m1! m2! m_a! m_b!)``, which is rational but not in
    general a perfect square.
    """

    re: Fraction
    im: Fraction
    radicand: Fraction
    half_power_of_two: int

    def probability(self) -> Fraction:
        return (self.re**2 + self.im**2) * self.radicand / Fraction(2) ** self.half_power_of_two

    def to_complex(self) -> complex:
        if self.re == 0 and self.im == 0:
            return 0j
        log_scale = 0.5 * (
            math.log(self.radicand.numerator) - math.log(self.radicand.denominator)
        ) - 0.5 * self.half_power_of_two * math.log(2)
        scale = math.exp(log_scale)
        return complex(float(self.re) * scale, float(self.im) * scale)


@dataclass(frozen=True)
class Amplitude:
    value: complex
    exact: Optional[ExactAmplitude] = None

    @property
    def probability(self) -> float:
        if self.exact is not None:
            return float(self.exact.probability())
        return abs(self.value) ** 2


def _side_counts(cfg: InterferometerConfig, out: OutcomeRecord) -> tuple[int, int]:
    """alpha and beta annihilations the interferometer arms must supply."""
    return cfg.n_alpha - out.m_alpha, cfg.n_beta - out.m_beta


def kravchuk_sum(m1: int, m2: int, s: int) -> int:
    """``sum_j (-1)**j C(m1, j) C(m2, s - j)``: coefficient of x**s in (1-x)**m1 (1+x)**m2."""
    lo, hi = max(0, s - m2), min(m1, s)
    return sum((-1) ** j * comb(m1, j) * comb(m2, s - j) for j in range(lo, hi + 1))


def amplitude(cfg: InterferometerConfig, out: OutcomeRecord) -> Amplitude:
    """Amplitude ``<0| a3^ma a4^mb a1^m1 a2^m2 |Na Nb> / sqrt(m1! m2! ma! mb!)``.

    Expanding ``a1 = (e^{i theta} a_alpha + i a_beta)/2`` and
    ``a2 = (i e^{i theta} a_alpha + a_beta)/2`` and keeping the terms with
    ``j + k = N_alpha - m_alpha`` alpha-annihilations, every surviving term
    carries the same phase ``e^{i theta s} i^{m1 + s}`` times ``(-1)**j``, so
    the amplitude reduces to one integer sum. Unsatisfiable counts give 0.
    """
    s, t = _side_counts(cfg, out)
    if s < 0 or t < 0 or s + t != out.M:
        return Amplitude(0j, _zero_exact() if cfg.is_quadrature_phase else None)
    k = kravchuk_sum(out.m1, out.m2, s)
    # 2^-M from the arm beam splitters, (1/sqrt 2)^(ma+mb) from the side ones
    half_pow = 2 * out.M + out.m_alpha + out.m_beta
    phase_index = out.m1 + s + out.m_alpha + out.m_beta
    exact = None
    if cfg.is_quadrature_phase:
        # e^{i theta s} = i^s
        unit = _I_POWERS[(phase_index + s) % 4]
        radicand = Fraction(
            math.factorial(cfg.n_alpha) * math.factorial(cfg.n_beta),
            math.factorial(out.m1)
            * math.factorial(out.m2)
            * math.factorial(out.m_alpha)
            * math.factorial(out.m_beta),
        )
        exact = ExactAmplitude(
            Fraction(int(unit.real) * k), Fraction(int(unit.imag) * k), radicand, half_pow
        )
    if k == 0:
        return Amplitude(0j, exact)
    log_mag = (
        0.5 * log_multinomial_weight(
            (out.m1, out.m2, out.m_alpha, out.m_beta), (cfg.n_alpha, cfg.n_beta)
        )
        + math.log(abs(k))
        - 0.5 * half_pow * math.log(2)
    )
    phase = cmath.exp(1j * cfg.theta * s) * _I_POWERS[phase_index % 4] * (1 if k > 0 else -1)
    return Amplitude(phase * math.exp(log_mag), exact)


def _zero_exact() -> ExactAmplitude:
    return ExactAmplitude(Fraction(0), Fraction(0), Fraction(1), 0)


def probability_oracle(cfg: InterferometerConfig, out: OutcomeRecord) -> float:
    """``|C|**2``; exact rational arithmetic at theta = pi/2 for N <= 30."""
    amp = amplitude(cfg, out)
    if amp.exact is not None and cfg.total <= EXACT_TIER_MAX_N:
        return float(amp.exact.probability())
    return abs(amp.value) ** 2


def exact_probability(cfg: InterferometerConfig, out: OutcomeRecord) -> Fraction:
    """Exact ``|C|**2`` as a rational; theta only enters as a global phase."""
    s, t = _side_counts(cfg, out)
    if s < 0 or t < 0 or s + t != out.M:
        return Fraction(0)
    k = kravchuk_sum(out.m1, out.m2, s)
    num = math.factorial(cfg.n_alpha) * math.factorial(cfg.n_beta) * k * k
    den = (
        math.factorial(out.m1)
        * math.factorial(out.m2)
        * math.factorial(out.m_alpha)
        * math.factorial(out.m_beta)
        * 2 ** (cfg.total + out.M)
    )
    return Fraction(num, den)


# -- dense polynomial route --------------------------------------------------


def _times_linear(poly: np.ndarray, va: complex, vb: complex) -> np.ndarray:
    """Multiply a polynomial in (a_alpha, a_beta) by ``va a_alpha + vb a_beta``."""
    out = np.zeros_like(poly)
    out[1:, :] += va * poly[:-1, :]
    out[:, 1:] += vb * poly[:, :-1]
    return out


def _check_brute_force_size(cfg: InterferometerConfig) -> None:
    if cfg.total > BRUTE_FORCE_MAX_N:
        raise CapExceededError(
            f"brute-force expansion limited to N <= {BRUTE_FORCE_MAX_N}, got N={cfg.total}"
        )


def _normalise(cfg: InterferometerConfig, out: OutcomeRecord, coeff: complex) -> Amplitude:
    """Apply <0|a_alpha^p a_beta^q|Na Nb> = delta delta sqrt(Na! Nb!) and normalise."""
    norm = math.sqrt(
        math.factorial(cfg.n_alpha)
        * math.factorial(cfg.n_beta)
        / (
            math.factorial(out.m1)
            * math.factorial(out.m2)
            * math.factorial(out.m_alpha)
            * math.factorial(out.m_beta)
        )
    )
    return Amplitude(complex(coeff) * norm)


def _project(cfg: InterferometerConfig, out: OutcomeRecord, poly: np.ndarray) -> Amplitude:
    return _normalise(cfg, out, poly[cfg.n_alpha, cfg.n_beta])


def brute_force_amplitude(cfg: InterferometerConfig, out: OutcomeRecord) -> Amplitude:
    _check_brute_force_size(cfg)
    out.check_against(cfg.source)
    modes = standard_mode_expansion(cfg)
    size = cfg.total + 1
    poly = np.zeros((size, size), dtype=complex)
    poly[0, 0] = 1.0
    counts = (out.m_alpha, out.m_beta, out.m1, out.m2)
    for detector, count in zip((3, 4, 1, 2), counts):
        va, vb = modes.row(detector)
        for _ in range(count):
            poly = _times_linear(poly, va, vb)
    return _project(cfg, out, poly)


def brute_force_table(cfg: InterferometerConfig) -> dict[OutcomeRecord, Amplitude]:
    """Brute-force amplitudes for every outcome, sharing partial products.

    The operators commute, so ``a1^m1 a2^m2`` is built incrementally and
    only the projected coefficient of its product with the side-detector
    factors is formed per outcome.
    """
    _check_brute_force_size(cfg)
    modes = standard_mode_expansion(cfg)
    N = cfg.total
    size = N + 1
    a1, a2, a3, a4 = (modes.row(d) for d in (1, 2, 3, 4))
    side_cache: dict[tuple[int, int], np.ndarray] = {}

    def side(ma: int, mb: int) -> np.ndarray:
        key = (ma, mb)
        if key not in side_cache:
            if mb > 0:
                poly = _times_linear(side(ma, mb - 1), *a4)
            elif ma > 0:
                poly = _times_linear(side(ma - 1, 0), *a3)
            else:
                poly = np.zeros((size, size), dtype=complex)
                poly[0, 0] = 1.0
            side_cache[key] = poly
        return side_cache[key]

    table: dict[OutcomeRecord, Amplitude] = {}
    arm1 = np.zeros((size, size), dtype=complex)
    arm1[0, 0] = 1.0
    for m1 in range(N + 1):
        arm = arm1
        for m2 in range(N - m1 + 1):
            rest = N - m1 - m2
            for ma in range(rest + 1):
                out = OutcomeRecord(m1, m2, ma, rest - ma)
                coeff = _product_coefficient(arm, side(ma, rest - ma), cfg.n_alpha, cfg.n_beta)
                table[out] = _normalise(cfg, out, coeff)
            arm = _times_linear(arm, *a2)
        arm1 = _times_linear(arm1, *a1)
    return table


def _product_coefficient(f: np.ndarray, g: np.ndarray, p: int, q: int) -> complex:
    """Coefficient of ``a_alpha^p a_beta^q`` in the product of two dense polynomials."""
    return complex(np.sum(f[: p + 1, : q + 1] * g[p::-1, q::-1]))


def oracle_table(cfg: InterferometerConfig) -> dict[OutcomeRecord, float]:
    return {out: probability_oracle(cfg, out) for out in iter_outcomes(cfg.total)}
