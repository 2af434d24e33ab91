"""Integral representations of the detection statistics.

The joint probability is a double integral over a "quantum angle" Lambda
(half-difference of two phase variables) and a "classical" angle lambda
(their half-sum, offset by pi/2 - theta):

    P = Na! Nb! / (m1! m2! ma! mb! 2^N)
        * <<cos(d Lambda) [cos Lambda + cos lambda]^m1 [cos Lambda - cos lambda]^m2>>

with ``d = Na - ma - Nb + mb`` and ``<<.>>`` the average over the torus.
The integrand is a trigonometric polynomial of degree at most ``2N`` in
Lambda and ``M`` in lambda, so the periodic trapezoid rule on ``2N + 3``
equispaced nodes is exact up to rounding. Integrand values are carried as
``(sign, log|.|)`` because they alternate in sign and grow like ``2^M``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .combinatorics import (
    log_factorial_table,
    signed_log_power,
    signed_logsumexp,
)
from .model import DEFAULT_THETA, InterferometerConfig, OutcomeRecord

PEAK = "peak"
DEPRESSION = "depression"


@dataclass(frozen=True)
class RCurvePoint:
    phi: float
    value: complex
    reduced: float


@dataclass(frozen=True)
class FLandscapePoint:
    lambda_q: float
    lambda_c: float
    value: float


@dataclass(frozen=True)
class PeakLocation:
    phi0: float

    @property
    def pair(self) -> tuple[float, float]:
        return (-self.phi0, self.phi0)


@dataclass(frozen=True)
class Extremum:
    lambda_q: float
    lambda_c: float
    kind: str


def min_nodes(N: int) -> int:
    return 2 * N + 3


def periodic_nodes(n: int) -> np.ndarray:
    """n equispaced nodes on [-pi, pi)."""
    return -math.pi + 2 * math.pi * np.arange(n) / n


# -- R(phi) and its peaks ---------------------------------------------------


def eval_R(m1: int, m2: int, theta: float, phi):
    """``(e^{i theta} + i e^{i phi})^m1 (i e^{i theta} + e^{i phi})^m2``."""
    e_t = cmath.exp(1j * theta)
    e_p = np.exp(1j * np.asarray(phi, dtype=float))
    value = (e_t + 1j * e_p) ** m1 * (1j * e_t + e_p) ** m2
    return complex(value) if np.ndim(value) == 0 else value


def reduced_R(m1: int, m2: int, phi):
    """``R(phi) (2 i e^{i phi/2})^{-M}`` at theta = pi/2: cos^m1(phi/2) sin^m2(phi/2)."""
    half = np.asarray(phi, dtype=float) / 2
    value = np.cos(half) ** m1 * np.sin(half) ** m2
    return float(value) if np.ndim(value) == 0 else value


def r_curve(m1: int, m2: int, n_points: int = 2001, theta: float = DEFAULT_THETA) -> list[RCurvePoint]:
    phis = np.linspace(-math.pi, math.pi, n_points)
    values = eval_R(m1, m2, theta, phis)
    reduced = reduced_R(m1, m2, phis)
    return [RCurvePoint(float(p), complex(v), float(r)) for p, v, r in zip(phis, values, reduced)]


def peak_location(m1: int, m2: int) -> PeakLocation:
    if m1 + m2 <= 0:
        raise ValueError("peak location needs at least one interferometer count")
    if m1 == 0:
        return PeakLocation(math.pi)
    return PeakLocation(2 * math.atan(math.sqrt(m2 / m1)))


# -- F(Lambda, lambda) -------------------------------------------------------


def eval_F(m1: int, m2: int, lambda_q, lambda_c):
    """``[cos L + cos l]^m1 [cos L - cos l]^m2``; may be negative."""
    cq = np.cos(np.asarray(lambda_q, dtype=float))
    cc = np.cos(np.asarray(lambda_c, dtype=float))
    value = (cq + cc) ** m1 * (cq - cc) ** m2
    return float(value) if np.ndim(value) == 0 else value


def log_F(m1: int, m2: int, lambda_q, lambda_c) -> tuple[np.ndarray, np.ndarray]:
    """Signed-log form of :func:`eval_F`, safe for large exponents."""
    cq = np.cos(np.asarray(lambda_q, dtype=float))
    cc = np.cos(np.asarray(lambda_c, dtype=float))
    s1, l1 = signed_log_power(cq + cc, m1)
    s2, l2 = signed_log_power(cq - cc, m2)
    return s1 * s2, l1 + l2


def f_surface(m1: int, m2: int, grid_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """F on a closed ``grid_size``-square mesh over [-pi, pi]^2 (Lambda along axis 0)."""
    axis = np.linspace(-math.pi, math.pi, grid_size)
    L, l = np.meshgrid(axis, axis, indexing="ij")
    return axis, axis, eval_F(m1, m2, L, l)


def find_extrema(m1: int, m2: int) -> list[Extremum]:
    """The eight analytic extrema of F, classified by the sign of F there.

    Lambda = 0 and +-pi rows carry the phase-diagonal peaks; the lambda = 0
    and lambda = +-pi rows carry the off-diagonal ones, which turn negative
    (depressions) when the corresponding power is odd.
    """
    if m1 <= 0 or m2 <= 0:
        raise ValueError(f"degenerate extremum set for m1={m1}, m2={m2}: both counts must be > 0")
    a = 2 * math.atan(math.sqrt(m2 / m1))
    b = 2 * math.atan(math.sqrt(m1 / m2))
    points = [
        (0.0, a), (0.0, -a),
        (math.pi, b), (math.pi, -b),
        (a, 0.0), (-a, 0.0),
        (b, math.pi), (-b, math.pi),
    ]
    found = []
    for lq, lc in points:
        sign, _ = log_F(m1, m2, lq, lc)
        found.append(Extremum(lq, lc, PEAK if sign > 0 else DEPRESSION))
    return found


# -- the probability integral -----------------------------------------------


def _log_prefactor(cfg: InterferometerConfig, counts: Sequence[int]) -> float:
    table = log_factorial_table(max(cfg.total, *counts))
    m1, m2, ma, mb = counts
    # grouped in commuting pairs so mirrored outcomes round identically
    return float(
        (table[cfg.n_alpha] + table[cfg.n_beta]) - (table[m1] + table[m2])
        - (table[ma] + table[mb]) - cfg.total * math.log(2)
    )


def lambda_profile(
    m1: int,
    m2: int,
    theta: float = DEFAULT_THETA,
    n_nodes: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Average of F over lambda at each Lambda node.

    The lambda nodes are the half-sum nodes shifted by ``pi/2 - theta``.
    Returns ``(Lambda nodes, sign, log|mean|)``.
    """
    n = n_nodes or min_nodes(m1 + m2)
    nodes = periodic_nodes(n)
    lam_c = math.pi / 2 - theta + nodes
    signs, logs = log_F(m1, m2, nodes[:, None], lam_c[None, :])
    s, l = signed_logsumexp(signs, logs, axis=1)
    return nodes, s, l - math.log(n)


def _cosine_transform(
    nodes: np.ndarray, signs: np.ndarray, logs: np.ndarray, freqs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Signed-log ``mean_k cos(d Lambda_k) G_k`` for every frequency d."""
    finite = np.isfinite(logs) & (signs != 0)
    if not finite.any():
        return np.zeros(len(freqs)), np.full(len(freqs), -np.inf)
    shift = logs[finite].max()
    g = np.where(finite, signs * np.exp(np.where(finite, logs - shift, 0.0)), 0.0)
    # row-wise pairwise sums, not BLAS: identical rounding for +d and -d
    total = np.sum(np.cos(np.outer(freqs, nodes)) * g, axis=1) / len(nodes)
    with np.errstate(divide="ignore"):
        return np.sign(total), np.where(total != 0, shift + np.log(np.abs(total)), -np.inf)


def _from_signed_log(sign: np.ndarray, log_mag: np.ndarray) -> np.ndarray:
    with np.errstate(under="ignore"):
        return np.where(sign != 0, sign * np.exp(np.where(sign != 0, log_mag, 0.0)), 0.0)


def scan_integral(
    cfg: InterferometerConfig,
    m1: int,
    m2: int,
    n_nodes: int = 0,
) -> np.ndarray:
    """probability_integral for every ``m_alpha = 0..N-M`` at fixed (m1, m2).

    One lambda-profile is shared by the whole scan; each side split is a
    single cosine moment of it.
    """
    N, M = cfg.total, m1 + m2
    if M > N:
        raise ValueError(f"M={M} exceeds N={N}")
    n = n_nodes or min_nodes(N)
    nodes, g_sign, g_log = lambda_profile(m1, m2, cfg.theta, n)
    rest = N - M
    m_alpha = np.arange(rest + 1)
    m_beta = rest - m_alpha
    freqs = (cfg.n_alpha - m_alpha - cfg.n_beta + m_beta).astype(float)
    sign, log_int = _cosine_transform(nodes, g_sign, g_log, freqs)
    log_pref, feasible = _scan_prefactor(cfg, m1, m2)
    return np.where(feasible, _from_signed_log(sign, log_int + log_pref), 0.0)


def _scan_prefactor(cfg: InterferometerConfig, m1: int, m2: int) -> tuple[np.ndarray, np.ndarray]:
    """Log prefactor over ``m_alpha = 0..N-M`` and the feasibility mask."""
    N = cfg.total
    table = log_factorial_table(N)
    m_alpha = np.arange(N - m1 - m2 + 1)
    m_beta = N - m1 - m2 - m_alpha
    log_pref = (
        (table[cfg.n_alpha] + table[cfg.n_beta]) - (table[m1] + table[m2])
        - (table.values[m_alpha] + table.values[m_beta]) - N * math.log(2)
    )
    # an arm that would have to supply more particles than its source holds
    feasible = (m_alpha <= cfg.n_alpha) & (m_beta <= cfg.n_beta)
    return log_pref, feasible


def integral_table(
    cfg: InterferometerConfig, n_nodes: int = 0, chunk_elements: int = 1 << 22
) -> dict[tuple[int, int], np.ndarray]:
    """:func:`scan_integral` for every ``(m1, m2)``, batched over the pairs.

    Every pair shares the same node grid, so the lambda profiles and the
    cosine moments at all frequencies ``-N..N`` are computed a block of pairs
    at a time. Intended for complete tables at small and moderate N.
    """
    N = cfg.total
    n = n_nodes or min_nodes(N)
    nodes = periodic_nodes(n)
    cq = np.cos(nodes)[:, None]
    cc = np.cos(math.pi / 2 - cfg.theta + nodes)[None, :]
    with np.errstate(divide="ignore"):
        sa, la = np.sign(cq + cc), np.log(np.abs(cq + cc))
        sb, lb = np.sign(cq - cc), np.log(np.abs(cq - cc))
    pairs = [(m1, m2) for m1 in range(N + 1) for m2 in range(N - m1 + 1)]
    freqs = np.arange(-N, N + 1, dtype=float)
    cosines = np.cos(np.outer(freqs, nodes))
    block = max(1, chunk_elements // (n * max(n, len(freqs))))
    out: dict[tuple[int, int], np.ndarray] = {}
    for start in range(0, len(pairs), block):
        chunk = np.array(pairs[start : start + block])
        e1 = chunk[:, 0, None, None]
        e2 = chunk[:, 1, None, None]
        sign = _power_sign(sa, e1) * _power_sign(sb, e2)
        with np.errstate(invalid="ignore"):
            log = np.where(e1 > 0, e1 * la, 0.0) + np.where(e2 > 0, e2 * lb, 0.0)
        g_sign, g_log = signed_logsumexp(sign, log, axis=2)
        finite = np.isfinite(g_log) & (g_sign != 0)
        shift = np.where(finite, g_log, -np.inf).max(axis=1, keepdims=True)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        g = np.where(finite, g_sign * np.exp(np.where(finite, g_log - shift, 0.0)), 0.0)
        moments = np.sum(cosines[None, :, :] * g[:, None, :], axis=2) / n
        for (m1, m2), row, sh in zip(chunk.tolist(), moments, shift[:, 0]):
            rest = N - m1 - m2
            d = cfg.n_alpha - cfg.n_beta + rest - 2 * np.arange(rest + 1)
            total = row[np.clip(d, -N, N) + N]  # out-of-range d is infeasible
            with np.errstate(divide="ignore"):
                log_int = np.where(total != 0, sh + np.log(np.abs(total)), -np.inf)
            log_pref, feasible = _scan_prefactor(cfg, m1, m2)
            out[(m1, m2)] = np.where(
                feasible, _from_signed_log(np.sign(total), log_int + log_pref - math.log(n)), 0.0
            )
    return out


def _power_sign(sign: np.ndarray, exponent: np.ndarray) -> np.ndarray:
    """Sign of ``x ** e`` from the sign of x, with ``0 ** 0 == 1``."""
    return np.where(exponent == 0, 1.0, np.where(exponent % 2 == 1, sign, np.abs(sign)))


def probability_integral(
    cfg: InterferometerConfig, out: OutcomeRecord, n_nodes: int = 0
) -> float:
    """Joint probability from the (Lambda, lambda) double integral."""
    out.check_against(cfg.source)
    if out.m_alpha > cfg.n_alpha or out.m_beta > cfg.n_beta:
        return 0.0
    n = n_nodes or min_nodes(cfg.total)
    nodes, g_sign, g_log = lambda_profile(out.m1, out.m2, cfg.theta, n)
    d = cfg.n_alpha - out.m_alpha - cfg.n_beta + out.m_beta
    sign, log_int = _cosine_transform(nodes, g_sign, g_log, np.array([float(d)]))
    if sign[0] == 0:
        return 0.0
    log_pref = _log_prefactor(cfg, (out.m1, out.m2, out.m_alpha, out.m_beta))
    return float(sign[0] * math.exp(log_int[0] + log_pref))


def probability_phase_pair(
    cfg: InterferometerConfig, out: OutcomeRecord, n_nodes: int = 0
) -> float:
    """Same probability from the untransformed (phi, phi') form.

    ``e^{-i s (phi - phi')} R*(phi') R(phi)`` factorises, so the double
    integral is ``|<e^{-i s phi} R(phi)>|^2`` with ``s = Na - ma``.
    """
    out.check_against(cfg.source)
    # the phase factor reaches frequency N_alpha, so size by N, not M
    n = n_nodes or min_nodes(cfg.total)
    phis = periodic_nodes(n)
    s = cfg.n_alpha - out.m_alpha
    moment = np.mean(np.exp(-1j * s * phis) * eval_R(out.m1, out.m2, cfg.theta, phis))
    if moment == 0:
        return 0.0
    log_pref = _log_prefactor(cfg, (out.m1, out.m2, out.m_alpha, out.m_beta))
    return math.exp(log_pref - out.M * math.log(2) + 2 * math.log(abs(moment)))


# -- marginal over the side detectors ----------------------------------------


def marginal_p12_collapsed(
    cfg: InterferometerConfig, m1: int, m2: int, n_nodes: int = 0
) -> float:
    """P(m1, m2) with the side counts summed analytically.

    Summing the side splits turns the Lambda cosine into
    ``cos((Na - Nb) Lambda) (2 cos Lambda)^{N - M} / (N - M)!``.
    """
    N, M = cfg.total, m1 + m2
    if M > N:
        raise ValueError(f"M={M} exceeds N={N}")
    n = n_nodes or min_nodes(N)
    nodes, g_sign, g_log = lambda_profile(m1, m2, cfg.theta, n)
    c_sign, c_log = signed_log_power(np.cos(nodes), N - M)
    sign, log_int = _cosine_transform(
        nodes, g_sign * c_sign, g_log + c_log, np.array([float(cfg.n_alpha - cfg.n_beta)])
    )
    if sign[0] == 0:
        return 0.0
    table = log_factorial_table(N)
    log_pref = (
        table[cfg.n_alpha] + table[cfg.n_beta] - table[m1] - table[m2] - table[N - M]
        - M * math.log(2)
    )
    return float(sign[0] * math.exp(log_int[0] + log_pref))


def marginal_p12_direct(cfg: InterferometerConfig, m1: int, m2: int, n_nodes: int = 0) -> float:
    return float(np.sum(scan_integral(cfg, m1, m2, n_nodes)))


def marginal_p12(
    cfg: InterferometerConfig, m1: int, m2: int, method: str = "collapsed", n_nodes: int = 0
) -> float:
    if method == "collapsed":
        return marginal_p12_collapsed(cfg, m1, m2, n_nodes)
    if method == "direct":
        return marginal_p12_direct(cfg, m1, m2, n_nodes)
    raise ValueError(f"unknown marginal method {method!r}")


def total_probability(cfg: InterferometerConfig) -> float:
    """Sum of probability_integral over every outcome; 1 for a normalised law."""
    N = cfg.total
    return math.fsum(
        float(s) for m1 in range(N + 1) for m2 in range(N - m1 + 1)
        for s in scan_integral(cfg, m1, m2)
    )


# -- sharp-peak approximation ------------------------------------------------


def qualitative_probability(out: OutcomeRecord, phi0: Optional[float] = None) -> float:
    """Unnormalised ``1 + (-1)^m2 cos((ma - mb) phi0)`` for equal sources."""
    if phi0 is None:
        phi0 = peak_location(out.m1, out.m2).phi0
    parity = -1 if out.m2 % 2 else 1
    return 1 + parity * math.cos((out.m_alpha - out.m_beta) * phi0)
