"""What survives symmetry breaking: the phase-state prediction and phase emergence.

A phase state ``|chi, N>`` sends every particle independently into the
same single-particle mode, so its detection law is multinomial and the side
counts are an unmodulated binomial. Averaging over ``chi`` gives the
statistical-mixture prediction, the Lambda = 0 slice of the full integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .combinatorics import log_factorial_table, signed_log_power, signed_logsumexp
from .model import (
    DEFAULT_THETA,
    InterferometerConfig,
    OutcomeRecord,
    SourceConfig,
    normalize_angle,
    standard_mode_expansion,
)
from .quadrature import log_F, min_nodes, periodic_nodes

DEFAULT_GRID = 512


@dataclass(frozen=True)
class SsbConfig:
    chi: float
    source: SourceConfig
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        object.__setattr__(self, "chi", normalize_angle(self.chi))
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def interferometer(self) -> InterferometerConfig:
        return InterferometerConfig(self.source, self.theta)


def detector_probabilities(theta: float, chi) -> np.ndarray:
    """Single-particle detection probabilities (p1, p2, p3, p4) for the mode
    ``(a_alpha^dag + e^{i chi} a_beta^dag)/sqrt 2``; shape (4, *chi.shape)."""
    modes = standard_mode_expansion(InterferometerConfig(SourceConfig(0, 0), theta))
    e = np.exp(1j * np.asarray(chi, dtype=float))
    amps = [(va + vb * e) / math.sqrt(2) for va, vb in modes.coefficients]
    return np.array([np.abs(a) ** 2 for a in amps])


def _log_ssb(theta: float, chi, N: int, out: OutcomeRecord) -> tuple[np.ndarray, np.ndarray]:
    """Signed-log multinomial law of a phase state, vectorised over chi."""
    table = log_factorial_table(N)
    p = detector_probabilities(theta, chi)
    counts = (out.m1, out.m2, out.m_alpha, out.m_beta)
    log_coef = table[N] - sum(table[c] for c in counts)
    sign = np.ones(np.shape(p[0]))
    log = np.full(np.shape(p[0]), log_coef)
    for pi, c in zip(p, counts):
        s, l = signed_log_power(pi, c)
        sign, log = sign * s, log + l
    return sign, log


def ssb_probability(cfg: SsbConfig, out: OutcomeRecord) -> float:
    out.check_against(cfg.source)
    sign, log = _log_ssb(cfg.theta, cfg.chi, cfg.source.total(), out)
    return float(sign * math.exp(log)) if sign != 0 else 0.0


def ssb_phase_averaged(cfg: InterferometerConfig, out: OutcomeRecord, n_nodes: int = 0) -> float:
    """Phase-state law averaged uniformly over chi.

    The chi dependence is a trigonometric polynomial of degree M, so the
    trapezoid rule on ``2N + 3`` nodes is exact.
    """
    out.check_against(cfg.source)
    n = n_nodes or min_nodes(cfg.total)
    chis = periodic_nodes(n)
    signs, logs = _log_ssb(cfg.theta, chis, cfg.total, out)
    s, l = signed_logsumexp(signs, logs)
    return float(s * math.exp(l - math.log(n))) if s != 0 else 0.0


def ssb_scan(cfg: InterferometerConfig, m1: int, m2: int, chi=None) -> np.ndarray:
    """Side-count scan at fixed (m1, m2); phase-averaged when ``chi`` is None."""
    rest = cfg.total - m1 - m2
    outs = [OutcomeRecord(m1, m2, a, rest - a) for a in range(rest + 1)]
    if chi is None:
        return np.array([ssb_phase_averaged(cfg, o) for o in outs])
    ssb = SsbConfig(chi, cfg.source, cfg.theta)
    return np.array([ssb_probability(ssb, o) for o in outs])


def diagonal_scan(cfg: InterferometerConfig, m1: int, m2: int, n_nodes: int = 0) -> np.ndarray:
    """The double integral with the quantum angle pinned to Lambda = 0.

    Only the phase-diagonal part survives, so the side-count dependence is the
    bare ``1 / (ma! mb!)`` prefactor. Not normalised.
    """
    N = cfg.total
    rest = N - m1 - m2
    n = n_nodes or min_nodes(N)
    lam_c = math.pi / 2 - cfg.theta + periodic_nodes(n)
    signs, logs = log_F(m1, m2, 0.0, lam_c)
    s, l = signed_logsumexp(signs, logs)
    table = log_factorial_table(N)
    a = np.arange(rest + 1)
    log_pref = (
        table[cfg.n_alpha] + table[cfg.n_beta] - table[m1] - table[m2]
        - table.values[a] - table.values[rest - a] - N * math.log(2)
    )
    if s == 0:
        return np.zeros(rest + 1)
    return s * np.exp(log_pref + l - math.log(n))


# -- phase emergence --------------------------------------------------------


@dataclass(frozen=True)
class EmergencePosteriorState:
    grid: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    history: tuple[float, ...] = ()

    @classmethod
    def uniform(cls, grid_size: int = DEFAULT_GRID) -> "EmergencePosteriorState":
        grid = -math.pi + 2 * math.pi * (np.arange(grid_size) + 1) / grid_size  # (-pi, pi]
        return cls(grid, np.full(grid_size, 1.0 / grid_size))

    @property
    def resultant(self) -> complex:
        return complex(np.sum(self.weights * np.exp(1j * self.grid)))

    def circular_mean(self) -> float:
        return math.atan2(self.resultant.imag, self.resultant.real)

    def circular_std(self) -> float:
        return circular_std(abs(self.resultant))


def circular_std(resultant_length: float) -> float:
    """``sqrt(-2 ln R)``; infinite for a vanishing resultant."""
    if resultant_length <= 1e-12:
        return math.inf
    return math.sqrt(-2 * math.log(min(resultant_length, 1.0)))


def emergence_step(state: EmergencePosteriorState, rng: np.random.Generator):
    """Draw the next position and condition the phase posterior on it.

    The predictive density ``sum_g w_g (1 + cos(x + lambda_g)) / 2pi`` equals
    ``(1 + A cos(x + psi)) / 2pi`` with ``A e^{i psi}`` the weighted resultant,
    so it is sampled exactly by rejection against the uniform law.
    """
    r = state.resultant
    amp, psi = abs(r), math.atan2(r.imag, r.real)
    while True:
        x, u = rng.uniform(-math.pi, math.pi), rng.uniform()
        if 2 * u <= 1 + amp * math.cos(x + psi):
            break
    weights = state.weights * (1 + np.cos(x + state.grid))
    weights = weights / weights.sum()
    return replace(state, weights=weights, history=state.history + (x,)), x


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def emergence_run(M: int, G: int = DEFAULT_GRID, seed: int = 0):
    """Sequentially sample M positions; return (posterior, positions, width trace).

    The width trace has M + 1 entries, starting with the (infinite) width of
    the uniform prior.
    """
    if M < 0:
        raise ValueError(f"M must be nonnegative, got {M}")
    if G < 64:
        raise ValueError(f"posterior grid needs at least 64 points, got {G}")
    rng = make_rng(seed)
    state = EmergencePosteriorState.uniform(G)
    widths = [state.circular_std()]
    positions = []
    for _ in range(M):
        state, x = emergence_step(state, rng)
        positions.append(x)
        widths.append(state.circular_std())
    return state, positions, widths


def rayleigh_test(angles) -> tuple[float, float]:
    """Rayleigh test for uniformity on the circle; returns (Z, p-value)."""
    angles = np.asarray(angles, dtype=float)
    n = len(angles)
    R = abs(np.sum(np.exp(1j * angles)))
    Z = R**2 / n
    # Zar's approximation, accurate for n >= 10
    p = math.exp(math.sqrt(1 + 4 * n + 4 * (n**2 - R**2)) - (1 + 2 * n))
    return Z, min(p, 1.0)
