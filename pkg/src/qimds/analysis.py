"""Population-oscillation scans, contrast, parity and loss robustness."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.signal import savgol_filter

from .combinatorics import exact_binomial
from .model import InterferometerConfig, OutcomeRecord
from .quadrature import qualitative_probability, scan_integral

DIP = "dip"
PEAK = "peak"
FLAT = "flat"

DEFAULT_WINDOW = 5


@dataclass(frozen=True)
class ScanResult:
    m1: int
    m2: int
    probabilities: np.ndarray
    normalized: bool
    contrast: float
    central_feature: str
    total: float

    @property
    def m_alpha(self) -> np.ndarray:
        return np.arange(len(self.probabilities))


@dataclass(frozen=True)
class LossModel:
    lost: int
    channel: str = "side-detectors"

    def __post_init__(self):
        if self.lost < 0:
            raise ValueError(f"lost particle count must be nonnegative, got {self.lost}")


def central_feature(values: Sequence[float]) -> str:
    """Strict three-point test at the symmetric centre of a scan.

    With an odd number of side particles the centre falls between two
    entries; the pair is compared against its outer neighbours instead.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 3:
        return FLAT
    if n % 2:
        c = n // 2
        lo, hi, left, right = v[c], v[c], v[c - 1], v[c + 1]
    else:
        if n < 4:
            return FLAT
        c = n // 2
        lo, hi = min(v[c - 1], v[c]), max(v[c - 1], v[c])
        left, right = v[c - 2], v[c + 1]
    if hi < left and hi < right:
        return DIP
    if lo > left and lo > right:
        return PEAK
    return FLAT


def fringe_contrast(values: Sequence[float], window: int = DEFAULT_WINDOW) -> float:
    """Oscillation strength of a scan after removing its smooth envelope.

    The envelope is a local-quadratic moving average over ``window`` points,
    which follows the curvature of a binomial envelope instead of leaving it in
    the residual. Returns ``(max r - min r) / (max p + min p)`` for residual r.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    p = np.asarray(values, dtype=float)
    scale = p.max(initial=0.0) + p.min(initial=0.0)
    if len(p) < window or scale <= 0 or p.max() == p.min():
        return 0.0
    residual = p - savgol_filter(p, window, 2, mode="interp")
    return float((residual.max() - residual.min()) / scale)


def _scan_result(m1, m2, probs, normalized, window) -> ScanResult:
    total = float(math.fsum(probs))
    if normalized and total > 0:
        probs = probs / total
    return ScanResult(
        m1=m1,
        m2=m2,
        probabilities=probs,
        normalized=normalized,
        contrast=fringe_contrast(probs, window) if len(probs) >= window else 0.0,
        central_feature=central_feature(probs),
        total=total,
    )


def population_scan(
    cfg: InterferometerConfig,
    m1: int,
    m2: int,
    normalized: bool = False,
    window: int = DEFAULT_WINDOW,
) -> ScanResult:
    """Joint probability versus m_alpha at fixed interferometer counts."""
    return _scan_result(m1, m2, scan_integral(cfg, m1, m2), normalized, window)


def hypergeometric_loss_matrix(side_total: int, lost: int) -> np.ndarray:
    """W[observed m_alpha, true m_alpha] when ``lost`` of the side particles go
    undetected, every subset of that size being equally likely."""
    kept = side_total - lost
    W = np.zeros((kept + 1, side_total + 1))
    denom = exact_binomial(side_total, kept)
    for true_a in range(side_total + 1):
        true_b = side_total - true_a
        for obs_a in range(max(0, kept - true_b), min(true_a, kept) + 1):
            W[obs_a, true_a] = (
                exact_binomial(true_a, obs_a) * exact_binomial(true_b, kept - obs_a) / denom
            )
    return W


def loss_scan(
    cfg: InterferometerConfig,
    m1: int,
    m2: int,
    loss: LossModel,
    normalized: bool = False,
    window: int = DEFAULT_WINDOW,
) -> ScanResult:
    """Scan of the observed side counts when L side particles are missed."""
    side_total = cfg.total - m1 - m2
    if loss.lost > side_total:
        raise ValueError(f"cannot lose {loss.lost} of {side_total} side particles")
    full = scan_integral(cfg, m1, m2)
    observed = hypergeometric_loss_matrix(side_total, loss.lost) @ full
    return _scan_result(m1, m2, observed, normalized, window)


def map_ordered(fn: Callable, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ParityRow:
    m1: int
    m2: int
    central_feature: str
    predicted: str


def parity_table(
    cfg: InterferometerConfig, M: int, stride: int = 1, threads: int = 1
) -> list[ParityRow]:
    """Central feature of the scan for m1 = 0, stride, 2*stride, ... <= M."""
    if M > cfg.total:
        raise ValueError(f"M={M} exceeds N={cfg.total}")
    rest = cfg.total - M

    def row(m1: int) -> ParityRow:
        m2 = M - m1
        measured = population_scan(cfg, m1, m2).central_feature
        centre = OutcomeRecord(m1, m2, rest // 2, rest - rest // 2)
        q = qualitative_probability(centre) if M > 0 else 1.0
        predicted = DIP if q < 1 else PEAK
        return ParityRow(m1, m2, measured, predicted)

    return map_ordered(row, range(0, M + 1, stride), threads)


@dataclass(frozen=True)
class LossSweepRow:
    m1: int
    m2: int
    central_feature: str
    contrast: float


def loss_sweep(
    cfg: InterferometerConfig,
    M: int,
    lost: int,
    threads: int = 1,
    m1_values: Optional[Iterable[int]] = None,
) -> list[LossSweepRow]:
    """Classify the central feature of every loss scan with m1 + m2 = M."""
    model = LossModel(lost)

    def row(m1: int) -> LossSweepRow:
        scan = loss_scan(cfg, m1, M - m1, model)
        return LossSweepRow(m1, M - m1, scan.central_feature, scan.contrast)

    values = range(M + 1) if m1_values is None else m1_values
    return map_ordered(row, values, threads)


def surviving_dips(rows: Iterable[LossSweepRow]) -> list[tuple[int, int]]:
    return [(r.m1, r.m2) for r in rows if r.central_feature == DIP]


def sign_changes(values: Sequence[float]) -> int:
    """Number of sign flips, ignoring exact zeros."""
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
