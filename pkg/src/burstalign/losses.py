"""Training-loss terms as plain functions, with analytic gradients.

Norms are reduced by means so that values do not scale with image size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image_core import DimensionError, isp_gamma

T_START = 1e-2
T_END = 1e-3
BM_LOSS_ITERATIONS = 200_000


@dataclass(frozen=True)
class LossWeights:
    beta: float = 1.0  # interpolation loss
    rho: float = 1e5  # one-hot penalty
    eta: float = 1e3  # clean-guided distance loss
    epsilon: float = 1e-3  # Charbonnier constant

    def __post_init__(self):
        if min(self.beta, self.rho, self.eta) < 0 or not self.epsilon > 0:
            raise ValueError(f"invalid loss weights {self}")


@dataclass(frozen=True)
class LossParts:
    l_r: float
    l_ip: float = 0.0
    l_one_hot: float = 0.0
    l_bm: float = 0.0


def mean_square(w: np.ndarray) -> float:
    """``sum(w**2) / M``; equals ``1/M`` exactly for a one-hot vector."""
    w = np.asarray(w, dtype=np.float64)
    return float(np.sum(w**2) / w.size)


def l_one_hot(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=np.float64)
    return abs(float(w.sum()) - 1.0) + abs(mean_square(w) - 1.0 / w.size)


def l_one_hot_grad(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    m = w.size
    return np.sign(w.sum() - 1.0) + np.sign(mean_square(w) - 1.0 / m) * 2.0 * w / m


def l_bm(d_noisy: np.ndarray, d_clean: np.ndarray) -> float:
    d_noisy, d_clean = np.asarray(d_noisy, float), np.asarray(d_clean, float)
    if d_noisy.shape != d_clean.shape:
        raise DimensionError(f"distance vectors differ in shape: {d_noisy.shape} vs {d_clean.shape}")
    return float(np.sum((d_noisy - d_clean) ** 2))


def l_bm_grad(d_noisy: np.ndarray, d_clean: np.ndarray) -> np.ndarray:
    """Gradient with respect to ``d_noisy``."""
    return 2.0 * (np.asarray(d_noisy, float) - np.asarray(d_clean, float))


def _check_same(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def charbonnier_map(a, b, eps: float = 1e-3) -> np.ndarray:
    a, b = _check_same(a, b)
    return np.sqrt((a - b) ** 2 + eps**2)


def charbonnier(a, b, eps: float = 1e-3) -> float:
    return float(charbonnier_map(a, b, eps).mean())


def charbonnier_grad(a, b, eps: float = 1e-3) -> np.ndarray:
    """Gradient with respect to ``a``."""
    a, b = _check_same(a, b)
    r = a - b
    return r / np.sqrt(r**2 + eps**2) / r.size


def high_freq_mask(x: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Pixels whose luma gradient magnitude exceeds ``threshold``.

    The default threshold is the 75th percentile of the image's own gradient
    magnitudes.
    """
    x = np.asarray(x, dtype=np.float64)
    luma = x @ np.array([0.2126, 0.7152, 0.0722])
    gy, gx = np.gradient(luma)
    mag = np.hypot(gy, gx)
    if threshold is None:
        threshold = float(np.percentile(mag, 75))
    return mag > threshold


def l_ip(x_interp: np.ndarray, x: np.ndarray, m_h: np.ndarray, eps: float = 1e-3) -> float:
    """Charbonnier penalty averaged over the masked pixels (all channels)."""
    pen = charbonnier_map(x_interp, x, eps)
    m_h = np.asarray(m_h, dtype=bool)
    if m_h.shape != pen.shape[:2]:
        raise DimensionError(f"mask shape {m_h.shape} does not match image {pen.shape[:2]}")
    if not m_h.any():
        return 0.0
    return float(pen[m_h].mean())


def l_r(x_hat: np.ndarray, x: np.ndarray, wb_gains=(1.0, 1.0, 1.0), ccm=None, eps: float = 1e-3) -> float:
    return charbonnier(x_hat, x, eps) + charbonnier(
        isp_gamma(x_hat, wb_gains, ccm), isp_gamma(x, wb_gains, ccm), eps
    )


def total_loss(parts: LossParts, weights: LossWeights = LossWeights(), use_bm: bool = True) -> float:
    total = parts.l_r + weights.beta * parts.l_ip + weights.rho * parts.l_one_hot
    if use_bm:
        total += weights.eta * parts.l_bm
    return total


def bm_loss_enabled(iteration: int, until: int = BM_LOSS_ITERATIONS) -> bool:
    return iteration < until


def temperature_at(iteration: int, total: int, t_start: float = T_START, t_end: float = T_END) -> float:
    """Log-linear decay from ``t_start`` to ``t_end`` over ``total`` iterations."""
    if iteration <= 0:
        return t_start
    if iteration >= total:
        return t_end
    frac = iteration / total
    return 10 ** ((1 - frac) * math.log10(t_start) + frac * math.log10(t_end))
