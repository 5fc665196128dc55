"""Central finite-difference checks of the analytic derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import losses
from .matching import soft_weights, soft_weights_jacobian

JACOBIAN_TOL = 1e-5
LOSS_GRAD_TOL = 1e-6


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def numerical_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    """``J[i, j] = d f_i / d x_j`` by central differences."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return numerical_jacobian(f, x.ravel(), h)[0].reshape(x.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest absolute deviation relative to the largest analytic entry."""
    scale = max(float(np.max(np.abs(analytic))), np.finfo(float).tiny)
    return float(np.max(np.abs(analytic - numeric))) / scale


def random_distances(rng: np.random.Generator, T: float) -> np.ndarray:
    """Distances in [0, 1] whose spread is a few temperatures, so that the
    weights are not numerically one-hot."""
    m = int(rng.integers(2, 17))
    base = rng.uniform(0.0, 0.5)
    return base + rng.uniform(0.0, 5.0 * T, size=m)


def check_soft_weights(T: float, samples: int, rng: np.random.Generator) -> CheckResult:
    h = 1e-4 * T
    worst = 0.0
    for _ in range(samples):
        d = random_distances(rng, T)
        J = soft_weights_jacobian(d, T)
        Jn = numerical_jacobian(lambda x: soft_weights(x, T), d, h)
        worst = max(worst, relative_error(J, Jn))
    return CheckResult(f"soft_weights_jacobian T={T:g}", worst, JACOBIAN_TOL, samples)


def check_charbonnier(samples: int, rng: np.random.Generator, eps: float = 1e-3) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        b = rng.random(24)
        a = b + rng.uniform(-0.05, 0.05, size=24)
        g = losses.charbonnier_grad(a, b, eps)
        gn = numerical_gradient(lambda x: losses.charbonnier(x, b, eps), a, 1e-6)
        worst = max(worst, relative_error(g, gn))
    return CheckResult("charbonnier", worst, LOSS_GRAD_TOL, samples)


def check_l_bm(samples: int, rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        m = int(rng.integers(2, 17))
        dn, dc = rng.random(m), rng.random(m)
        g = losses.l_bm_grad(dn, dc)
        gn = numerical_gradient(lambda x: losses.l_bm(x, dc), dn, 1e-6)
        worst = max(worst, relative_error(g, gn))
    return CheckResult("l_bm", worst, LOSS_GRAD_TOL, samples)


def check_l_one_hot(samples: int, rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    h = 1e-6
    done = 0
    while done < samples:
        m = int(rng.integers(2, 17))
        w = rng.dirichlet(np.ones(m)) * rng.uniform(0.5, 1.5)
        # stay clear of the kinks of the absolute values
        if abs(w.sum() - 1) < 1e-3 or abs(losses.mean_square(w) - 1 / m) < 1e-3:
            continue
        g = losses.l_one_hot_grad(w)
        gn = numerical_gradient(losses.l_one_hot, w, h)
        worst = max(worst, relative_error(g, gn))
        done += 1
    return CheckResult("l_one_hot", worst, LOSS_GRAD_TOL, samples)


def run_all(samples: int = 200, seed: int = 0, temperatures=(1e-2, 1e-3)) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [check_soft_weights(T, samples, rng) for T in temperatures]
    results += [check_charbonnier(samples, rng), check_l_bm(samples, rng), check_l_one_hot(samples, rng)]
    return results
