"""Patch distances and the temperature-controlled relaxation of block matching."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image_core import DimensionError, ParameterError

EPS_D = 1e-12


@dataclass(frozen=True)
class CandidateSet:
    """A reference patch and M candidate patches with their positions.

    ``candidates`` has shape ``(M, k, k)``; ``positions`` is ``(M, 2)`` integer
    (row, col) and need not be distinct for distance evaluation, only for
    meaningful tie-breaking.
    """

    ref_patch: np.ndarray
    candidates: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        ref = np.asarray(self.ref_patch, dtype=np.float64)
        cands = np.asarray(self.candidates, dtype=np.float64)
        pos = np.asarray(self.positions, dtype=np.int64).reshape(-1, 2)
        if cands.ndim != ref.ndim + 1 or cands.shape[1:] != ref.shape:
            raise DimensionError(
                f"candidate patches {cands.shape[1:]} do not match reference patch {ref.shape}"
            )
        if len(cands) < 1:
            raise DimensionError("at least one candidate is required")
        if len(pos) != len(cands):
            raise DimensionError("one position per candidate is required")
        object.__setattr__(self, "ref_patch", ref)
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "positions", pos)

    @property
    def k(self) -> int:
        return self.ref_patch.shape[0]

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class SoftMatch:
    distances: np.ndarray
    weights: np.ndarray
    temperature: float
    blended_patch: np.ndarray
    expected_offset: np.ndarray


def mean_abs_diffs(ref_patch: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    d = np.subtract(candidates, ref_patch, dtype=np.float64)
    np.abs(d, out=d)
    return d.reshape(len(d), -1).mean(axis=1)


def nma_from_mad(mad: np.ndarray, eps_d: float = EPS_D) -> np.ndarray:
    mad = np.asarray(mad, dtype=np.float64)
    return mad / np.sqrt(np.sum(mad**2) + eps_d**2)


def nma_distances(cs: CandidateSet, eps_d: float = EPS_D) -> np.ndarray:
    """Normalized mean-absolute distance of every candidate to the reference.

    Each candidate's mean absolute difference is divided by the root sum of
    squares of all candidates' mean absolute differences, so the distances of
    one query depend on the whole candidate set.
    """
    return nma_from_mad(mean_abs_diffs(cs.ref_patch, cs.candidates), eps_d)


def _check_temperature(T: float) -> None:
    if not T > 0:
        raise ParameterError(f"temperature must be positive, got {T}")


def soft_weights(distances: np.ndarray, T: float) -> np.ndarray:
    _check_temperature(T)
    z = -np.asarray(distances, dtype=np.float64) / T
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def soft_weights_jacobian(distances: np.ndarray, T: float) -> np.ndarray:
    """``J[i, j] = d w_i / d d_j = -w_i (delta_ij - w_j) / T``."""
    w = soft_weights(distances, T)
    J = np.outer(w, w) / T
    np.fill_diagonal(J, 0.0)
    # diagonal from the off-diagonal row sum keeps rows summing to zero
    np.fill_diagonal(J, -J.sum(axis=1))
    return J


def hard_argmin(
    distances: np.ndarray,
    positions: np.ndarray | None = None,
    center: np.ndarray | None = None,
) -> int:
    """Index of the smallest distance.

    Exact ties go to the candidate nearest ``center`` (squared offset), then to
    the earliest one in raster order.
    """
    d = np.asarray(distances, dtype=np.float64)
    tied = np.flatnonzero(d == d.min())
    if len(tied) == 1 or positions is None:
        return int(tied[0])
    pos = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    c = np.zeros(2, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64)
    mag = np.sum((pos[tied] - c) ** 2, axis=1)
    rows, cols = pos[tied, 0], pos[tied, 1]
    best = np.lexsort((cols, rows, mag))[0]
    return int(tied[best])


def soft_match(cs: CandidateSet, T: float, eps_d: float = EPS_D) -> SoftMatch:
    d = nma_distances(cs, eps_d)
    w = soft_weights(d, T)
    blended = np.tensordot(w, cs.candidates, axes=1)
    expected = w @ cs.positions.astype(np.float64)
    return SoftMatch(d, w, float(T), blended, expected)
