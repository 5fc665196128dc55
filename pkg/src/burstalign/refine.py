"""Dense pixel-level refinement after coarse alignment.

A small-radius integer search per pixel on the green plane of the demosaiced
frames, scored by windowed sum of absolute differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .dpbm import ConfigError, snap_even
from .image_core import BayerFrame, demosaic_bilinear, gather, reflect_index

WINDOW_RADIUS = 8
EPS_VAR = 1e-12


@dataclass(frozen=True)
class FlowField:
    """Per-pixel (dy, dx) displacements and an alignment confidence in [0, 1]."""

    flow: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        flow = np.asarray(self.flow, dtype=np.float64)
        conf = np.asarray(self.confidence, dtype=np.float64)
        if flow.ndim != 3 or flow.shape[2] != 2 or conf.shape != flow.shape[:2]:
            raise ValueError(f"flow {flow.shape} and confidence {conf.shape} do not agree")
        if not np.all(np.isfinite(flow)):
            raise ValueError("flow must be finite")
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "confidence", conf)

    @classmethod
    def identity(cls, shape: tuple[int, int]) -> "FlowField":
        return cls(np.zeros(tuple(shape) + (2,)), np.ones(shape))

    @property
    def shape(self) -> tuple[int, int]:
        return self.confidence.shape


def luma_plane(frame: BayerFrame) -> np.ndarray:
    return demosaic_bilinear(frame)[..., 1]


def _shifted(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    h, w = image.shape
    rows = reflect_index(np.arange(h) + dy, h)
    cols = reflect_index(np.arange(w) + dx, w)
    return image[np.ix_(rows, cols)]


def search_offsets(radius: int) -> list[tuple[int, int]]:
    """All offsets within ``radius``, nearest to zero first, then raster order."""
    r = range(-radius, radius + 1)
    return sorted(((dy, dx) for dy in r for dx in r), key=lambda d: (d[0] ** 2 + d[1] ** 2, d))


def dense_refine(
    aligned: BayerFrame,
    ref: BayerFrame,
    var_ref: np.ndarray,
    D_s: int = 2,
    window: int = WINDOW_RADIUS,
) -> FlowField:
    """Per-pixel integer flow within ``D_s`` that best matches ``aligned`` to ``ref``.

    The flow is snapped to even values so it can be applied to CFA data.
    Confidence decays with the windowed mean squared residual in excess of
    what the noise variance alone would produce.
    """
    if not 1 <= D_s <= 4:
        raise ConfigError(f"refine radius must be in [1, 4], got {D_s}")
    size = 2 * window + 1
    lr, lt = luma_plane(ref), luma_plane(aligned)

    best_cost = np.full(lr.shape, np.inf)
    best = np.zeros(lr.shape + (2,), dtype=np.int64)
    for dy, dx in search_offsets(D_s):
        cost = uniform_filter(np.abs(_shifted(lt, dy, dx) - lr), size, mode="mirror")
        better = cost < best_cost
        best_cost[better] = cost[better]
        best[better] = (dy, dx)

    flow = snap_even(best)
    resid = uniform_filter((gather(lt, flow) - lr) ** 2, size, mode="mirror")
    var = uniform_filter(np.asarray(var_ref, dtype=np.float64), size, mode="mirror")
    excess = np.maximum(resid - 2 * var, 0.0)
    confidence = np.exp(-excess / (2 * var + EPS_VAR))
    return FlowField(flow.astype(np.float64), confidence)


def warp(frame, flow: FlowField | np.ndarray):
    """Integer gather with mirrored borders; accepts a BayerFrame or a plain grid."""
    f = flow.flow if isinstance(flow, FlowField) else flow
    f = np.rint(f).astype(np.int64)
    if isinstance(frame, BayerFrame):
        return frame.with_data(gather(frame.data, f))
    return gather(np.asarray(frame), f)
