"""Robust per-pixel merging of an aligned burst."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .image_core import BayerFrame, Burst, demosaic_bilinear
from .refine import FlowField

REF_WEIGHT_FLOOR = 0.1
VAR_FLOOR = 1e-10  # keeps noiseless bursts finite


def merge_weights(aligned: Burst, flows: Sequence[FlowField | None] | None = None) -> np.ndarray:
    """Normalized ``(N, H, W)`` weights: confidence over variance.

    The reference frame keeps at least ``REF_WEIGHT_FLOOR`` of the total.
    """
    n = len(aligned)
    conf = np.ones((n,) + aligned.shape)
    if flows is not None:
        for t, fl in enumerate(flows):
            if fl is not None and t != aligned.ref_index:
                conf[t] = fl.confidence
    var = np.stack(aligned.variance_maps)
    w = conf / (np.maximum(var, 0.0) + VAR_FLOOR)

    r = aligned.ref_index
    others = w.sum(axis=0) - w[r]
    floor = REF_WEIGHT_FLOOR / (1 - REF_WEIGHT_FLOOR) * others
    w[r] = np.maximum(w[r], floor)
    return w / w.sum(axis=0)


def robust_merge(aligned: Burst, flows: Sequence[FlowField | None] | None = None) -> BayerFrame:
    w = merge_weights(aligned, flows)
    data = np.stack([f.data for f in aligned.frames])
    return aligned.reference.with_data(np.sum(w * data, axis=0))


def reconstruct(merged: BayerFrame) -> np.ndarray:
    return np.clip(demosaic_bilinear(merged), 0.0, 1.0)
