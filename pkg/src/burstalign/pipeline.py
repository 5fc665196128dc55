"""Two-stage alignment and restoration of a raw burst."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dpbm import OffsetGrid, SearchConfig, align_burst_coarse, apply_offsets, grid_shape_for, rescale_offsets
from .fusion import reconstruct, robust_merge
from .image_core import Burst, downsample_quarter, pad_to_multiple
from .refine import FlowField, dense_refine, warp


@dataclass
class AlignmentResult:
    coarse: list[OffsetGrid]  # quarter scale
    full: list[OffsetGrid]  # full resolution
    flows: list[FlowField]
    coarse_aligned: Burst
    aligned: Burst


def lowres_frames(burst: Burst) -> list[np.ndarray]:
    return [downsample_quarter(pad_to_multiple(f.data, 4)) for f in burst.frames]


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def refine_stage(burst: Burst, D_s: int = 2, threads: int = 1) -> tuple[list[FlowField], Burst]:
    ref, r = burst.reference, burst.ref_index
    var_ref = burst.variance_maps[r]

    def one(t):
        if t == r:
            return FlowField.identity(burst.shape)
        return dense_refine(burst.frames[t], ref, var_ref, D_s)

    flows = _map(one, range(len(burst)), threads)
    frames = tuple(warp(f, fl) for f, fl in zip(burst.frames, flows))
    vmaps = tuple(warp(v, fl) for v, fl in zip(burst.variance_maps, flows))
    return flows, Burst(frames, vmaps, r, dict(burst.meta))


def two_stage_align(burst: Burst, cfg: SearchConfig = SearchConfig(), D_s: int = 2, threads: int = 1) -> AlignmentResult:
    coarse = align_burst_coarse(lowres_frames(burst), cfg, burst.ref_index, threads)
    full = [rescale_offsets(g) for g in coarse]
    coarse_aligned = apply_offsets(burst, full)
    flows, aligned = refine_stage(coarse_aligned, D_s, threads)
    return AlignmentResult(coarse, full, flows, coarse_aligned, aligned)


def refine_only_align(burst: Burst, D_s: int = 2, patch_k: int = 16, threads: int = 1) -> AlignmentResult:
    """Baseline without the coarse stage: zero patch offsets, then refinement."""
    lr_shape = lowres_frames(burst)[0].shape
    coarse = [OffsetGrid.zeros(grid_shape_for(lr_shape, patch_k), patch_k) for _ in burst.frames]
    full = [rescale_offsets(g) for g in coarse]
    flows, aligned = refine_stage(burst, D_s, threads)
    return AlignmentResult(coarse, full, flows, burst, aligned)


def fuse(result: AlignmentResult) -> np.ndarray:
    return reconstruct(robust_merge(result.aligned, result.flows))


def restore(burst: Burst, cfg: SearchConfig = SearchConfig(), D_s: int = 2, threads: int = 1, two_stage: bool = True) -> np.ndarray:
    if two_stage:
        result = two_stage_align(burst, cfg, D_s, threads)
    else:
        result = refine_only_align(burst, D_s, cfg.patch_k, threads)
    return fuse(result)


def single_frame_baseline(burst: Burst) -> np.ndarray:
    return reconstruct(burst.reference)
