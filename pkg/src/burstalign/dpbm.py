"""Progressive block matching on quarter-scale frames.

Each reference patch is searched in two phases: a strided lattice over the
full search range, then a stride-1 window around the lattice winner. Search
centres are propagated outward from the reference frame so that motion which
accumulates over the burst stays reachable.

Offsets are (dy, dx) integer pairs; a patch at top-left ``p`` in the reference
is matched by the patch at ``p + offset`` in the target.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image_core import Burst, DimensionError, gather, reflect_index
from .matching import CandidateSet, SoftMatch, hard_argmin, mean_abs_diffs, nma_from_mad, soft_match


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    patch_k: int = 16
    dp_cmax: int = 16
    stride_s: int = 4
    temperature: float = 1e-2
    mode: str = "hard"

    def validate(self, lr_shape: tuple[int, int] | None = None) -> "SearchConfig":
        if self.stride_s < 2:
            raise ConfigError(f"stride_s must be >= 2, got {self.stride_s}")
        if self.dp_cmax < self.stride_s:
            raise ConfigError(f"dp_cmax ({self.dp_cmax}) must be >= stride_s ({self.stride_s})")
        if self.patch_k < 4:
            raise ConfigError(f"patch_k must be >= 4, got {self.patch_k}")
        if self.mode not in ("hard", "soft"):
            raise ConfigError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if lr_shape is not None and 2 * self.dp_cmax > min(lr_shape):
            raise ConfigError(
                f"dp_cmax ({self.dp_cmax}) exceeds half the smallest frame dimension {min(lr_shape)}"
            )
        return self


@dataclass(frozen=True)
class OffsetGrid:
    """Per-patch (dy, dx) offsets for one target frame.

    ``patch`` is the tile side at the grid's own scale.
    """

    offsets: np.ndarray
    patch: int
    at_boundary: np.ndarray | None = None
    evaluations: int = field(default=0, compare=False)

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.int64)
        if off.ndim != 3 or off.shape[2] != 2:
            raise DimensionError(f"offset grid must be (rows, cols, 2), got {off.shape}")
        object.__setattr__(self, "offsets", off)

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.offsets.shape[:2]

    @classmethod
    def zeros(cls, grid_shape: tuple[int, int], patch: int) -> "OffsetGrid":
        return cls(np.zeros(tuple(grid_shape) + (2,), dtype=np.int64), patch)

    def to_flow(self, shape: tuple[int, int]) -> np.ndarray:
        """Dense per-pixel offsets over a frame of ``shape``."""
        flow = np.repeat(np.repeat(self.offsets, self.patch, axis=0), self.patch, axis=1)
        return flow[: shape[0], : shape[1]]


@dataclass
class SearchResult:
    offset: np.ndarray
    at_boundary: bool
    evaluations: int
    soft: SoftMatch | None = None
    expected_offset: np.ndarray | None = None


def grid_shape_for(shape: tuple[int, int], k: int) -> tuple[int, int]:
    return (-(-shape[0] // k), -(-shape[1] // k))


def extract_patches(image: np.ndarray, tops: np.ndarray, k: int) -> np.ndarray:
    """Patches of side ``k`` at top-left positions ``tops`` (M, 2), mirrored at borders."""
    h, w = image.shape
    tops = np.asarray(tops, dtype=np.int64).reshape(-1, 2)
    if tops.min() >= 0 and tops[:, 0].max() <= h - k and tops[:, 1].max() <= w - k:
        return sliding_window_view(image, (k, k))[tops[:, 0], tops[:, 1]]
    ar = np.arange(k)
    rows = reflect_index(tops[:, 0, None] + ar, h)
    cols = reflect_index(tops[:, 1, None] + ar, w)
    return image[rows[:, :, None], cols[:, None, :]]


def lattice_offsets(dp_cmax: int, s: int) -> np.ndarray:
    """1-D strided lattice of ``2*dp_cmax // s + 1`` points spanning ``[-dp_cmax, dp_cmax]``."""
    n = 2 * dp_cmax // s + 1
    start = -(((n - 1) * s) // 2)
    return start + s * np.arange(n)


@lru_cache(maxsize=64)
def _square_offsets(lo: int, step: int, n: int) -> np.ndarray:
    """All (dy, dx) pairs on ``lo + step * i`` for ``i < n``, raster order."""
    a = lo + step * np.arange(n)
    yy, xx = np.meshgrid(a, a, indexing="ij")
    out = np.stack([yy.ravel(), xx.ravel()], axis=1)
    out.flags.writeable = False
    return out


def _distances(ref_patch, tgt, tops, k):
    return nma_from_mad(mean_abs_diffs(ref_patch, extract_patches(tgt, tops, k)))


def candidate_count(cfg: SearchConfig) -> int:
    """Distance evaluations performed by one progressive search."""
    n1 = 2 * cfg.dp_cmax // cfg.stride_s + 1
    return n1 * n1 + (2 * cfg.stride_s - 1) ** 2


def progressive_search(
    ref_lr: np.ndarray,
    tgt_lr: np.ndarray,
    p,
    center_shift,
    cfg: SearchConfig,
) -> SearchResult:
    """Two-phase search for the patch whose top-left corner is ``p``.

    The phase-2 window is moved inward when needed so that it never leaves
    the search range; its candidate count is constant. ``at_boundary`` is set
    when the match lies on the edge of the search range.
    """
    k, dp, s = cfg.patch_k, cfg.dp_cmax, cfg.stride_s
    h, w = tgt_lr.shape
    p = np.asarray(p, dtype=np.int64)
    ref_patch = extract_patches(ref_lr, p, k)[0]
    center = np.clip(p + np.asarray(center_shift, dtype=np.int64), 0, [h - 1, w - 1])

    lat = lattice_offsets(dp, s)
    cand1 = center + _square_offsets(int(lat[0]), s, len(lat))
    b = cand1[hard_argmin(_distances(ref_patch, tgt_lr, cand1, k), cand1, center)]

    b = np.clip(b, center - dp + (s - 1), center + dp - (s - 1))
    cand2 = b + _square_offsets(-(s - 1), 1, 2 * s - 1)
    patches2 = extract_patches(tgt_lr, cand2, k)

    soft = expected = None
    if cfg.mode == "soft":
        soft = soft_match(CandidateSet(ref_patch, patches2, cand2), cfg.temperature)
        d2 = soft.distances
        expected = soft.expected_offset - p
    else:
        d2 = nma_from_mad(mean_abs_diffs(ref_patch, patches2))
    c = cand2[hard_argmin(d2, cand2, center)]

    return SearchResult(
        offset=c - p,
        at_boundary=bool(np.any(np.abs(c - center) >= dp)),
        evaluations=len(cand1) + len(cand2),
        soft=soft,
        expected_offset=expected,
    )


def exhaustive_search(ref_lr, tgt_lr, p, search_range: int, k: int, center_shift=(0, 0)) -> np.ndarray:
    """Stride-1 brute force over ``(2*search_range + 1)**2`` candidates."""
    h, w = tgt_lr.shape
    p = np.asarray(p, dtype=np.int64)
    center = np.clip(p + np.asarray(center_shift, dtype=np.int64), 0, [h - 1, w - 1])
    ref_patch = extract_patches(ref_lr, p, k)[0]
    n = 2 * search_range + 1
    cands = center + _square_offsets(-search_range, 1, n)
    rows = reflect_index(center[0] - search_range + np.arange(n + k - 1), h)
    cols = reflect_index(center[1] - search_range + np.arange(n + k - 1), w)
    region = tgt_lr[np.ix_(rows, cols)]
    windows = sliding_window_view(region, (k, k)).reshape(n * n, k, k)
    c = cands[hard_argmin(nma_from_mad(mean_abs_diffs(ref_patch, windows)), cands, center)]
    return c - p


def _search_rows(ref_lr, tgt_lr, prev, cfg, rows, gw):
    k = cfg.patch_k
    out = []
    for i in rows:
        for j in range(gw):
            out.append(progressive_search(ref_lr, tgt_lr, (i * k, j * k), prev[i, j], cfg))
    return out


def search_frame(ref_lr, tgt_lr, cfg: SearchConfig, center_shifts=None, threads: int = 1) -> OffsetGrid:
    """Progressive search for every non-overlapping patch of one target frame."""
    gh, gw = grid_shape_for(ref_lr.shape, cfg.patch_k)
    prev = np.zeros((gh, gw, 2), dtype=np.int64) if center_shifts is None else center_shifts
    chunks = [[i] for i in range(gh)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda r: _search_rows(ref_lr, tgt_lr, prev, cfg, r, gw), chunks))
    else:
        parts = [_search_rows(ref_lr, tgt_lr, prev, cfg, r, gw) for r in chunks]
    results = [r for part in parts for r in part]
    offsets = np.array([r.offset for r in results]).reshape(gh, gw, 2)
    boundary = np.array([r.at_boundary for r in results]).reshape(gh, gw)
    return OffsetGrid(offsets, cfg.patch_k, boundary, sum(r.evaluations for r in results))


def align_burst_coarse(
    frames_lr,
    cfg: SearchConfig,
    ref_index: int,
    threads: int = 1,
) -> list[OffsetGrid]:
    """Offsets of every frame relative to the reference, propagating centres.

    Frames are visited outward from the reference in each temporal direction;
    each frame's search is centred on the previous frame's offsets for the
    same patch.
    """
    frames_lr = [np.asarray(f, dtype=np.float64) for f in frames_lr]
    shape = frames_lr[0].shape
    if any(f.shape != shape for f in frames_lr):
        raise DimensionError("all low-resolution frames must share dimensions")
    cfg.validate(shape)
    ref = frames_lr[ref_index]
    gshape = grid_shape_for(shape, cfg.patch_k)
    grids: list[OffsetGrid | None] = [None] * len(frames_lr)
    grids[ref_index] = OffsetGrid.zeros(gshape, cfg.patch_k)
    for step in (1, -1):
        prev = grids[ref_index].offsets
        t = ref_index + step
        while 0 <= t < len(frames_lr):
            grids[t] = search_frame(ref, frames_lr[t], cfg, prev, threads)
            prev = grids[t].offsets
            t += step
    return grids


def rescale_offsets(grid: OffsetGrid, factor: int = 4) -> OffsetGrid:
    return OffsetGrid(grid.offsets * factor, grid.patch * factor, grid.at_boundary, grid.evaluations)


def snap_even(v: np.ndarray) -> np.ndarray:
    """Round integer offsets to the nearest even value, odd values toward zero."""
    v = np.rint(np.asarray(v)).astype(np.int64)
    return v - np.sign(v) * (v % 2)


def apply_offsets(burst: Burst, grids: list[OffsetGrid]) -> Burst:
    """Warp every non-reference frame patch by patch (full-resolution grids).

    Offsets are snapped to even values first so the CFA phase is kept, and the
    variance maps are warped with the same displacement.
    """
    frames, vmaps = list(burst.frames), list(burst.variance_maps)
    for t, grid in enumerate(grids):
        if t == burst.ref_index:
            continue
        flow = snap_even(grid.to_flow(burst.shape))
        frames[t] = frames[t].with_data(gather(frames[t].data, flow))
        vmaps[t] = gather(vmaps[t], flow)
    return Burst(tuple(frames), tuple(vmaps), burst.ref_index, dict(burst.meta))
