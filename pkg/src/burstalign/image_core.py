"""Bayer CFA handling, noisy-burst synthesis and the simple ISP operator.

Images are plain float64 numpy arrays: RGB images are ``(H, W, 3)`` linear-light
arrays in [0, 1], single-channel grids are ``(H, W)``. A :class:`BayerFrame`
pairs a mosaic with its CFA pattern.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import convolve

PATTERNS = ("RGGB", "BGGR", "GRBG", "GBRG")

_CHANNEL_INDEX = {"R": 0, "G": 1, "B": 2}

# "Low" and "High" noise levels as (shot scale, read std)
NOISE_PRESETS = {
    "low": (2.5e-3, 1e-2),
    "high": (6.4e-3, 2e-2),
}
# uniform sampling ranges used for randomized bursts
SIGMA_S_RANGE = (1e-4, 1e-2)
SIGMA_R_RANGE = (1e-3, 10 ** -1.5)

GAMMA = 1 / 2.2


class DimensionError(ValueError):
    pass


class ParameterError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def check_pattern(pattern: str) -> str:
    pattern = pattern.upper()
    if pattern not in PATTERNS:
        raise ParameterError(f"unknown Bayer pattern {pattern!r}; expected one of {PATTERNS}")
    return pattern


def cfa_channels(pattern: str, shape: tuple[int, int]) -> np.ndarray:
    """Integer map of which RGB channel (0, 1, 2) each mosaic site records."""
    pattern = check_pattern(pattern)
    quad = np.array([_CHANNEL_INDEX[c] for c in pattern]).reshape(2, 2)
    h, w = shape
    rows = np.arange(h)[:, None] % 2
    cols = np.arange(w)[None, :] % 2
    return quad[rows, cols]


def cfa_masks(pattern: str, shape: tuple[int, int]) -> np.ndarray:
    """Boolean ``(3, H, W)`` masks, one per RGB channel."""
    ch = cfa_channels(pattern, shape)
    return np.stack([ch == c for c in range(3)])


@dataclass(frozen=True)
class BayerFrame:
    data: np.ndarray
    pattern: str = "RGGB"

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise DimensionError(f"BayerFrame needs a 2-D grid, got shape {data.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "pattern", check_pattern(self.pattern))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "BayerFrame":
        return BayerFrame(data, self.pattern)


@dataclass(frozen=True)
class NoiseParams:
    sigma_s: float
    sigma_r: float

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_r < 0:
            raise ParameterError(f"noise scales must be nonnegative, got {self}")

    @classmethod
    def preset(cls, name: str) -> "NoiseParams":
        try:
            return cls(*NOISE_PRESETS[name.lower()])
        except KeyError:
            raise ParameterError(f"unknown noise preset {name!r}") from None

    @classmethod
    def sample(cls, rng: np.random.Generator) -> "NoiseParams":
        return cls(rng.uniform(*SIGMA_S_RANGE), rng.uniform(*SIGMA_R_RANGE))


@dataclass(frozen=True)
class Burst:
    frames: tuple[BayerFrame, ...]
    variance_maps: tuple[np.ndarray, ...]
    ref_index: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        vmaps = tuple(_frozen(v) for v in self.variance_maps)
        if len(frames) < 2:
            raise DimensionError("a burst needs at least two frames")
        if len(vmaps) != len(frames):
            raise DimensionError("one variance map per frame is required")
        shape, pattern = frames[0].shape, frames[0].pattern
        for f, v in zip(frames, vmaps):
            if f.shape != shape or f.pattern != pattern:
                raise DimensionError("all frames must share dimensions and CFA pattern")
            if v.shape != shape:
                raise DimensionError("variance map shape differs from frame shape")
            if np.any(v < 0):
                raise ParameterError("variance maps must be nonnegative")
        if not 0 <= self.ref_index < len(frames):
            raise ParameterError(f"ref_index {self.ref_index} out of range for {len(frames)} frames")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "variance_maps", vmaps)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def reference(self) -> BayerFrame:
        return self.frames[self.ref_index]

    @property
    def pattern(self) -> str:
        return self.frames[0].pattern

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape


def check_rgb(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionError(f"RGB image must be (H, W, 3), got {rgb.shape}")
    h, w = rgb.shape[:2]
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise DimensionError(f"RGB dimensions must be even and >= 2, got {h}x{w}")
    return rgb


def mosaic(rgb: np.ndarray, pattern: str = "RGGB") -> BayerFrame:
    """Keep, at each site, the channel the CFA pattern records there."""
    rgb = check_rgb(rgb)
    ch = cfa_channels(pattern, rgb.shape[:2])
    data = np.take_along_axis(rgb, ch[..., None], axis=2)[..., 0]
    return BayerFrame(data, pattern)


_K_GREEN = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64) / 4
_K_RED_BLUE = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64) / 4


def demosaic_bilinear(bayer: BayerFrame) -> np.ndarray:
    """Bilinear demosaic; known samples pass through unchanged.

    Borders are mirrored without repeating the edge sample, which keeps the
    CFA phase of the padded samples consistent.
    """
    masks = cfa_masks(bayer.pattern, bayer.shape)
    out = np.empty(bayer.shape + (3,))
    for c, kernel in enumerate((_K_RED_BLUE, _K_GREEN, _K_RED_BLUE)):
        out[..., c] = convolve(bayer.data * masks[c], kernel, mode="mirror")
    return out


def add_noise(clean: BayerFrame, noise: NoiseParams, seed: int) -> BayerFrame:
    """Heteroscedastic gaussian noise with variance ``sigma_s * x + sigma_r**2``.

    The result is not clipped.
    """
    x = clean.data
    if np.any(x < 0):
        raise ParameterError("clean samples must be nonnegative")
    if noise.sigma_s == 0 and noise.sigma_r == 0:
        return clean
    rng = np.random.default_rng(seed)
    std = np.sqrt(noise.sigma_s * x + noise.sigma_r**2)
    return clean.with_data(x + std * rng.standard_normal(x.shape))


def variance_map(noisy: BayerFrame | np.ndarray, noise: NoiseParams) -> np.ndarray:
    y = noisy.data if isinstance(noisy, BayerFrame) else np.asarray(noisy, dtype=np.float64)
    return noise.sigma_s * np.maximum(y, 0.0) + noise.sigma_r**2


def downsample_quarter(frame: np.ndarray) -> np.ndarray:
    """Mean of each 4x4 block."""
    frame = np.asarray(frame, dtype=np.float64)
    h, w = frame.shape
    if h % 4 or w % 4:
        raise DimensionError(f"dimensions must be divisible by 4, got {h}x{w}")
    return frame.reshape(h // 4, 4, w // 4, 4).mean(axis=(1, 3))


def pad_to_multiple(frame: np.ndarray, m: int) -> np.ndarray:
    h, w = frame.shape[:2]
    ph, pw = -h % m, -w % m
    if not ph and not pw:
        return frame
    pad = [(0, ph), (0, pw)] + [(0, 0)] * (frame.ndim - 2)
    return np.pad(frame, pad, mode="reflect")


def isp_gamma(
    x: np.ndarray,
    wb_gains: Sequence[float] = (1.0, 1.0, 1.0),
    ccm: np.ndarray | None = None,
) -> np.ndarray:
    """White balance, colour correction, clip, then ``v ** (1/2.2)``."""
    gains = np.asarray(wb_gains, dtype=np.float64)
    if gains.shape != (3,) or np.any(gains <= 0):
        raise ParameterError("white-balance gains must be three positive scalars")
    ccm = np.eye(3) if ccm is None else np.asarray(ccm, dtype=np.float64)
    if ccm.shape != (3, 3) or not np.allclose(ccm.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ParameterError("colour correction matrix must be 3x3 with rows summing to 1")
    v = np.asarray(x, dtype=np.float64) * gains
    v = v @ ccm.T
    return np.clip(v, 0.0, 1.0) ** GAMMA


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Map arbitrary integer indices into ``[0, n)`` by mirroring about the
    edge samples (``-1 -> 1``), which preserves index parity."""
    idx = np.asarray(idx)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return np.where(m >= n, period - m, m)


def gather(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """``out[y, x] = image[y + flow[y, x, 0], x + flow[y, x, 1]]`` with mirrored borders."""
    h, w = image.shape[:2]
    flow = np.asarray(flow)
    rows = reflect_index(np.arange(h)[:, None] + flow[..., 0].astype(np.int64), h)
    cols = reflect_index(np.arange(w)[None, :] + flow[..., 1].astype(np.int64), w)
    return image[rows, cols]


def shift_image(image: np.ndarray, shift) -> np.ndarray:
    """Translate content by ``shift`` = (dy, dx): ``out[y, x] = image[y - dy, x - dx]``."""
    h, w = image.shape[:2]
    flow = np.broadcast_to(-np.asarray(shift, dtype=np.int64), (h, w, 2))
    return gather(image, flow)
