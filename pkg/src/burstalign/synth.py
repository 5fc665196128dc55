"""Synthetic scenes and noisy raw bursts with controlled translations."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .image_core import (
    Burst,
    NoiseParams,
    add_noise,
    check_rgb,
    mosaic,
    reflect_index,
    variance_map,
)

SCENE_SCALES = (1.0, 2.0, 4.0, 8.0, 16.0)


def make_scene(shape: tuple[int, int], seed: int = 0, lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    """Multi-scale gaussian texture in linear RGB with correlated channels."""
    rng = np.random.default_rng(seed)
    h, w = shape

    def field():
        n = rng.standard_normal((h, w))
        f = sum(s * gaussian_filter(n, s, mode="wrap") for s in SCENE_SCALES)
        return (f - f.mean()) / f.std()

    lum = field()
    rgb = np.stack([lum + 0.35 * field() for _ in range(3)], axis=-1)
    rgb = (rgb - rgb.min()) / (rgb.max() - rgb.min())
    return lo + (hi - lo) * rgb


def linear_shifts(n: int, ref_index: int, velocity) -> np.ndarray:
    """Per-frame displacement ``(t - ref) * velocity``, shape ``(n, 2)``."""
    t = np.arange(n) - ref_index
    return t[:, None] * np.asarray(velocity, dtype=np.int64)[None, :]


def translate_crop(scene: np.ndarray, size: tuple[int, int], shift) -> np.ndarray:
    """Centred ``size`` window of ``scene`` with content moved by ``shift`` (dy, dx).

    Samples beyond the scene are mirrored.
    """
    sh, sw = scene.shape[:2]
    h, w = size
    y0, x0 = (sh - h) // 2, (sw - w) // 2
    dy, dx = (int(v) for v in shift)
    rows = reflect_index(y0 + np.arange(h) - dy, sh)
    cols = reflect_index(x0 + np.arange(w) - dx, sw)
    return scene[np.ix_(rows, cols)]


def frame_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence((seed, t)).generate_state(1)[0])


def synthesize_burst(
    scene: np.ndarray,
    n: int,
    noise: NoiseParams,
    seed: int = 0,
    size: tuple[int, int] | None = None,
    shifts=None,
    ref_index: int | None = None,
    pattern: str = "RGGB",
) -> tuple[Burst, np.ndarray]:
    """Noisy raw burst and the clean RGB ground truth of the reference frame.

    ``shifts[t]`` is the displacement of frame ``t``'s content relative to the
    scene; the reference frame is not re-centred.
    """
    scene = np.asarray(scene, dtype=np.float64)
    size = tuple(size or scene.shape[:2])
    ref_index = n // 2 if ref_index is None else ref_index
    shifts = np.zeros((n, 2), dtype=np.int64) if shifts is None else np.asarray(shifts, dtype=np.int64)
    if shifts.shape != (n, 2):
        raise ValueError(f"need one (dy, dx) shift per frame, got shape {shifts.shape}")

    clean = [check_rgb(translate_crop(scene, size, s)) for s in shifts]
    frames, vmaps = [], []
    for t, rgb in enumerate(clean):
        noisy = add_noise(mosaic(rgb, pattern), noise, frame_seed(seed, t))
        frames.append(noisy)
        vmaps.append(variance_map(noisy, noise))
    meta = {
        "sigma_s": noise.sigma_s,
        "sigma_r": noise.sigma_r,
        "seed": seed,
        "shifts": (shifts - shifts[ref_index]).tolist(),
    }
    burst = Burst(tuple(frames), tuple(vmaps), ref_index, meta)
    return burst, clean[ref_index]
