import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.ndimage import gaussian_filter

from burstalign.dpbm import (
    ConfigError,
    OffsetGrid,
    SearchConfig,
    align_burst_coarse,
    apply_offsets,
    candidate_count,
    exhaustive_search,
    lattice_offsets,
    progressive_search,
    rescale_offsets,
    search_frame,
    snap_even,
)
from burstalign.image_core import BayerFrame, Burst, shift_image


def texture(shape, seed=0, sigma=2.5):
    return gaussian_filter(np.random.default_rng(seed).standard_normal(shape), sigma, mode="wrap")


def crop_pair(shift, size=64, margin=24, seed=0):
    """Reference crop and a target whose content is moved by ``shift``."""
    big = texture((size + 2 * margin,) * 2, seed)
    dy, dx = shift
    ref = big[margin : margin + size, margin : margin + size]
    tgt = big[margin - dy : margin + size - dy, margin - dx : margin + size - dx]
    return ref, tgt


def test_identical_frames_zero_offset():
    ref = texture((48, 48))
    r = progressive_search(ref, ref, (16, 16), (0, 0), SearchConfig(dp_cmax=8))
    np.testing.assert_array_equal(r.offset, (0, 0))
    assert not r.at_boundary


@pytest.mark.parametrize("s", [2, 4])
def test_known_shift_recovered_and_confirmed_by_oracle(s):
    ref, tgt = crop_pair((5, -3))
    cfg = SearchConfig(patch_k=16, dp_cmax=8, stride_s=s)
    p = (24, 24)
    np.testing.assert_array_equal(exhaustive_search(ref, tgt, p, 8, 16), (5, -3))
    np.testing.assert_array_equal(progressive_search(ref, tgt, p, (0, 0), cfg).offset, (5, -3))


def test_out_of_range_shift_is_flagged():
    ref, tgt = crop_pair((7, 7))
    cfg = SearchConfig(patch_k=16, dp_cmax=4, stride_s=2)
    r = progressive_search(ref, tgt, (24, 24), (0, 0), cfg)
    np.testing.assert_array_equal(r.offset, exhaustive_search(ref, tgt, (24, 24), 4, 16))
    assert np.all(np.abs(r.offset) <= 4)
    assert r.at_boundary


def test_exhaustive_examples():
    ref = texture((48, 48), seed=1)
    np.testing.assert_array_equal(exhaustive_search(ref, ref, (16, 16), 5, 16), (0, 0))
    flat = np.full((48, 48), 0.4)
    np.testing.assert_array_equal(exhaustive_search(flat, flat, (16, 16), 5, 16), (0, 0))
    ref, tgt = crop_pair((-2, 4), seed=2)
    np.testing.assert_array_equal(exhaustive_search(ref, tgt, (16, 16), 5, 16), (-2, 4))


def test_flat_frames_tie_break_to_center():
    flat = np.full((48, 48), 0.2)
    r = progressive_search(flat, flat, (16, 16), (3, -1), SearchConfig(dp_cmax=8))
    np.testing.assert_array_equal(r.offset, (3, -1))


def test_soft_mode_expected_offset_converges():
    ref, tgt = crop_pair((3, 1), seed=3)
    cfg = SearchConfig(patch_k=16, dp_cmax=8, stride_s=4, mode="soft", temperature=1e-4)
    r = progressive_search(ref, tgt, (24, 24), (0, 0), cfg)
    np.testing.assert_array_equal(r.offset, (3, 1))
    assert np.max(np.abs(r.expected_offset - r.offset)) < 0.01


@pytest.mark.parametrize(
    "cfg",
    [SearchConfig(stride_s=1), SearchConfig(dp_cmax=0, stride_s=2), SearchConfig(dp_cmax=3, stride_s=4),
     SearchConfig(mode="fuzzy"), SearchConfig(temperature=0.0), SearchConfig(patch_k=2)],
)
def test_config_errors(cfg):
    with pytest.raises(ConfigError):
        cfg.validate()


def test_config_rejects_range_larger_than_frame():
    with pytest.raises(ConfigError):
        SearchConfig(dp_cmax=16).validate((24, 24))


@pytest.mark.parametrize("dp,s,want", [(4, 2, 34), (2, 2, 18), (16, 4, 81 + 49), (8, 3, 36 + 25)])
def test_candidate_count(dp, s, want):
    cfg = SearchConfig(patch_k=8, dp_cmax=dp, stride_s=s)
    assert candidate_count(cfg) == want
    rng = np.random.default_rng(0)
    r = progressive_search(rng.random((40, 40)), rng.random((40, 40)), (16, 16), (0, 0), cfg)
    assert r.evaluations == want


@given(st.integers(1, 40), st.integers(2, 8))
def test_lattice_within_range(dp, s):
    lat = lattice_offsets(dp, s)
    assert len(lat) == 2 * dp // s + 1
    assert np.all(np.abs(lat) <= dp)
    assert np.all(np.diff(lat) == s)


def test_identical_burst_gives_zero_grids():
    f = texture((64, 64), seed=4)
    grids = align_burst_coarse([f, f, f], SearchConfig(dp_cmax=8), ref_index=1)
    for g in grids:
        np.testing.assert_array_equal(g.offsets, 0)


def _moving_frames(shifts, size=64, seed=5):
    margin = 24
    big = texture((size + 2 * margin,) * 2, seed)
    return [big[margin - dy : margin + size - dy, margin - dx : margin + size - dx] for dy, dx in shifts]


def _interior(grid, shifts, size=64):
    """Patch indices whose match lies inside every frame."""
    k = grid.patch
    lo, hi = np.min(shifts, axis=0), np.max(shifts, axis=0)
    return [
        (i, j)
        for i in range(grid.grid_shape[0])
        for j in range(grid.grid_shape[1])
        if np.all(np.array([i * k, j * k]) + lo >= 0) and np.all(np.array([i * k, j * k]) + hi + k <= size)
    ]


def test_propagation_reaches_beyond_search_range():
    shifts = [(0, 0), (2, 0), (4, 0), (6, 0)]
    cfg = SearchConfig(patch_k=16, dp_cmax=3, stride_s=2)
    grids = align_burst_coarse(_moving_frames(shifts), cfg, ref_index=0)
    cells = _interior(grids[0], shifts)
    assert cells
    for g, s in zip(grids, shifts):
        for i, j in cells:
            np.testing.assert_array_equal(g.offsets[i, j], s)


def test_motion_reversal_within_range_of_propagated_centre():
    shifts = [(0, 0), (3, 2), (1, -1), (3, 0)]
    cfg = SearchConfig(patch_k=16, dp_cmax=4, stride_s=2)
    grids = align_burst_coarse(_moving_frames(shifts, seed=6), cfg, ref_index=0)
    for g, s in zip(grids, shifts):
        for i, j in _interior(g, shifts):
            np.testing.assert_array_equal(g.offsets[i, j], s)


def test_propagation_runs_both_ways_from_reference():
    shifts = [(-6, 0), (-3, 0), (0, 0), (3, 0), (6, 0)]
    cfg = SearchConfig(patch_k=16, dp_cmax=4, stride_s=2)
    grids = align_burst_coarse(_moving_frames(shifts, seed=7), cfg, ref_index=2)
    for g, s in zip(grids, shifts):
        for i, j in _interior(g, shifts):
            np.testing.assert_array_equal(g.offsets[i, j], s)


def test_search_frame_independent_of_threads():
    ref, tgt = crop_pair((5, 2), size=64, seed=8)
    cfg = SearchConfig(patch_k=16, dp_cmax=8)
    a, b = search_frame(ref, tgt, cfg, threads=1), search_frame(ref, tgt, cfg, threads=4)
    np.testing.assert_array_equal(a.offsets, b.offsets)
    np.testing.assert_array_equal(a.at_boundary, b.at_boundary)
    assert a.evaluations == b.evaluations == 16 * candidate_count(cfg)


def test_rescale_offsets():
    g = OffsetGrid(np.array([[[1, -2]]]), 16)
    r = rescale_offsets(g)
    np.testing.assert_array_equal(r.offsets, [[[4, -8]]])
    assert r.patch == 64
    np.testing.assert_array_equal(rescale_offsets(OffsetGrid.zeros((2, 3), 16)).offsets, 0)
    rnd = np.random.default_rng(9).integers(-20, 21, size=(3, 4, 2))
    np.testing.assert_array_equal(rescale_offsets(OffsetGrid(rnd, 8)).offsets, rnd * 4)


def test_snap_even_examples():
    np.testing.assert_array_equal(snap_even(np.array([3, -3, 4, -1, 0, 1])), [2, -2, 4, 0, 0, 0])


@given(st.integers(-1000, 1000))
def test_snap_even_properties(v):
    s = int(snap_even(np.array(v)))
    assert s % 2 == 0 and abs(s - v) <= 1 and abs(s) <= abs(v)


def _burst(frames):
    frames = tuple(BayerFrame(f) for f in frames)
    return Burst(frames, tuple(np.full(f.shape, 1e-4) for f in frames), 0)


def test_apply_offsets_zero_is_identity():
    rng = np.random.default_rng(10)
    b = _burst([rng.random((32, 32)) for _ in range(3)])
    out = apply_offsets(b, [OffsetGrid.zeros((2, 2), 16)] * 3)
    for f, g in zip(b.frames, out.frames):
        np.testing.assert_array_equal(f.data, g.data)


def test_apply_offsets_global_translation():
    ref = np.random.default_rng(11).random((32, 32))
    tgt = shift_image(ref, (4, 4))
    grid = OffsetGrid(np.full((2, 2, 2), 4), 16)
    out = apply_offsets(_burst([ref, tgt]), [OffsetGrid.zeros((2, 2), 16), grid])
    np.testing.assert_array_equal(out.frames[1].data[:-4, :-4], ref[:-4, :-4])


def test_apply_offsets_snaps_odd_offsets():
    ref = np.random.default_rng(12).random((32, 32))
    grid = OffsetGrid(np.tile([3, 0], (2, 2, 1)), 16)
    out = apply_offsets(_burst([ref, ref]), [OffsetGrid.zeros((2, 2), 16), grid])
    np.testing.assert_array_equal(out.frames[1].data[:-2], ref[2:])
