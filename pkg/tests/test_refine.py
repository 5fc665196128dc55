import numpy as np
import pytest

from burstalign.dpbm import ConfigError
from burstalign.image_core import BayerFrame, NoiseParams, add_noise, gather, mosaic, shift_image, variance_map
from burstalign.refine import FlowField, dense_refine, search_offsets, warp
from burstalign.synth import make_scene


def frame(seed=0, size=64):
    return mosaic(make_scene((size, size), seed))


def test_self_match():
    f = frame()
    ff = dense_refine(f, f, np.full(f.shape, 1e-4))
    np.testing.assert_array_equal(ff.flow, 0)
    np.testing.assert_allclose(ff.confidence, 1.0)


@pytest.mark.parametrize("shift", [(2, 0), (0, -2), (-2, 2)])
def test_residual_shift_recovered_in_interior(shift):
    ref = frame(1)
    moved = ref.with_data(shift_image(ref.data, shift))
    ff = dense_refine(moved, ref, np.full(ref.shape, 1e-4), D_s=2)
    inner = ff.flow[12:-12, 12:-12]
    np.testing.assert_array_equal(inner[..., 0], shift[0])
    np.testing.assert_array_equal(inner[..., 1], shift[1])
    np.testing.assert_array_equal(warp(moved, ff).data[12:-12, 12:-12], ref.data[12:-12, 12:-12])


def test_flat_frames_zero_flow():
    f = BayerFrame(np.full((32, 32), 0.3))
    ff = dense_refine(f, f, np.full(f.shape, 1e-4))
    np.testing.assert_array_equal(ff.flow, 0)


def test_noise_does_not_collapse_confidence():
    clean = frame(2)
    noise = NoiseParams.preset("high")
    a, b = add_noise(clean, noise, 1), add_noise(clean, noise, 2)
    ff = dense_refine(b, a, variance_map(a, noise))
    assert np.median(ff.confidence) > 0.9


def test_misaligned_content_has_low_confidence():
    ref, other = frame(3), frame(4)
    ff = dense_refine(other, ref, np.full(ref.shape, 1e-4))
    assert np.median(ff.confidence) < 0.1


@pytest.mark.parametrize("ds", [0, 5])
def test_radius_bounds(ds):
    f = frame()
    with pytest.raises(ConfigError):
        dense_refine(f, f, np.zeros(f.shape), D_s=ds)


def test_flow_is_even():
    ref = frame(5)
    moved = ref.with_data(shift_image(ref.data, (1, -1)))
    ff = dense_refine(moved, ref, np.full(ref.shape, 1e-4), D_s=3)
    assert np.all(ff.flow % 2 == 0)


def test_search_offsets_order():
    offs = search_offsets(2)
    assert len(offs) == 25 and offs[0] == (0, 0)
    mags = [dy * dy + dx * dx for dy, dx in offs]
    assert mags == sorted(mags)


def test_warp_examples():
    rng = np.random.default_rng(6)
    f = BayerFrame(rng.random((10, 12)))
    np.testing.assert_array_equal(warp(f, FlowField.identity(f.shape)).data, f.data)
    flow = np.zeros((10, 12, 2))
    flow[..., 0] = -2
    out = warp(f, FlowField(flow, np.ones((10, 12)))).data
    np.testing.assert_array_equal(out[2:], f.data[:-2])
    np.testing.assert_array_equal(out[:2], f.data[2:0:-1])
    snapped = 2 * rng.integers(-2, 3, size=(10, 12, 2))
    out = warp(f.data, snapped.astype(float))
    np.testing.assert_array_equal(out, gather(f.data, snapped))


def test_flow_field_validation():
    with pytest.raises(ValueError):
        FlowField(np.zeros((4, 4, 2)), np.ones((4, 5)))
    with pytest.raises(ValueError):
        FlowField(np.full((2, 2, 2), np.nan), np.ones((2, 2)))
