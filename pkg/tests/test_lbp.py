import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drowsiness import synth
from drowsiness.eigen import EigenError, ModelFormatError
from drowsiness.lbp import (
    BlockCache,
    BlockSpec,
    LbpParams,
    SearchStats,
    block_histograms,
    crop_descriptor,
    descriptor,
    detect_eye_nir,
    dumps_nir,
    lbp_code,
    lbp_image,
    lbp_image_padded,
    loads_nir,
    locate_eye_nir,
    train_nir,
    window_descriptor,
    window_origins,
)

WORKED = np.array([[6, 5, 2], [7, 6, 1], [9, 8, 7]], np.uint8)


def test_worked_example():
    assert lbp_code(WORKED, 1, 1) == 241
    assert lbp_image(WORKED).tolist() == [[241]]


def test_constant_images():
    assert (lbp_image(np.full((10, 10), 77, np.uint8)) == 255).all()
    p = LbpParams(P=12, R=2, interpolate=True)
    assert (lbp_image(np.full((9, 9), 5, np.uint8), p) == 2**12 - 1).all()


@pytest.mark.parametrize("p", [LbpParams(), LbpParams(8, 1, True), LbpParams(16, 2, True), LbpParams(8, 2.5, False)])
def test_output_size(p, rng):
    img = rng.integers(0, 256, (20, 30), dtype=np.uint8)
    b = p.border
    assert lbp_image(img, p).shape == (20 - 2 * b, 30 - 2 * b)
    assert lbp_image_padded(img, p).shape == (20, 30)


def test_code_and_image_agree(rng):
    img = rng.integers(0, 256, (9, 11), dtype=np.uint8)
    for p in (LbpParams(), LbpParams(8, 1.5, True)):
        codes = lbp_image(img, p)
        b = p.border
        for y in range(b, 9 - b):
            for x in range(b, 11 - b):
                assert lbp_code(img, x, y, p) == codes[y - b, x - b]
    with pytest.raises(IndexError):
        lbp_code(img, 0, 0)


@settings(max_examples=60)
@given(
    arrays(np.uint8, st.tuples(st.integers(3, 16), st.integers(3, 16)), elements=st.integers(0, 200)),
    st.integers(-50, 55),
    st.sampled_from([LbpParams(), LbpParams(8, 1, True), LbpParams(12, 1.5, True)]),
)
def test_shift_invariance(img, c, p):
    shifted = img.astype(int) + c
    if shifted.min() < 0 or shifted.max() > 255 or min(img.shape) <= 2 * p.border:
        return
    assert np.array_equal(lbp_image(shifted.astype(np.uint8), p), lbp_image(img, p))


def test_block_histograms():
    spec = BlockSpec()
    uniform = np.full((40, 50), 200, np.uint8)
    grid = block_histograms(uniform, spec)
    assert grid.shape == (10, 10, 16)
    assert (grid[..., 200 // 16] == 20).all() and grid.sum() == 2000
    assert descriptor(uniform).size == 1600


def test_block_counts_always_sum_to_block_area(rng):
    grid = block_histograms(rng.integers(0, 256, (70, 200)))
    assert (grid.sum(axis=2) == 20).all()


def test_window_descriptor_layout(rng):
    codes = lbp_image_padded(rng.integers(0, 256, (70, 200), dtype=np.uint8))
    grid = block_histograms(codes)
    d = window_descriptor(grid, (0, 0))
    assert np.array_equal(d[:16], grid[0, 0])
    with pytest.raises(ValueError):
        window_descriptor(grid, (3, 0))
    with pytest.raises(IndexError):
        window_descriptor(grid, (155, 0))


def test_cache_reuses_overlapping_blocks(rng):
    cache = BlockCache(lbp_image_padded(rng.integers(0, 256, (70, 200), dtype=np.uint8)))
    cache.descriptor((0, 0))
    assert (cache.hits, cache.misses) == (0, 100)
    cache.descriptor((5, 0))
    assert (cache.hits, cache.misses) == (90, 110)


def test_window_counts():
    assert len(window_origins(200, 70)) == 248
    assert len(window_origins(200, 70, stride=(1, 1))) == 4681


@pytest.fixture(scope="module")
def nir_model():
    rng = np.random.default_rng(0)
    crops = [c for s in ("open", "closed") for c in synth.roi_eye_crops(s, 150, rng, night=True)]
    return train_nir(crops), crops


def test_training_span_and_file_round_trip(nir_model):
    m, crops = nir_model
    assert m.eigen.k == 40 and m.eigen.dim == 1600
    small = train_nir(crops[:41])
    X = np.vstack([crop_descriptor(c) for c in crops[:41]])
    assert small.eigen.recon_error(X).max() <= 1e-6
    again = loads_nir(dumps_nir(m))
    probes = np.vstack([crop_descriptor(c) for c in crops[:100]])
    assert np.allclose(again.eigen.recon_error(probes), m.eigen.recon_error(probes), atol=1e-9)
    assert again.tau == m.tau and again.stride == (5, 4)
    with pytest.raises(ModelFormatError):
        loads_nir(dumps_nir(m).replace("THRESHOLD", "TRESHOLD"))


def test_training_preconditions(nir_model):
    _, crops = nir_model
    with pytest.raises(EigenError):
        train_nir([crops[0]] * 50)
    with pytest.raises(EigenError):
        train_nir(crops[:40])
    with pytest.raises(ValueError):
        train_nir(crops[:45] + [np.zeros((40, 49), np.uint8)])


def test_eyes_reconstruct_better_than_noise(nir_model):
    m, _ = nir_model
    rng = np.random.default_rng(9)
    held = [c for s in ("open", "closed") for c in synth.roi_eye_crops(s, 50, rng, night=True)]
    noise = [np.clip(rng.normal(90, 30, (40, 50)), 0, 255).astype(np.uint8) for _ in range(100)]
    e_eye = m.eigen.recon_error(np.vstack([crop_descriptor(c) for c in held]))
    e_noise = m.eigen.recon_error(np.vstack([crop_descriptor(c) for c in noise]))
    # a couple of crops cut from badly boxed faces sit in the noise range
    assert np.percentile(e_eye, 95) < np.percentile(e_noise, 1)
    assert np.median(e_eye) < 0.8 * np.median(e_noise)


def test_planted_crop_is_found_on_the_grid(nir_model):
    m, crops = nir_model
    for x, y in [(75, 16), (0, 0), (150, 28)]:
        # edge replication around the crop reproduces its training codes exactly
        roi = np.pad(crops[3], ((y, 30 - y), (x, 150 - x)), mode="edge")
        stats = SearchStats()
        assert detect_eye_nir(m, roi, stats) == (x, y, 50, 40)
        assert stats.windows == 248


def test_noise_roi_has_no_eye(nir_model):
    m, _ = nir_model
    rng = np.random.default_rng(5)
    for _ in range(5):
        assert detect_eye_nir(m, np.clip(rng.normal(90, 30, (70, 200)), 0, 255).astype(np.uint8)) is None


def test_intensity_shift_keeps_the_same_window(nir_model):
    m, _ = nir_model
    rng = np.random.default_rng(6)
    found = checked = 0
    for roi in synth.eye_rois("open", 3, rng, night=True) + synth.eye_rois("closed", 3, rng, night=True):
        base = detect_eye_nir(m, roi)
        found += base is not None
        for c in (40, -40):
            shifted = roi.astype(int) + c
            if shifted.min() < 0 or shifted.max() > 255:
                continue
            checked += 1
            assert detect_eye_nir(m, shifted.astype(np.uint8)) == base
    assert found >= 4 and checked >= 3
