import math

import numpy as np
import pytest
from skimage.color import rgb2lab

from pdcfnet import metrics
from pdcfnet.autograd import Tensor
from pdcfnet.losses import ssim_loss


def _rgb(rng, h=32, w=40):
    return rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8)


# -- scalar-loop oracles ----------------------------------------------------
def _loop_mse(x, y):
    total = 0.0
    for v, u in zip(np.ravel(x).tolist(), np.ravel(y).tolist()):
        total += (float(v) - float(u)) ** 2
    return total / x.size


def _loop_sobel(plane):
    h, w = plane.shape
    out = np.zeros((h, w))

    def at(i, j):
        return float(plane[min(max(i, 0), h - 1), min(max(j, 0), w - 1)])

    for i in range(h):
        for j in range(w):
            gx = (at(i - 1, j + 1) + 2 * at(i, j + 1) + at(i + 1, j + 1)
                  - at(i - 1, j - 1) - 2 * at(i, j - 1) - at(i + 1, j - 1))
            gy = (at(i + 1, j - 1) + 2 * at(i + 1, j) + at(i + 1, j + 1)
                  - at(i - 1, j - 1) - 2 * at(i - 1, j) - at(i - 1, j + 1))
            out[i, j] = math.sqrt(gx * gx + gy * gy)
    return out


def _block_scan(plane, block=8):
    """Yield (max, min) per full block, row-major."""
    h, w = plane.shape
    for bi in range(h // block):
        for bj in range(w // block):
            vals = [float(plane[i, j]) for i in range(bi * block, (bi + 1) * block)
                    for j in range(bj * block, (bj + 1) * block)]
            yield max(vals), min(vals)


def _loop_eme(plane):
    h, w = plane.shape
    k = (h // 8) * (w // 8)
    acc = 0.0
    for hi, lo in _block_scan(plane):
        if hi * lo > 0:
            acc += math.log(hi / lo)
    return 2.0 / k * acc


def _loop_uiconm(img):
    inten = img.astype(np.float64).mean(axis=2)
    h, w = inten.shape
    k = (h // 8) * (w // 8)
    acc = 0.0
    for hi, lo in _block_scan(inten):
        if hi + lo > 0:
            c = (hi - lo) / (hi + lo)
            if c > 0:
                acc += c * math.log(c)
    return -acc / k


def _loop_uicm(img):
    a = img.astype(np.float64)
    out = []
    for opp in (a[..., 0] - a[..., 1], (a[..., 0] + a[..., 1]) / 2 - a[..., 2]):
        vals = sorted(np.ravel(opp).tolist())
        k = len(vals)
        kept = vals[math.ceil(0.1 * k):k - math.floor(0.1 * k)]
        mu = sum(kept) / len(kept)
        var = sum((v - mu) ** 2 for v in vals) / k
        out.append((mu, var))
    (m1, v1), (m2, v2) = out
    return -0.0268 * math.sqrt(m1 ** 2 + m2 ** 2) + 0.1586 * math.sqrt(v1 + v2)


# -- full reference -----------------------------------------------------------
def test_psnr_uniform_offset():
    x = np.full((16, 16, 3), 100, np.uint8)
    y = x + 16
    mse, psnr = metrics.mse_psnr(x, y)
    assert mse == 256.0
    assert abs(psnr - 24.049) < 1e-3


def test_psnr_identity_sentinel(rng):
    x = _rgb(rng)
    assert metrics.mse_psnr(x, x) == (0.0, math.inf)


def test_mse_matches_loop(rng):
    x, y = _rgb(rng), _rgb(rng)
    mse, psnr = metrics.mse_psnr(x, y)
    ref = _loop_mse(x, y)
    assert abs(mse - ref) < 1e-9
    assert abs(psnr - 10 * math.log10(255 ** 2 / ref)) < 1e-9


def test_full_reference_symmetry(rng):
    x, y = _rgb(rng), _rgb(rng)
    assert metrics.mse_psnr(x, y) == metrics.mse_psnr(y, x)
    assert abs(metrics.ssim_index(x, y) - metrics.ssim_index(y, x)) < 1e-12
    with pytest.raises(ValueError):
        metrics.mse_psnr(x, y[:-1])


def test_psnr_decreases_with_mse():
    base = np.full((8, 8, 3), 20, np.uint8)
    values = [metrics.mse_psnr(base, base + d)[1] for d in range(1, 60)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_ssim_index_cases(rng):
    x = _rgb(rng)
    assert metrics.ssim_index(x, x) == 1.0
    binary = (rng.uniform(size=(24, 24, 3)) > 0.5).astype(np.uint8) * 255
    assert metrics.ssim_index(binary, 255 - binary) < 1.0


def test_ssim_index_equals_one_minus_loss(rng):
    x, y = rng.uniform(size=(1, 3, 20, 20)), rng.uniform(size=(1, 3, 20, 20))
    loss = ssim_loss(Tensor(x), Tensor(y)).item()
    index = metrics.ssim_index(np.moveaxis(x[0], 0, -1), np.moveaxis(y[0], 0, -1), peak=1.0)
    assert abs(index - (1 - loss)) < 1e-12


# -- UICM ---------------------------------------------------------------------
def test_uicm_gray_is_zero(rng):
    g = rng.integers(0, 256, size=(20, 20, 1))
    assert metrics.uicm(np.repeat(g, 3, axis=2)) == 0.0


def test_uicm_shift_invariant(rng):
    x = rng.integers(0, 200, size=(20, 24, 3)).astype(np.float64)
    assert abs(metrics.uicm(x) - metrics.uicm(x + 37)) < 1e-12


def test_uicm_matches_sort_and_trim(rng):
    x = _rgb(rng, 23, 17)
    assert abs(metrics.uicm(x) - _loop_uicm(x)) < 1e-9


def test_trimmed_mean_is_asymmetric():
    # K = 15: drop ceil(1.5) = 2 from the bottom and floor(1.5) = 1 from the top
    v = np.arange(15.0)
    assert metrics.trimmed_mean(v) == np.mean(np.arange(2.0, 14.0))


# -- UISM / UIConM ------------------------------------------------------------
def test_sobel_matches_loop(rng):
    plane = rng.uniform(0, 255, size=(11, 13))
    assert np.abs(metrics.sobel_magnitude(plane) - _loop_sobel(plane)).max() < 1e-9


def test_uism_matches_block_scan(rng):
    x = _rgb(rng, 27, 35)  # partial blocks on both axes are dropped
    ref = sum(w * _loop_eme(_loop_sobel(x[..., c].astype(np.float64)))
              for c, w in enumerate((0.299, 0.587, 0.114)))
    assert abs(metrics.uism(x) - ref) < 1e-9


def test_uiconm_matches_block_scan(rng):
    x = _rgb(rng, 27, 35)
    assert abs(metrics.uiconm(x) - _loop_uiconm(x)) < 1e-9
    assert metrics.uiconm(x) > 0


def test_block_metrics_constant_image():
    x = np.full((16, 24, 3), 90, np.uint8)
    assert metrics.uism(x) == 0.0
    assert metrics.uiconm(x) == 0.0


def test_uiconm_checkerboard_fixed_point():
    i, j = np.indices((16, 16))
    board = np.repeat((((i + j) % 2) * 255)[..., None], 3, axis=2)
    assert metrics.uiconm(board) == 0.0


def test_uism_step_edge():
    ramp = np.tile(np.linspace(10, 40, 32), (32, 1))
    step = ramp + np.where(np.arange(32) >= 13, 120.0, 0.0)
    img = lambda p: np.repeat(p[..., None], 3, axis=2)
    assert metrics.uism(img(step)) > 0
    assert metrics.uism(img(step)) > metrics.uism(img(ramp))
    # on a flat background the blocks also hold zero-gradient pixels, so they add nothing
    flat = np.where(np.arange(32) >= 13, 200.0, 50.0) * np.ones((32, 1))
    assert metrics.uism(img(flat)) == 0.0


def test_block_metrics_reject_tiny_images():
    with pytest.raises(ValueError, match="block"):
        metrics.uism(np.zeros((7, 20, 3)))
    with pytest.raises(ValueError, match="block"):
        metrics.uiconm(np.zeros((20, 7, 3)))
    with pytest.raises(ValueError, match="colour"):
        metrics.uicm(np.zeros((20, 20)))


# -- UIQM -----------------------------------------------------------------------
def test_uiqm_linear_combination(rng):
    assert metrics.uiqm_from_components(0, 0, 0) == 0
    assert abs(metrics.uiqm_from_components(1, 1, 1) - 3.8988) < 1e-12
    x = _rgb(rng)
    hand = 0.0282 * _loop_uicm(x) + 0.2953 * metrics.uism(x) + 3.5753 * _loop_uiconm(x)
    assert abs(metrics.uiqm(x) - hand) < 1e-9


# -- Lab / UCIQE ------------------------------------------------------------------
def test_lab_white_point():
    L, a, b = metrics.srgb_to_lab(np.array([[[255, 255, 255]]]))[0, 0]
    assert abs(L - 100) < 0.01 and abs(a) < 0.01 and abs(b) < 0.01
    assert np.abs(metrics.srgb_to_lab(np.zeros((1, 1, 3)))).max() < 1e-12


def test_lab_agrees_with_scikit_image(rng):
    # independent conversion; white points differ in the fourth decimal
    x = _rgb(rng, 8, 8)
    ours = metrics.srgb_to_lab(x)
    ref = rgb2lab(x / 255.0)
    assert np.abs(ours - ref).max() < 0.1


def test_uciqe_gray_cases(rng):
    assert metrics.uciqe(np.full((10, 10, 3), 128, np.uint8)) == 0.0
    g = np.repeat(rng.integers(0, 256, size=(20, 20, 1)), 3, axis=2)
    L = metrics.srgb_to_lab(g)[..., 0]
    con = (np.percentile(L, 99) - np.percentile(L, 1)) / 100
    assert abs(metrics.uciqe(g) - 0.2745 * con) < 1e-12


def test_uciqe_range(rng):
    v = metrics.uciqe(_rgb(rng))
    assert 0 < v < 1


def test_no_reference_storage_order(rng):
    x = _rgb(rng)
    f = np.asfortranarray(x)
    for name, fn in metrics.NO_REFERENCE.items():
        assert fn(x) == fn(f), name
        assert fn(x) == fn(x), name
