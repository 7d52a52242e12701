"""Image quality metrics: MSE/PSNR/SSIM against a reference, and the
no-reference underwater measures UICM, UISM, UIConM, UIQM and UCIQE.

Colour images are ``(H, W, 3)`` RGB arrays on the 0-255 scale (uint8 or
float). Nothing here is differentiable.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .losses import ssim_map_numpy

# every constant the metrics depend on
CONSTANTS = {
    "trim_alpha": 0.1,
    "uicm_mean_weight": -0.0268,
    "uicm_std_weight": 0.1586,
    "luma": (0.299, 0.587, 0.114),
    "uiqm": (0.0282, 0.2953, 3.5753),
    "uciqe": (0.4680, 0.2745, 0.2576),
    "block": 8,
    "psnr_peak": 255.0,
}

# sRGB (D65) -> XYZ
_RGB2XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
# reference white taken as the image of RGB white, so white maps to L=100, a=b=0
_WHITE = _RGB2XYZ.sum(axis=1)


def _color(img) -> np.ndarray:
    # a fixed memory layout keeps reductions bit-identical for the same pixels
    a = np.ascontiguousarray(img, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) colour image, got shape {a.shape}")
    return a


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return x, y


# -- full reference -------------------------------------------------------
def mse_psnr(x, y, peak: float = 255.0) -> tuple[float, float]:
    """MSE and PSNR (dB); PSNR is ``inf`` for identical inputs."""
    x, y = _pair(x, y)
    mse = float(np.mean((x - y) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(peak * peak / mse)
    return mse, psnr


def ssim_index(x, y, peak: float = 255.0, window: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM over channels and valid window positions, in [-1, 1]."""
    x, y = _pair(x, y)
    if x.ndim == 3:
        x, y = np.moveaxis(x, -1, 0), np.moveaxis(y, -1, 0)
    if x.shape[-1] < window or x.shape[-2] < window:
        raise ValueError(f"image {x.shape[-2:]} smaller than the {window}x{window} SSIM window")
    return float(ssim_map_numpy(x / peak, y / peak, window, sigma).mean())


# -- UICM -----------------------------------------------------------------
def trimmed_mean(v: np.ndarray, alpha: float = 0.1) -> float:
    """Asymmetric alpha-trimmed mean: drop ceil(aK) lowest and floor(aK) highest."""
    s = np.sort(np.ravel(v))
    k = s.size
    lo, hi = math.ceil(alpha * k), math.floor(alpha * k)
    return float(s[lo:k - hi].mean())


def uicm(img) -> float:
    """Colourfulness from the RG and YB opponent channels.

    Means are alpha-trimmed; variances are taken over all pixels about the
    trimmed mean.
    """
    a = _color(img)
    r, g, b = a[..., 0], a[..., 1], a[..., 2]
    rg = r - g
    yb = (r + g) / 2.0 - b
    alpha = CONSTANTS["trim_alpha"]
    mu_rg, mu_yb = trimmed_mean(rg, alpha), trimmed_mean(yb, alpha)
    var_rg = float(np.mean((rg - mu_rg) ** 2))
    var_yb = float(np.mean((yb - mu_yb) ** 2))
    return (CONSTANTS["uicm_mean_weight"] * math.sqrt(mu_rg ** 2 + mu_yb ** 2)
            + CONSTANTS["uicm_std_weight"] * math.sqrt(var_rg + var_yb))


# -- block measures -------------------------------------------------------
def _blocks(plane: np.ndarray, block: int) -> np.ndarray:
    """(k1, k2, block, block) view of the full blocks; partial edge blocks are dropped."""
    h, w = plane.shape
    k1, k2 = h // block, w // block
    if k1 == 0 or k2 == 0:
        raise ValueError(f"image {plane.shape} is smaller than one {block}x{block} block")
    return plane[:k1 * block, :k2 * block].reshape(k1, block, k2, block).swapaxes(1, 2)


def sobel_magnitude(plane: np.ndarray) -> np.ndarray:
    """Gradient magnitude from the 3x3 Sobel pair, edges replicated."""
    p = np.pad(np.asarray(plane, dtype=np.float64), 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return np.hypot(gx, gy)


def eme(plane: np.ndarray, block: int = 8) -> float:
    """(2 / (k1 k2)) * sum over blocks of ln(max / min); blocks with max*min == 0 add 0."""
    blk = _blocks(plane, block)
    k1, k2 = blk.shape[:2]
    hi = blk.max(axis=(2, 3))
    lo = blk.min(axis=(2, 3))
    valid = hi * lo > 0
    ratio = np.ones_like(hi)
    np.divide(hi, lo, out=ratio, where=valid)
    return 2.0 / (k1 * k2) * float(np.log(ratio).sum())


def uism(img, block: int | None = None) -> float:
    a = _color(img)
    block = block or CONSTANTS["block"]
    return float(sum(wt * eme(sobel_magnitude(a[..., i]), block)
                     for i, wt in enumerate(CONSTANTS["luma"])))


def uiconm(img, block: int | None = None) -> float:
    """Contrast: -(1 / (k1 k2)) * sum over blocks of w ln w, w = Michelson contrast of intensity."""
    a = _color(img)
    block = block or CONSTANTS["block"]
    blk = _blocks(a.mean(axis=2), block)
    k1, k2 = blk.shape[:2]
    hi = blk.max(axis=(2, 3))
    lo = blk.min(axis=(2, 3))
    den = hi + lo
    w = np.zeros_like(hi)
    np.divide(hi - lo, den, out=w, where=den > 0)
    valid = w > 0
    terms = np.zeros_like(w)
    terms[valid] = w[valid] * np.log(w[valid])
    return -float(terms.sum()) / (k1 * k2)


def uiqm_from_components(c_uicm: float, c_uism: float, c_uiconm: float) -> float:
    a, b, c = CONSTANTS["uiqm"]
    return a * c_uicm + b * c_uism + c * c_uiconm


def uiqm(img) -> float:
    return uiqm_from_components(uicm(img), uism(img), uiconm(img))


# -- UCIQE ----------------------------------------------------------------
def srgb_to_lab(img) -> np.ndarray:
    """sRGB (0-255) -> CIELAB under D65, shape preserved."""
    c = np.asarray(img, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB2XYZ.T / _WHITE
    delta = 6.0 / 29.0
    f = np.where(xyz > delta ** 3, np.cbrt(xyz), xyz / (3 * delta ** 2) + 4.0 / 29.0)
    L = 116.0 * f[..., 1] - 16.0
    A = 500.0 * (f[..., 0] - f[..., 1])
    B = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, A, B], axis=-1)


@lru_cache(maxsize=None)
def max_srgb_chroma(steps: int = 256) -> float:
    """Largest CIELAB chroma over the surface of the sRGB cube (sampled grid)."""
    t = np.linspace(0.0, 255.0, steps)
    u, v = np.meshgrid(t, t, indexing="ij")
    best = 0.0
    for axis in range(3):
        for fixed in (0.0, 255.0):
            face = np.empty(u.shape + (3,))
            others = [i for i in range(3) if i != axis]
            face[..., axis] = fixed
            face[..., others[0]] = u
            face[..., others[1]] = v
            lab = srgb_to_lab(face)
            best = max(best, float(np.hypot(lab[..., 1], lab[..., 2]).max()))
    return best


def uciqe(img) -> float:
    """0.4680 * chroma std + 0.2745 * luminance contrast + 0.2576 * mean saturation.

    Chroma std is taken on chroma divided by the sRGB gamut maximum; the
    contrast is the 1st-99th percentile spread of L / 100.
    """
    lab = srgb_to_lab(_color(img))
    L = lab[..., 0]
    chroma = np.hypot(lab[..., 1], lab[..., 2])
    sigma_c = float(np.std(chroma / max_srgb_chroma()))
    lo, hi = np.percentile(L, [1, 99])
    con_l = float(hi - lo) / 100.0
    den = np.hypot(chroma, L)
    sat = np.zeros_like(den)
    np.divide(chroma, den, out=sat, where=den > 0)
    mu_s = float(sat.mean())
    a, b, c = CONSTANTS["uciqe"]
    return a * sigma_c + b * con_l + c * mu_s


NO_REFERENCE = {"uicm": uicm, "uism": uism, "uiconm": uiconm, "uiqm": uiqm, "uciqe": uciqe}
