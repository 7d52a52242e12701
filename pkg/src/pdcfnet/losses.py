"""Training objective: l2 + (1 - SSIM) + lambda * Laplacian edge loss."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autograd import Tensor, conv2d, crop, mean, reshape, sqrt, square

__all__ = [
    "LossConfig",
    "gaussian_window",
    "LAPLACIAN",
    "l2_loss",
    "ssim_loss",
    "ssim_map_numpy",
    "laplacian",
    "edge_loss",
    "total_loss",
]

LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
SSIM_K1, SSIM_K2 = 0.01, 0.03


@dataclass(frozen=True)
class LossConfig:
    edge_weight: float = 0.05
    edge_eps: float = 1e-3
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    use_l2: bool = True
    use_ssim: bool = True
    use_edge: bool = True

    def __post_init__(self):
        if self.edge_weight < 0:
            raise ValueError("edge_weight must be >= 0")
        if self.edge_eps <= 0:
            raise ValueError("edge_eps must be > 0")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be a positive odd integer")


@lru_cache(maxsize=None)
def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalised 2-D Gaussian weights (outer product of a 1-D profile)."""
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    win = np.outer(g, g)
    win.setflags(write=False)
    return win


def _check_pair(x: Tensor, y: Tensor, what: str) -> None:
    if x.shape != y.shape:
        raise ValueError(f"{what}: shape mismatch {x.shape} vs {y.shape}")
    if x.ndim != 4:
        raise ValueError(f"{what}: expected NCHW tensors, got {x.shape}")


def _per_channel(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    return reshape(x, (n * c, 1, h, w))


def l2_loss(x: Tensor, y: Tensor) -> Tensor:
    """Mean squared difference over all elements."""
    _check_pair(x, y, "l2_loss")
    return mean(square(x - y))


def _filter(t: Tensor, win: Tensor) -> Tensor:
    return conv2d(t, win, padding=0)


def ssim_loss(x: Tensor, y: Tensor, window: int = 11, sigma: float = 1.5) -> Tensor:
    """1 - mean SSIM, with Gaussian-weighted local statistics over valid windows.

    Channels are treated independently and the SSIM map is averaged over
    channels, batch and positions. Dynamic range is 1.
    """
    _check_pair(x, y, "ssim_loss")
    if x.shape[2] < window or x.shape[3] < window:
        raise ValueError(f"ssim_loss: image {x.shape[2:]} smaller than the {window}x{window} window")
    win = Tensor(gaussian_window(window, sigma)[None, None].astype(x.dtype))
    xs, ys = _per_channel(x), _per_channel(y)
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    mx, my = _filter(xs, win), _filter(ys, win)
    mx2, my2, mxy = mx * mx, my * my, mx * my
    vx = _filter(xs * xs, win) - mx2
    vy = _filter(ys * ys, win) - my2
    cov = _filter(xs * ys, win) - mxy
    num = (mxy * 2.0 + c1) * (cov * 2.0 + c2)
    den = (mx2 + my2 + c1) * (vx + vy + c2)
    return 1.0 - mean(num / den)


def ssim_map_numpy(x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5,
                   data_range: float = 1.0) -> np.ndarray:
    """Same statistics as :func:`ssim_loss` on plain arrays shaped (..., H, W)."""
    win = gaussian_window(window, sigma)

    def filt(a):
        v = np.lib.stride_tricks.sliding_window_view(a, (window, window), axis=(-2, -1))
        return np.tensordot(v, win, axes=([-2, -1], [0, 1]))

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c1, c2 = (SSIM_K1 * data_range) ** 2, (SSIM_K2 * data_range) ** 2
    mx, my = filt(x), filt(y)
    mx2, my2, mxy = mx * mx, my * my, mx * my
    vx = filt(x * x) - mx2
    vy = filt(y * y) - my2
    cov = filt(x * y) - mxy
    return (mxy * 2.0 + c1) * (cov * 2.0 + c2) / ((mx2 + my2 + c1) * (vx + vy + c2))


def laplacian(x: Tensor) -> Tensor:
    """4-neighbour Laplacian per channel, zero padded to the input size."""
    n, c, h, w = x.shape
    k = Tensor(LAPLACIAN[None, None].astype(x.dtype))
    return reshape(conv2d(_per_channel(x), k), (n, c, h, w))


def edge_loss(x: Tensor, y: Tensor, eps: float = 1e-3, interior_only: bool = False) -> Tensor:
    """sqrt(mean((Lap x - Lap y)^2) + eps^2).

    ``interior_only`` drops the one-pixel border where zero padding leaks
    into the stencil.
    """
    _check_pair(x, y, "edge_loss")
    d = laplacian(x) - laplacian(y)
    if interior_only:
        d = crop(d, 1)
    return sqrt(mean(square(d)) + eps * eps)


def total_loss(x: Tensor, y: Tensor, config: LossConfig | None = None) -> tuple[Tensor, dict[str, float]]:
    """Weighted sum of the enabled terms plus a per-term breakdown.

    Disabled terms are not evaluated and report 0 in the breakdown.
    """
    cfg = config or LossConfig()
    if not (cfg.use_l2 or cfg.use_ssim or cfg.use_edge):
        raise ValueError("total_loss: every term is disabled")
    terms: list[Tensor] = []
    parts = {"l2": 0.0, "ssim": 0.0, "edge": 0.0}
    if cfg.use_l2:
        t = l2_loss(x, y)
        parts["l2"] = t.item()
        terms.append(t)
    if cfg.use_ssim:
        t = ssim_loss(x, y, cfg.ssim_window, cfg.ssim_sigma)
        parts["ssim"] = t.item()
        terms.append(t)
    if cfg.use_edge:
        t = edge_loss(x, y, cfg.edge_eps)
        parts["edge"] = t.item()
        terms.append(t * cfg.edge_weight)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    parts["total"] = total.item()
    return total, parts
