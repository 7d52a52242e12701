"""Synthetic degraded/clean pairs for smoke tests and demos."""

from __future__ import annotations

import numpy as np

from .imageio import ImagePair

# per-channel attenuation and veiling light of a blue-green water column
_ATTENUATION = np.array([0.45, 0.8, 0.9])
_VEIL = np.array([0.05, 0.15, 0.2])


def clean_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth random colour texture, (1, 3, size, size) in [0.05, 0.95]."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.empty((3, size, size))
    for c in range(3):
        acc = np.zeros((size, size))
        for _ in range(4):
            fy, fx = rng.uniform(0.5, 4.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            acc += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * (fy * yy + fx * xx) + phase)
        img[c] = acc
    img -= img.min(axis=(1, 2), keepdims=True)
    img /= img.max(axis=(1, 2), keepdims=True)
    return (0.05 + 0.9 * img)[None]


def degrade(clean: np.ndarray) -> np.ndarray:
    """Colour cast plus a 3x3 box blur with edge replication."""
    x = clean[0] * _ATTENUATION[:, None, None] + _VEIL[:, None, None]
    p = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")
    h, w = x.shape[1:]
    blur = sum(p[:, i:i + h, j:j + w] for i in range(3) for j in range(3)) / 9.0
    return np.clip(blur, 0.0, 1.0)[None]


def synthetic_pairs(n: int, size: int = 32, seed: int = 0) -> list[ImagePair]:
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        ref = clean_image(rng, size)
        pairs.append(ImagePair(degrade(ref), ref, f"syn{i:03d}"))
    return pairs
