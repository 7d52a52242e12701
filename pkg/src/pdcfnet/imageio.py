"""Image decoding/encoding, bilinear resizing, paired datasets and histograms."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm")


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Decode an 8-bit RGB/RGBA PNG or a binary PPM into uint8 (H, W, 3)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "RGBA":
                log.warning("%s: dropping alpha channel", path.name)
                im = im.convert("RGB")
            elif mode != "RGB":
                raise DataError(f"{path}: unsupported image mode {mode!r} (need 8-bit RGB or RGBA)")
            return np.asarray(im, dtype=np.uint8).copy()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from exc


def write_png(path: str | os.PathLike, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"write_png expects uint8 (H, W, 3), got {rgb.dtype} {rgb.shape}")
    Image.fromarray(rgb).save(path, format="PNG")


def write_ppm(path: str | os.PathLike, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def to_unit(rgb: np.ndarray) -> np.ndarray:
    """uint8 (H, W, 3) -> float64 (1, 3, H, W) in [0, 1]."""
    return (np.asarray(rgb, dtype=np.float64) / 255.0).transpose(2, 0, 1)[None]


def quantize(x: np.ndarray) -> np.ndarray:
    """(1, 3, H, W) or (3, H, W) values in [0, 1] -> uint8 (H, W, 3) via round(v * 255)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 4:
        if a.shape[0] != 1:
            raise ValueError(f"quantize expects a single image, got batch of {a.shape[0]}")
        a = a[0]
    return np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Rows hold half-pixel-centred linear interpolation weights."""
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - frac)
    np.add.at(m, (rows, i1), frac)
    return m


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of the last two axes (half-pixel centres, clamped edges)."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2:]
    if (h, w) == (out_h, out_w):
        return x.copy()
    mh = _interp_matrix(h, out_h)
    mw = _interp_matrix(w, out_w)
    return np.einsum("oh,...hw,pw->...op", mh, x, mw)


@dataclass
class ImagePair:
    raw: np.ndarray  # (1, 3, H, W) in [0, 1]
    ref: np.ndarray
    id: str


def list_images(directory: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(directory.iterdir())
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES}


def load_image(path: Path, size: int | None = None) -> np.ndarray:
    x = to_unit(read_image(path))
    if size is not None:
        x = resize_bilinear(x, size, size)
    return x


def load_dataset(root: str | os.PathLike, size: int | None = 256) -> list[ImagePair]:
    """Pair ``root/raw/*`` with ``root/ref/*`` by filename stem, sorted by stem."""
    root = Path(root)
    raw_dir, ref_dir = root / "raw", root / "ref"
    for d in (raw_dir, ref_dir):
        if not d.is_dir():
            raise DataError(f"missing directory {d}")
    raw, ref = list_images(raw_dir), list_images(ref_dir)
    for stem in sorted(set(raw) ^ set(ref)):
        side = "raw" if stem in raw else "ref"
        log.warning("%s: no counterpart for %s/%s, skipped", root, side, stem)
    stems = sorted(set(raw) & set(ref))
    if not stems:
        raise DataError(f"{root}: no matching raw/ref image stems")
    return [ImagePair(load_image(raw[s], size), load_image(ref[s], size), s) for s in stems]


def histogram(rgb: np.ndarray) -> np.ndarray:
    """(256, 3) counts of each 8-bit value per channel."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"histogram expects (H, W, 3), got {rgb.shape}")
    return np.stack([np.bincount(rgb[..., c].ravel().astype(np.int64), minlength=256)[:256]
                     for c in range(3)], axis=1)


def histogram_dump(image: str | os.PathLike | np.ndarray, out: str | os.PathLike) -> np.ndarray:
    rgb = read_image(image) if not isinstance(image, np.ndarray) else image
    counts = histogram(rgb)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "R", "G", "B"])
        for b, row in enumerate(counts):
            writer.writerow([b, *map(int, row)])
    return counts
