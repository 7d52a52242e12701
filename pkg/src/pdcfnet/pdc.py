"""Pixel difference convolutions.

Each kind computes ``y(p) = sum_i w_i * (x[p + a_i] - x[p + b_i])`` over a
fixed set of offset pairs ``(a_i, b_i)``. Because the expression is linear in
``x`` the coefficients can be collected into an ordinary kernel, so execution
(and differentiation) goes through :func:`pdcfnet.autograd.conv2d` with the
transformed kernel. :func:`pair_sum_reference` evaluates the pair sum
literally and is only meant as a test oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, conv2d, pad2d, _make

__all__ = [
    "PdcKind",
    "Pair",
    "pair_set",
    "ring_offsets",
    "RADIAL_DIRECTIONS",
    "weight_shape",
    "kernel_size",
    "kernel_transform",
    "transform_weights",
    "pdc_conv",
    "pair_sum_reference",
]


class PdcKind(str, enum.Enum):
    CENTRAL = "central"
    ANGULAR = "angular"
    RADIAL = "radial"


# 3x3 ring, clockwise from the top-left corner, as (dy, dx)
_RING = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]

# N, NE, E, SE, S, SW, W, NW as unit (dy, dx)
RADIAL_DIRECTIONS = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def ring_offsets() -> list[tuple[int, int]]:
    return list(_RING)


@dataclass(frozen=True)
class Pair:
    """One difference term: ``w[weight] * (x[p + first] - x[p + second])``."""

    first: tuple[int, int]
    second: tuple[int, int]
    weight: int | tuple[int, int]


def pair_set(kind: PdcKind | str) -> list[Pair]:
    """The offset pairs of a PDC kind.

    ``Pair.weight`` indexes the stored weight array: a ``(row, col)`` grid
    position for central/angular kinds, a direction index for radial.
    """
    kind = PdcKind(kind)
    if kind is PdcKind.CENTRAL:
        return [Pair((dy, dx), (0, 0), (dy + 1, dx + 1)) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    if kind is PdcKind.ANGULAR:
        # each ring position minus its clockwise successor; centre weight unused
        return [Pair(_RING[i], _RING[(i + 1) % 8], (_RING[i][0] + 1, _RING[i][1] + 1)) for i in range(8)]
    return [Pair((2 * dy, 2 * dx), (dy, dx), d) for d, (dy, dx) in enumerate(RADIAL_DIRECTIONS)]


def weight_shape(kind: PdcKind | str, cout: int, cin: int) -> tuple[int, ...]:
    return (cout, cin, 8) if PdcKind(kind) is PdcKind.RADIAL else (cout, cin, 3, 3)


def kernel_size(kind: PdcKind | str) -> int:
    return 5 if PdcKind(kind) is PdcKind.RADIAL else 3


def kernel_transform(kind: PdcKind | str, w: np.ndarray) -> np.ndarray:
    """Collect the pair-difference coefficients into a vanilla kernel."""
    kind = PdcKind(kind)
    if kind is PdcKind.CENTRAL:
        out = w.copy()
        out[..., 1, 1] = w[..., 1, 1] - w.sum(axis=(-2, -1))
        return out
    if kind is PdcKind.ANGULAR:
        out = np.zeros_like(w)
        # ring position i collects its own weight minus its predecessor's
        for i, (dy, dx) in enumerate(_RING):
            py, px = _RING[i - 1]
            out[..., dy + 1, dx + 1] = w[..., dy + 1, dx + 1] - w[..., py + 1, px + 1]
        return out
    out = np.zeros(w.shape[:-1] + (5, 5), dtype=w.dtype)
    for d, (dy, dx) in enumerate(RADIAL_DIRECTIONS):
        out[..., 2 + 2 * dy, 2 + 2 * dx] = w[..., d]
        out[..., 2 + dy, 2 + dx] = -w[..., d]
    return out


def _transform_grad(kind: PdcKind, g: np.ndarray, wshape: tuple[int, ...]) -> np.ndarray:
    """Adjoint of :func:`kernel_transform` (the map is linear in the weights)."""
    if kind is PdcKind.CENTRAL:
        gw = g.copy()
        gw -= g[..., 1:2, 1:2]
        return gw
    if kind is PdcKind.ANGULAR:
        gw = np.zeros(wshape, dtype=g.dtype)
        for i, (dy, dx) in enumerate(_RING):
            ny, nx = _RING[(i + 1) % 8]
            gw[..., dy + 1, dx + 1] = g[..., dy + 1, dx + 1] - g[..., ny + 1, nx + 1]
        return gw
    gw = np.empty(wshape, dtype=g.dtype)
    for d, (dy, dx) in enumerate(RADIAL_DIRECTIONS):
        gw[..., d] = g[..., 2 + 2 * dy, 2 + 2 * dx] - g[..., 2 + dy, 2 + dx]
    return gw


def transform_weights(kind: PdcKind | str, w: Tensor) -> Tensor:
    """Differentiable :func:`kernel_transform`."""
    kind = PdcKind(kind)
    wshape = w.shape
    return _make(kernel_transform(kind, w.data), (w,),
                 lambda g: (_transform_grad(kind, g, wshape),), f"pdc_{kind.value}_kernel")


def pdc_conv(x: Tensor, kind: PdcKind | str, w: Tensor, b: Tensor | None = None,
             padding_mode: str = "replicate") -> Tensor:
    """Same-size pixel difference convolution of ``x``."""
    kind = PdcKind(kind)
    cout, cin = w.shape[:2]
    if w.shape != weight_shape(kind, cout, cin):
        raise ValueError(f"{kind.value} PDC weight has shape {w.shape}, expected {weight_shape(kind, cout, cin)}")
    if x.ndim != 4 or x.shape[1] != cin:
        raise ValueError(f"{kind.value} PDC channel mismatch: input {x.shape} vs weight {w.shape}")
    k = kernel_size(kind)
    pad = (k - 1) // 2
    if x.shape[2] < k or x.shape[3] < k:
        raise ValueError(f"input {x.shape} smaller than the {k}x{k} {kind.value} PDC footprint")
    return conv2d(pad2d(x, pad, padding_mode), transform_weights(kind, w), b, padding=0)


def pair_sum_reference(x: np.ndarray, kind: PdcKind | str, w: np.ndarray, b: np.ndarray | None = None,
                       padding_mode: str = "replicate") -> np.ndarray:
    """Evaluate the pair sum term by term (slow; oracle only)."""
    kind = PdcKind(kind)
    pad = (kernel_size(kind) - 1) // 2
    np_mode = {"replicate": "edge", "zeros": "constant"}[padding_mode]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode=np_mode)
    n, cin, h, wd = x.shape
    cout = w.shape[0]
    out = np.zeros((n, cout, h, wd), dtype=np.result_type(x, w))
    for pair in pair_set(kind):
        (ay, ax), (by, bx) = pair.first, pair.second
        diff = (xp[:, :, pad + ay:pad + ay + h, pad + ax:pad + ax + wd]
                - xp[:, :, pad + by:pad + by + h, pad + bx:pad + bx + wd])
        wi = w[:, :, pair.weight[0], pair.weight[1]] if isinstance(pair.weight, tuple) else w[:, :, pair.weight]
        out += np.einsum("oc,nchw->nohw", wi, diff)
    if b is not None:
        out += b[None, :, None, None]
    return out
