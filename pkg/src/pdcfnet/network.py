"""PDCFNet: conv block, detail enhancement modules, SE attention and feature fusion.

The network never changes spatial resolution. Data flow with the default
wiring::

    F0 = ConvBlock(x)
    F1, F2, F3 = DEM(F0), DEM(F1), DEM(F2)
    G1 = FFM(F0, F3)
    G2 = FFM(G1, F2)
    y  = sigmoid(conv3x3(G2))
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .autograd import (Tensor, activation, channel_scale, concat_channels,
                       global_avg_pool, hadamard, mish, sigmoid)
from .nn import Conv2d, InstanceNorm2d, Module, PdcConv2d
from .pdc import PdcKind

DEFAULT_WIRING = (("F0", "F3"), ("G1", "F2"))


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters; together they fix the parameter layout.

    ``ffm_wiring`` lists, per fusion module, the two feature names it fuses.
    ``F0`` is the conv block output, ``F1..F{dem_count}`` the DEM outputs and
    ``G{i}`` the output of the i-th fusion module (1-based). The last fusion
    output feeds the output head.
    """

    base_channels: int = 32
    se_reduction: int = 8
    dem_count: int = 3
    ablate_pdc: bool = False
    ffm_wiring: tuple[tuple[str, str], ...] = DEFAULT_WIRING
    dem_residual: bool = False
    pdc_padding: str = "replicate"

    def __post_init__(self):
        object.__setattr__(self, "ffm_wiring", tuple(tuple(p) for p in self.ffm_wiring))
        c, r = self.base_channels, self.se_reduction
        if c < 4 or c % 4:
            raise ValueError(f"base_channels must be a positive multiple of 4, got {c}")
        if r < 1 or c // r < 1:
            raise ValueError(f"se_reduction {r} leaves no hidden units for {c} channels")
        if self.dem_count < 1:
            raise ValueError("dem_count must be >= 1")
        if not self.ffm_wiring:
            raise ValueError("ffm_wiring needs at least one fusion module")
        if self.pdc_padding not in ("replicate", "zeros"):
            raise ValueError(f"unknown pdc_padding {self.pdc_padding!r}")
        available = {f"F{i}" for i in range(self.dem_count + 1)}
        for i, pair in enumerate(self.ffm_wiring, start=1):
            if len(pair) != 2 or any(name not in available for name in pair):
                raise ValueError(f"ffm_wiring entry {i} {pair!r} references unknown features; "
                                 f"available: {sorted(available)}")
            available.add(f"G{i}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ffm_wiring"] = [list(p) for p in self.ffm_wiring]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        if "ffm_wiring" in d:
            d["ffm_wiring"] = tuple(tuple(p) for p in d["ffm_wiring"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _check_spatial(t: Tensor, hw: tuple[int, int], where: str) -> Tensor:
    if t.shape[2:] != hw:
        raise AssertionError(f"{where} changed spatial size {hw} -> {t.shape[2:]}")
    return t


class ConvBlock(Module):
    """3x3 conv -> instance norm -> mish.

    The conv has no bias: instance norm would subtract it out again.
    """

    def __init__(self, channels: int, rng, dtype=np.float64):
        self.conv = Conv2d(3, channels, 3, rng, bias=False, dtype=dtype)
        self.norm = InstanceNorm2d(channels, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"conv block expects a 3-channel NCHW image, got {x.shape}")
        return mish(self.norm(self.conv(x)))


class PDCInc(Module):
    """1x1 -> {3x3, central, angular, radial} in parallel -> concat -> 1x1."""

    def __init__(self, channels: int, rng, ablate_pdc: bool = False, padding: str = "replicate",
                 dtype=np.float64):
        if channels % 4:
            raise ValueError(f"PDCInc splits channels four ways; {channels} is not divisible by 4")
        q = channels // 4
        self.pre = Conv2d(channels, channels, 1, rng, dtype=dtype)
        self.vanilla = Conv2d(channels, q, 3, rng, bias=False, dtype=dtype)
        if ablate_pdc:
            self.paths = [Conv2d(channels, q, 3, rng, bias=False, dtype=dtype) for _ in PdcKind]
        else:
            self.paths = [PdcConv2d(kind, channels, q, rng, padding_mode=padding, dtype=dtype)
                          for kind in PdcKind]
        self.post = Conv2d(channels, channels, 1, rng, dtype=dtype)

    def branches(self, x: Tensor) -> list[Tensor]:
        h = self.pre(x)
        return [self.vanilla(h)] + [p(h) for p in self.paths]

    def forward(self, x: Tensor) -> Tensor:
        return self.post(concat_channels(self.branches(x)))


class DEM(Module):
    """Detail enhancement module: PDCInc branch plus a parallel 3x3 conv, summed."""

    def __init__(self, channels: int, rng, ablate_pdc: bool = False, residual: bool = False,
                 padding: str = "replicate", dtype=np.float64):
        self.inc = PDCInc(channels, rng, ablate_pdc, padding, dtype)
        self.side = Conv2d(channels, channels, 3, rng, dtype=dtype)
        self.residual = residual

    def forward(self, x: Tensor) -> Tensor:
        out = self.inc(x) + self.side(x)
        return out + x if self.residual else out


class SEBlock(Module):
    def __init__(self, channels: int, reduction: int, rng, dtype=np.float64):
        hidden = channels // reduction
        if hidden < 1:
            raise ValueError(f"SE reduction {reduction} too large for {channels} channels")
        self.fc1 = Conv2d(channels, hidden, 1, rng, dtype=dtype)
        self.fc2 = Conv2d(hidden, channels, 1, rng, dtype=dtype)

    def scales(self, x: Tensor) -> Tensor:
        return sigmoid(self.fc2(activation(self.fc1(global_avg_pool(x)), "relu")))

    def forward(self, x: Tensor) -> Tensor:
        return channel_scale(x, self.scales(x))


class FFM(Module):
    """Cross-level fusion of two same-shape feature maps.

    f_c = conv(SE(concat(x1, x2))); f_i = conv(x_i) * f_c;
    y = conv(SE(concat(f_c, f1, f2))). All convs are 1x1.
    """

    def __init__(self, channels: int, reduction: int, rng, dtype=np.float64):
        c = channels
        self.se_in = SEBlock(2 * c, reduction, rng, dtype)
        self.fuse_in = Conv2d(2 * c, c, 1, rng, dtype=dtype)
        self.proj1 = Conv2d(c, c, 1, rng, dtype=dtype)
        self.proj2 = Conv2d(c, c, 1, rng, dtype=dtype)
        self.se_out = SEBlock(3 * c, reduction, rng, dtype)
        self.fuse_out = Conv2d(3 * c, c, 1, rng, dtype=dtype)

    def forward(self, x1: Tensor, x2: Tensor) -> Tensor:
        if x1.shape != x2.shape:
            raise ValueError(f"FFM inputs must match: {x1.shape} vs {x2.shape}")
        fc = self.fuse_in(self.se_in(concat_channels([x1, x2])))
        f1 = hadamard(self.proj1(x1), fc)
        f2 = hadamard(self.proj2(x2), fc)
        return self.fuse_out(self.se_out(concat_channels([fc, f1, f2])))


class PDCFNet(Module):
    def __init__(self, config: NetworkConfig | None = None, seed: int = 0, dtype=np.float64):
        self.config = config or NetworkConfig()
        cfg = self.config
        c = cfg.base_channels
        rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self.stem = ConvBlock(c, rng, dtype)
        self.dems = [DEM(c, rng, cfg.ablate_pdc, cfg.dem_residual, cfg.pdc_padding, dtype)
                     for _ in range(cfg.dem_count)]
        self.ffms = [FFM(c, cfg.se_reduction, rng, dtype) for _ in cfg.ffm_wiring]
        self.head = Conv2d(c, 3, 3, rng, dtype=dtype)

    def features(self, x: Tensor) -> dict[str, Tensor]:
        """Every named intermediate (F*, G*, and the output ``Y``)."""
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.dtype != self.dtype:
            x = Tensor(x.data.astype(self.dtype))
        hw = x.shape[2:]
        feats = {"F0": _check_spatial(self.stem(x), hw, "conv block")}
        h = feats["F0"]
        for i, dem in enumerate(self.dems, start=1):
            h = feats[f"F{i}"] = _check_spatial(dem(h), hw, f"DEM {i}")
        for i, (ffm, (a, b)) in enumerate(zip(self.ffms, self.config.ffm_wiring), start=1):
            h = feats[f"G{i}"] = _check_spatial(ffm(feats[a], feats[b]), hw, f"FFM {i}")
        feats["Y"] = _check_spatial(sigmoid(self.head(h)), hw, "output head")
        return feats

    def forward(self, x: Tensor) -> Tensor:
        return self.features(x)["Y"]


def _conv_params(cin, cout, k, bias=True):
    return cin * cout * k * k + (cout if bias else 0)


def _se_params(d, r):
    h = d // r
    return 2 * d * h + h + d


def model_stats(config: NetworkConfig, height: int = 256, width: int = 256) -> tuple[int, int]:
    """Closed-form (parameter count, multiply-accumulates) for one image of the given size.

    PDC layers are charged for the kernel they execute (3x3, or 5x5 for
    radial). Normalisation, activations and elementwise products are free.
    """
    c, r = config.base_channels, config.se_reduction
    q = c // 4
    hw = height * width

    params = 27 * c + 2 * c
    macs = 27 * c * hw

    radial_params = 9 * c * q if config.ablate_pdc else 8 * c * q
    radial_taps = 9 if config.ablate_pdc else 25
    dem_params = (2 * _conv_params(c, c, 1) + 27 * c * q + radial_params + _conv_params(c, c, 3))
    dem_macs = (2 * c * c + 27 * c * q + radial_taps * c * q + 9 * c * c) * hw
    params += config.dem_count * dem_params
    macs += config.dem_count * dem_macs

    ffm_params = (_se_params(2 * c, r) + _se_params(3 * c, r) + _conv_params(2 * c, c, 1)
                  + 2 * _conv_params(c, c, 1) + _conv_params(3 * c, c, 1))
    ffm_macs = 2 * (2 * c) * (2 * c // r) + 2 * (3 * c) * (3 * c // r) + 7 * c * c * hw
    params += len(config.ffm_wiring) * ffm_params
    macs += len(config.ffm_wiring) * ffm_macs

    params += _conv_params(c, 3, 3)
    macs += 27 * c * hw
    return params, macs


def count_macs(model: Module, height: int, width: int) -> int:
    """MACs by walking the instantiated layers (SE layers run at 1x1)."""
    total = 0

    def walk(m, hw):
        nonlocal total
        if hasattr(m, "macs"):
            total += m.macs(*hw)
            return
        for value in vars(m).values():
            items = value if isinstance(value, (list, tuple)) else [value]
            for item in items:
                if isinstance(item, SEBlock):
                    walk(item, (1, 1))
                elif isinstance(item, Module):
                    walk(item, hw)

    walk(model, (height, width))
    return total
