"""Training loop and inference."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint
from .autograd import Tensor, no_grad
from .errors import DataError, NumericalError
from .imageio import IMAGE_SUFFIXES, ImagePair, load_image, quantize, write_png
from .losses import LossConfig, total_loss
from .network import NetworkConfig, PDCFNet
from .optim import Adam

log = logging.getLogger(__name__)

TERMS = ("total", "l2", "ssim", "edge")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 2e-5
    batch: int = 1
    size: int = 256
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    max_steps: int | None = None  # stop early after this many optimiser steps
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def header(self) -> str:
        return (f"# lr={self.lr:g} epochs={self.epochs} batch={self.batch} size={self.size} "
                f"seed={self.seed} channels={self.network.base_channels} dtype={self.dtype} "
                f"l2={int(self.loss.use_l2)} ssim={int(self.loss.use_ssim)} edge={int(self.loss.use_edge)} "
                f"lambda={self.loss.edge_weight:g} pdc={int(not self.network.ablate_pdc)}")


@dataclass
class TrainResult:
    model: PDCFNet
    header: str
    epochs: list[dict[str, float]]
    steps: int

    def log_lines(self) -> list[str]:
        lines = [self.header, "epoch\t" + "\t".join(TERMS)]
        for e in self.epochs:
            lines.append(f"{e['epoch']}\t" + "\t".join(f"{e[t]:.8g}" for t in TERMS))
        return lines


def _stack(items: Sequence[np.ndarray], dtype) -> Tensor:
    return Tensor(np.concatenate(items, axis=0).astype(dtype))


def train(data: Sequence[ImagePair], config: TrainConfig | None = None,
          out: str | os.PathLike | None = None, log_path: str | os.PathLike | None = None) -> TrainResult:
    """Fit a freshly initialised network to ``data``.

    Deterministic for fixed (seed, data, config). Writes the checkpoint to
    ``out`` and the tab-separated epoch log to ``log_path`` when given.
    """
    cfg = config or TrainConfig()
    if not data:
        raise DataError("no training pairs")
    dtype = np.dtype(cfg.dtype)
    model = PDCFNet(cfg.network, seed=cfg.seed, dtype=dtype)
    opt = Adam(model.named_parameters(), lr=cfg.lr)
    order_rng = np.random.default_rng([cfg.seed, 1])
    header = cfg.header()
    log.info("%s", header)

    history: list[dict[str, float]] = []
    step = 0
    done = False
    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(len(data))
        sums = dict.fromkeys(TERMS, 0.0)
        count = 0
        for start in range(0, len(order), cfg.batch):
            idx = order[start:start + cfg.batch]
            x = _stack([data[i].raw for i in idx], dtype)
            y = _stack([data[i].ref for i in idx], dtype)
            pred = model(x)
            loss, parts = total_loss(pred, y, cfg.loss)
            if not math.isfinite(parts["total"]):
                raise NumericalError(f"non-finite loss at step {step}: {parts}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            step += 1
            for t in TERMS:
                sums[t] += parts[t]
            count += 1
            if cfg.max_steps is not None and step >= cfg.max_steps:
                done = True
                break
        row = {"epoch": epoch, **{t: sums[t] / count for t in TERMS}}
        history.append(row)
        log.info("epoch %d total %.6g", epoch, row["total"])
        if done:
            break

    result = TrainResult(model, header, history, step)
    if log_path is not None:
        Path(log_path).write_text("\n".join(result.log_lines()) + "\n")
    if out is not None:
        checkpoint.save(out, model)
    return result


def dataset_loss(model: PDCFNet, data: Sequence[ImagePair], loss: LossConfig | None = None) -> dict[str, float]:
    """Mean of each loss term over ``data`` (no graph is recorded)."""
    sums = dict.fromkeys(TERMS, 0.0)
    with no_grad():
        for pair in data:
            pred = model(Tensor(pair.raw.astype(model.dtype)))
            _, parts = total_loss(pred, Tensor(pair.ref.astype(model.dtype)), loss)
            for t in TERMS:
                sums[t] += parts[t]
    return {t: sums[t] / len(data) for t in TERMS}


def enhance_array(model: PDCFNet, x: np.ndarray) -> np.ndarray:
    """(1, 3, H, W) in [0, 1] -> enhanced uint8 (H, W, 3)."""
    with no_grad():
        y = model(Tensor(np.asarray(x, dtype=model.dtype)))
    return quantize(y.data)


def enhance(model: PDCFNet | str | os.PathLike, inputs: str | os.PathLike | Sequence[str | os.PathLike],
            out_dir: str | os.PathLike, size: int | None = None) -> list[Path]:
    """Enhance images at native resolution (or ``size`` x ``size``) and write PNGs named by stem."""
    if not isinstance(model, PDCFNet):
        model = checkpoint.load(model)
    if isinstance(inputs, (str, os.PathLike)) and Path(inputs).is_dir():
        paths = sorted(p for p in Path(inputs).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    elif isinstance(inputs, (str, os.PathLike)):
        paths = [Path(inputs)]
    else:
        paths = [Path(p) for p in inputs]
    if not paths:
        raise DataError(f"no input images in {inputs}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for p in paths:
        rgb = enhance_array(model, load_image(p, size))
        target = out_dir / f"{p.stem}.png"
        write_png(target, rgb)
        written.append(target)
    return written
