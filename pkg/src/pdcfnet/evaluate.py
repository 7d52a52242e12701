"""Dataset-level metric reports (per-image rows plus mean and population std)."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .errors import DataError
from .imageio import list_images, read_image

FULL_REFERENCE = ("mse", "psnr", "ssim")
NO_REFERENCE = ("uicm", "uism", "uiconm", "uiqm", "uciqe")
METRIC_ORDER = FULL_REFERENCE + NO_REFERENCE

# header labels and display scale for the one-line table summary
_TABLE = {
    "mse": ("MSE(x10^3)", 1e-3),
    "psnr": ("PSNR(dB)", 1.0),
    "ssim": ("SSIM(x10^2)", 1.0),
    "uicm": ("UICM", 1.0),
    "uism": ("UISM", 1.0),
    "uiconm": ("UIConM", 1.0),
    "uiqm": ("UIQM", 1.0),
    "uciqe": ("UCIQE", 1.0),
}


def _stable_sum(values) -> float:
    return math.fsum(sorted(values))


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation, independent of input order."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("mean_std of an empty sequence")
    if any(math.isinf(v) for v in vals):
        return (math.inf if all(v > 0 for v in vals if math.isinf(v)) else math.nan), math.nan
    n = len(vals)
    mu = _stable_sum(vals) / n
    var = _stable_sum((v - mu) ** 2 for v in vals) / n
    return mu, math.sqrt(var)


def image_metrics(pred: np.ndarray, ref: np.ndarray | None, names=METRIC_ORDER) -> dict[str, float]:
    """Metric values for one uint8 (H, W, 3) image; SSIM is reported x100."""
    out: dict[str, float] = {}
    if ref is not None and any(n in FULL_REFERENCE for n in names):
        mse, psnr = metrics.mse_psnr(pred, ref)
        out["mse"], out["psnr"] = mse, psnr
        out["ssim"] = 100.0 * metrics.ssim_index(pred, ref)
    for n in NO_REFERENCE:
        if n in names:
            out[n] = metrics.NO_REFERENCE[n](pred)
    return {n: out[n] for n in names if n in out}


def _fmt(v: float) -> str | float:
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


@dataclass
class MetricReport:
    metrics: tuple[str, ...]
    rows: list[tuple[str, dict[str, float]]] = field(default_factory=list)

    def add(self, image_id: str, values: dict[str, float]) -> None:
        self.rows.append((image_id, values))

    @property
    def summary(self) -> dict[str, tuple[float, float]]:
        return {m: mean_std(v[m] for _, v in self.rows) for m in self.metrics}

    def table_row(self, label: str = "") -> str:
        """Tab-separated ``mean±std`` cells, two decimals, e.g. ``27.37±5.27``."""
        cells = []
        for m in self.metrics:
            mu, sd = self.summary[m]
            s = _TABLE[m][1]
            cells.append(f"{mu * s:.2f}±{sd * s:.2f}")
        return "\t".join(([label] if label else []) + cells)

    def table_header(self) -> str:
        return "\t".join(_TABLE[m][0] for m in self.metrics)

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image", *self.metrics])
            for image_id, values in self.rows:
                w.writerow([image_id, *(repr(float(values[m])) for m in self.metrics)])
            summ = self.summary
            w.writerow(["mean±std", *(f"{summ[m][0]!r}±{summ[m][1]!r}" for m in self.metrics)])

    def to_dict(self) -> dict:
        return {
            "metrics": list(self.metrics),
            "images": [{"id": i, **{m: _fmt(v[m]) for m in self.metrics}} for i, v in self.rows],
            "summary": {m: {"mean": _fmt(mu), "std": _fmt(sd)} for m, (mu, sd) in self.summary.items()},
            "table": self.table_row(),
        }

    def write_json(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n")

    def write(self, report: str | os.PathLike) -> tuple[Path, Path]:
        """Write ``<report>.csv`` and ``<report>.json`` (a .csv/.json suffix is stripped)."""
        base = Path(report)
        if base.suffix.lower() in (".csv", ".json"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
        self.write_csv(csv_path)
        self.write_json(json_path)
        return csv_path, json_path


def evaluate(pred_dir: str | os.PathLike, ref_dir: str | os.PathLike | None = None,
             report: str | os.PathLike | None = None, no_reference: bool = False) -> MetricReport:
    """Score predictions against matched references (by stem) and/or with no-reference metrics.

    With ``ref_dir`` every metric is computed; ``no_reference`` (or no
    ``ref_dir``) restricts the report to the no-reference set.
    """
    preds = list_images(Path(pred_dir))
    if no_reference or ref_dir is None:
        names = NO_REFERENCE
        stems = sorted(preds)
        refs = {}
    else:
        names = METRIC_ORDER
        refs = list_images(Path(ref_dir))
        stems = sorted(set(preds) & set(refs))
    if not stems:
        raise DataError(f"no images to evaluate in {pred_dir}" + (f" matching {ref_dir}" if refs else ""))
    rep = MetricReport(tuple(names))
    for s in stems:
        pred = read_image(preds[s])
        ref = read_image(refs[s]) if refs else None
        if ref is not None and ref.shape != pred.shape:
            raise DataError(f"{s}: prediction {pred.shape} and reference {ref.shape} differ in size")
        rep.add(s, image_metrics(pred, ref, names))
    if report is not None:
        rep.write(report)
    return rep
