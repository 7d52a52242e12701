import numpy as np
import pytest
from PIL import Image

from pdcfnet import checkpoint
from pdcfnet.errors import DataError, NumericalError
from pdcfnet.imageio import ImagePair, read_image
from pdcfnet.network import NetworkConfig, PDCFNet
from pdcfnet.synthetic import synthetic_pairs
from pdcfnet.train import TrainConfig, dataset_loss, enhance, train

SMALL = NetworkConfig(base_channels=4, se_reduction=2)


def test_default_header_echoes_protocol():
    cfg = TrainConfig()
    assert (cfg.lr, cfg.epochs, cfg.batch, cfg.size) == (2e-5, 200, 1, 256)
    header = cfg.header()
    for token in ("lr=2e-05", "epochs=200", "batch=1", "size=256", "lambda=0.05"):
        assert token in header.split()


def test_config_validation():
    for bad in ({"epochs": 0}, {"lr": 0.0}, {"batch": 0}, {"max_steps": 0}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_log_format(tmp_path):
    data = synthetic_pairs(2, size=12, seed=1)
    cfg = TrainConfig(epochs=2, lr=1e-3, network=SMALL, dtype="float64")
    result = train(data, cfg, log_path=tmp_path / "log.tsv")
    lines = (tmp_path / "log.tsv").read_text().splitlines()
    assert lines[0] == cfg.header()
    assert lines[1].split("\t") == ["epoch", "total", "l2", "ssim", "edge"]
    assert len(lines) == 4 and result.steps == 4
    for i, line in enumerate(lines[2:], start=1):
        cells = line.split("\t")
        assert int(cells[0]) == i
        total, l2, ssim, edge = map(float, cells[1:])
        assert abs(total - (l2 + ssim + 0.05 * edge)) < 1e-6


def test_training_is_deterministic(tmp_path):
    data = synthetic_pairs(3, size=12, seed=2)
    cfg = TrainConfig(epochs=2, lr=1e-3, network=SMALL, seed=5)
    train(data, cfg, out=tmp_path / "a.ckpt")
    train(data, cfg, out=tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    train(data, TrainConfig(epochs=2, lr=1e-3, network=SMALL, seed=6), out=tmp_path / "c.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() != (tmp_path / "c.ckpt").read_bytes()


def test_max_steps_and_batching():
    data = synthetic_pairs(4, size=12)
    assert train(data, TrainConfig(epochs=5, network=SMALL, max_steps=3)).steps == 3
    assert train(data, TrainConfig(epochs=2, batch=3, network=SMALL)).steps == 4


def test_non_finite_loss_aborts_with_step():
    good = synthetic_pairs(1, size=12)[0]
    bad = ImagePair(np.full_like(good.raw, np.nan), good.ref, "nan")
    with pytest.raises(NumericalError, match=r"step 0.*l2"):
        train([bad], TrainConfig(epochs=1, network=SMALL))
    with pytest.raises(DataError):
        train([], TrainConfig(network=SMALL))


def test_dataset_loss_matches_training_terms():
    data = synthetic_pairs(2, size=12)
    model = PDCFNet(SMALL)
    parts = dataset_loss(model, data)
    assert set(parts) == {"total", "l2", "ssim", "edge"}
    assert abs(parts["total"] - (parts["l2"] + parts["ssim"] + 0.05 * parts["edge"])) < 1e-12


def _write(path, rgb):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb).save(path)


def test_enhance_native_size_and_determinism(tmp_path, rng):
    model = PDCFNet(SMALL, seed=3, dtype=np.float32)
    checkpoint.save(tmp_path / "m.ckpt", model)
    _write(tmp_path / "in" / "wide.png", rng.integers(0, 256, (48, 64, 3)).astype(np.uint8))
    _write(tmp_path / "in" / "sq.png", rng.integers(0, 256, (20, 20, 3)).astype(np.uint8))
    first = enhance(tmp_path / "m.ckpt", tmp_path / "in", tmp_path / "o1")
    second = enhance(tmp_path / "m.ckpt", tmp_path / "in", tmp_path / "o2")
    assert [p.name for p in first] == ["sq.png", "wide.png"]
    assert read_image(tmp_path / "o1" / "wide.png").shape == (48, 64, 3)
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
    forced = enhance(tmp_path / "m.ckpt", tmp_path / "in" / "wide.png", tmp_path / "o3", size=16)
    assert read_image(forced[0]).shape == (16, 16, 3)


def test_enhance_empty_input(tmp_path):
    (tmp_path / "in").mkdir()
    with pytest.raises(DataError):
        enhance(PDCFNet(SMALL), tmp_path / "in", tmp_path / "out")
