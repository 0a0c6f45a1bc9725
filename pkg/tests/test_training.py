import dataclasses
import hashlib

import numpy as np
import pytest
import torch

from icisp.config import ModelConfig, TrainConfig, tiny_model
from icisp.training import (
    TrainingDiverged,
    load_checkpoint,
    load_model,
    lr_at_epoch,
    make_batches,
    save_checkpoint,
    synthesize_images,
    train,
)
from icisp.codec import CompressionModel


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    synthesize_images(root, count=12, size=80, seed=0)
    return root


def quick_cfg(dataset, out_dir, **kw):
    base = dict(
        stage=1,
        epochs=2,
        batch=2,
        crop=64,
        seed=0,
        max_steps=3,
        dataset_dir=str(dataset),
        out_dir=str(out_dir),
        model=tiny_model(seed=0),
    )
    base.update(kw)
    return TrainConfig(**base)


def test_synthesize_deterministic(tmp_path):
    a = synthesize_images(tmp_path / "a", 3, size=48, seed=5)
    b = synthesize_images(tmp_path / "b", 3, size=48, seed=5)
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    c = synthesize_images(tmp_path / "c", 1, size=48, seed=6)
    assert c[0].read_bytes() != a[0].read_bytes()


def test_make_batches_shapes_and_range(dataset):
    batch = next(make_batches(dataset, crop=64, batch=4, seed=1))
    assert batch.shape == (4, 3, 64, 64)
    assert batch.min() >= 0.0 and batch.max() <= 1.0


def test_make_batches_seeded_crops(dataset):
    a = list(make_batches(dataset, crop=64, batch=2, seed=3))
    b = list(make_batches(dataset, crop=64, batch=2, seed=3))
    assert len(a) == len(b) == 6
    for ba, bb in zip(a, b):
        assert torch.equal(ba, bb)
    c = next(make_batches(dataset, crop=64, batch=2, seed=4))
    assert not torch.equal(a[0], c)


def test_make_batches_skips_small_images(dataset, tmp_path, caplog):
    import shutil

    mixed = tmp_path / "mixed"
    mixed.mkdir()
    for p in list(dataset.iterdir())[:3]:
        shutil.copy(p, mixed / p.name)
    synthesize_images(mixed, 1, size=32, seed=9)
    small = mixed / "synth_0000.png"
    small.rename(mixed / "tiny.png")
    with caplog.at_level("WARNING"):
        batches = list(make_batches(mixed, crop=64, batch=3, seed=0))
    assert len(batches) == 1
    assert any("smaller than crop" in rec.message for rec in caplog.records)


def test_lr_schedule_paper_scale():
    assert lr_at_epoch(1e-4, (110, 115), 1) == pytest.approx(1e-4)
    assert lr_at_epoch(1e-4, (110, 115), 111) / lr_at_epoch(1e-4, (110, 115), 1) == pytest.approx(0.5)
    assert lr_at_epoch(1e-4, (110, 115), 116) == pytest.approx(2.5e-5)
    assert lr_at_epoch(1e-4, (40, 45), 41) == pytest.approx(5e-5)


def test_checkpoint_roundtrip(tmp_path):
    model = CompressionModel(tiny_model(seed=8))
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, step=17)
    meta, arrays, disc = load_checkpoint(path)
    assert meta["step"] == 17
    assert meta["seed"] == 8
    assert ModelConfig(**meta["config"]) == model.cfg
    assert disc is None
    back = load_model(path)
    for (ka, va), (kb, vb) in zip(sorted(model.state_dict().items()), sorted(back.state_dict().items())):
        assert ka == kb and torch.equal(va, vb)


def test_stage1_train_runs_and_is_deterministic(dataset, tmp_path):
    ckpt_a, reports_a = train(quick_cfg(dataset, tmp_path / "a"))
    ckpt_b, reports_b = train(quick_cfg(dataset, tmp_path / "b"))
    assert len(reports_a) == 3
    assert dataclasses.asdict(reports_a[0]) == dataclasses.asdict(reports_b[0])
    assert dataclasses.asdict(reports_a[-1]) == dataclasses.asdict(reports_b[-1])
    meta, arrays, disc = load_checkpoint(ckpt_a)
    assert disc is None  # stage-1 checkpoints carry no discriminator
    log_text = (tmp_path / "a" / "train_log.txt").read_text()
    assert log_text.startswith("step=1 total=")


def test_stage2_requires_init(dataset, tmp_path):
    with pytest.raises(ValueError, match="init_checkpoint"):
        train(quick_cfg(dataset, tmp_path / "x", stage=2, **{k: v for k, v in TrainConfig.stage2_defaults().items() if k != "stage"}))


def _hash_state(module):
    digest = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(p.detach().numpy().tobytes())
    return digest.hexdigest()


def test_stage2_train_smoke(dataset, tmp_path):
    ckpt1, _ = train(quick_cfg(dataset, tmp_path / "s1"))
    cfg2 = quick_cfg(dataset, tmp_path / "s2", stage=2, epochs=2, milestones=(40, 45), init_checkpoint=str(ckpt1))
    ckpt2, reports = train(cfg2)
    assert len(reports) == 3
    assert all(np.isfinite(r.total) for r in reports)
    assert reports[0].adversarial != 0.0 or reports[0].perceptual != 0.0
    meta, arrays, disc = load_checkpoint(ckpt2)
    assert disc is not None  # stage-2 checkpoints carry the discriminator
    # generator weights moved away from the stage-1 initialization
    model1 = load_model(ckpt1)
    model2 = load_model(ckpt2)
    assert _hash_state(model1) != _hash_state(model2)


def test_stage2_frozen_components_unchanged(dataset, tmp_path):
    from icisp.priors import StubPrior
    from icisp.training.losses import StubFeatureNet

    before_prior = _hash_state(StubPrior(seed=0))
    before_feat = _hash_state(StubFeatureNet(seed=0))
    ckpt1, _ = train(quick_cfg(dataset, tmp_path / "s1"))
    train(quick_cfg(dataset, tmp_path / "s2", stage=2, epochs=1, init_checkpoint=str(ckpt1)))
    assert _hash_state(StubPrior(seed=0)) == before_prior
    assert _hash_state(StubFeatureNet(seed=0)) == before_feat


def test_nan_aborts_with_snapshot(dataset, tmp_path):
    cfg = quick_cfg(dataset, tmp_path / "nan")
    # a poisoned weight drives the first loss non-finite
    import icisp.training.loop as loop_mod

    original = loop_mod.CompressionModel

    class Poisoned(original):
        def __init__(self, mcfg):
            super().__init__(mcfg)
            with torch.no_grad():
                self.analysis.net[0].conv1.weight.fill_(float("nan"))

    loop_mod.CompressionModel = Poisoned
    try:
        with pytest.raises(TrainingDiverged, match="non-finite"):
            train(cfg)
    finally:
        loop_mod.CompressionModel = original
    snapshots = list((tmp_path / "nan").glob("diverged_step*.npz"))
    assert len(snapshots) == 1


def test_seed_env_override(dataset, tmp_path, monkeypatch):
    monkeypatch.setenv("ICISP_SEED", "123")
    cfg = quick_cfg(dataset, tmp_path / "env")
    assert cfg.seed == 123
    assert cfg.model.seed == 123
