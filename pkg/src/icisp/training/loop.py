"""Two-stage optimization: epoch-milestone LR halving, alternating
generator/discriminator updates, npz checkpoints with a config echo."""

import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from ..codec.model import CompressionModel
from ..config import ModelConfig, TrainConfig
from ..gan import SemanticDiscriminator, discriminator_hinge_loss
from ..priors import make_provider
from .data import make_batches
from .losses import make_featnet, stage1_loss, stage2_loss

__all__ = ["TrainingDiverged", "lr_at_epoch", "save_checkpoint", "load_checkpoint", "load_model", "train"]

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def lr_at_epoch(base_lr, milestones, epoch):
    """Base LR halved once for every milestone the (1-indexed) epoch has passed."""
    return base_lr * 0.5 ** sum(1 for m in milestones if epoch > m)


def save_checkpoint(path, model, step=0, train_cfg=None, disc=None):
    """Flat archive of named float arrays plus a structured-text config echo.

    Stage-1 checkpoints carry no discriminator arrays at all.
    """
    arrays = {f"model/{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    if disc is not None:
        arrays.update({f"disc/{k}": v.detach().cpu().numpy() for k, v in disc.state_dict().items()})
    meta = {
        "config": asdict(model.cfg),
        "seed": model.cfg.seed,
        "step": int(step),
        "train": asdict(train_cfg) if train_cfg is not None else None,
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Returns (meta dict, model arrays, disc arrays or None)."""
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["__meta__"][()]))
    model_arrays = {k[len("model/") :]: data[k] for k in data.files if k.startswith("model/")}
    disc_arrays = {k[len("disc/") :]: data[k] for k in data.files if k.startswith("disc/")}
    return meta, model_arrays, disc_arrays or None


def load_model(path) -> CompressionModel:
    meta, model_arrays, _ = load_checkpoint(path)
    model = CompressionModel(ModelConfig(**meta["config"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in model_arrays.items()})
    return model


def _load_into(module, arrays):
    module.load_state_dict({k: torch.from_numpy(v) for k, v in arrays.items()})


def _check_finite(value, model, out_dir, step):
    if not np.isfinite(value):
        snapshot = Path(out_dir) / f"diverged_step{step}.npz"
        save_checkpoint(snapshot, model, step=step)
        raise TrainingDiverged(f"non-finite loss {value} at step {step}; snapshot at {snapshot}")


def train(cfg: TrainConfig, log_fn=None):
    """Run one training stage; returns (checkpoint path, list of LossReports).

    Stage 1 optimizes the compression model alone.  Stage 2 initializes the
    compressor from `init_checkpoint`, builds the semantic-informed
    discriminator from scratch, and alternates single discriminator /
    generator steps on each batch.
    """
    torch.manual_seed(cfg.seed)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = CompressionModel(cfg.model)
    disc = None
    featnet = None
    if cfg.stage == 2:
        if not cfg.init_checkpoint:
            raise ValueError("stage 2 fine-tunes a stage-1 checkpoint; set init_checkpoint")
        meta, model_arrays, _ = load_checkpoint(cfg.init_checkpoint)
        if ModelConfig(**meta["config"]) != cfg.model:
            raise ValueError("init_checkpoint was trained with a different model config")
        _load_into(model, model_arrays)
        provider = make_provider(cfg.prior_provider, cfg.prior_weights_path, seed=cfg.seed)
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            disc = SemanticDiscriminator(cfg.model.latent_channels, provider)
        featnet = make_featnet(cfg.featnet_weights_path, seed=cfg.seed)

    opt = torch.optim.Adam((p for p in model.parameters() if p.requires_grad), lr=cfg.lr)
    disc_opt = (
        torch.optim.Adam((p for p in disc.parameters() if p.requires_grad), lr=cfg.disc_lr)
        if disc is not None
        else None
    )

    log_path = out_dir / "train_log.txt"
    reports = []
    step = 0
    with open(log_path, "w") as log_file:
        for epoch in range(1, cfg.epochs + 1):
            if cfg.max_steps and step >= cfg.max_steps:
                break
            for group in opt.param_groups:
                group["lr"] = lr_at_epoch(cfg.lr, cfg.milestones, epoch)
            if disc_opt is not None:
                for group in disc_opt.param_groups:
                    group["lr"] = lr_at_epoch(cfg.disc_lr, cfg.disc_milestones, epoch)

            for batch in make_batches(cfg.dataset_dir, cfg.crop, cfg.batch, cfg.seed + epoch):
                step += 1
                if cfg.stage == 1:
                    loss, report, _ = stage1_loss(batch, model, cfg, step=step)
                else:
                    # one shared generator forward; discriminator steps first on
                    # detached reconstructions, then the generator sees the
                    # updated critic
                    out = model(batch)
                    real = disc(batch, out["y_hat"], batch)
                    fake = disc(out["x_hat"].detach(), out["y_hat"], batch)
                    d_loss = discriminator_hinge_loss(real, fake)
                    disc_opt.zero_grad()
                    d_loss.backward()
                    disc_opt.step()
                    loss, report, _ = stage2_loss(batch, model, disc, featnet, cfg, step=step, out=out)

                _check_finite(report.total, model, out_dir, step)
                opt.zero_grad()
                loss.backward()
                opt.step()

                reports.append(report)
                if cfg.log_every and step % cfg.log_every == 0:
                    line = report.log_line()
                    log_file.write(line + "\n")
                    if log_fn is not None:
                        log_fn(line)
                if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    save_checkpoint(out_dir / f"ckpt_step{step:06d}.npz", model, step, cfg, disc)
                if cfg.max_steps and step >= cfg.max_steps:
                    break

    final = out_dir / "checkpoint.npz"
    save_checkpoint(final, model, step, cfg, disc)
    log.info("stage %d finished after %d steps; checkpoint at %s", cfg.stage, step, final)
    return final, reports
