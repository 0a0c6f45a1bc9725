"""Run configuration: model structure, training hyperparameters, presets."""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace

import yaml

__all__ = ["ModelConfig", "TrainConfig", "tiny_model", "paper_model", "load_train_config", "save_train_config"]


@dataclass
class ModelConfig:
    """Structural description of the compression model.

    channels = (c1, c2, c3, m, c5, c6): the three analysis stage widths,
    the latent width m, the hyper-analysis intermediate width, and the
    hyper latent width.
    """

    channels: tuple = (64, 64, 64, 320, 64, 192)
    rssm_depth: int = 1
    slices: int = 5
    state_dim: int = 8
    block_variant: str = "evssb_fdmb"
    seed: int = 0
    lrp: bool = True
    ffn_expansion: int = 2

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != 6:
            raise ValueError("channels must list six widths (c1, c2, c3, m, c5, c6)")
        if self.latent_channels % self.slices:
            raise ValueError(f"latent width {self.latent_channels} not divisible by {self.slices} slices")

    @property
    def latent_channels(self):
        return self.channels[3]

    @property
    def hyper_channels(self):
        return self.channels[5]

    def model_id(self) -> bytes:
        """8-byte hash identifying this configuration in bitstream headers."""
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()[:8]


def tiny_model(seed=0, block_variant="evssb_fdmb"):
    """Desk-scale configuration used by tests and demos."""
    return ModelConfig(
        channels=(8, 8, 8, 16, 8, 12),
        rssm_depth=1,
        slices=4,
        state_dim=4,
        block_variant=block_variant,
        seed=seed,
    )


def paper_model(seed=0):
    """Full-scale configuration with the published channel widths."""
    return ModelConfig(channels=(64, 64, 64, 320, 64, 192), seed=seed)


@dataclass
class TrainConfig:
    """Two-stage schedule and loss weights.

    Stage 1 optimizes rate + k * distortion; stage 2 fine-tunes with
    weights (lam, k1, k2, k3, k4) over rate / distortion / perceptual /
    style / adversarial terms and trains the discriminator from scratch.
    """

    stage: int = 1
    k: float = 0.0067
    lam: float = 1.0
    k1: float = 0.0004
    k2: float = 5.0
    k3: float = 2000.0
    k4: float = 0.8
    epochs: int = 120
    lr: float = 1e-4
    milestones: tuple = (110, 115)
    disc_lr: float = 1e-4
    disc_milestones: tuple = (30, 40)
    batch: int = 8
    crop: int = 256
    seed: int = 0
    max_steps: int = 0  # 0 = run the full epoch schedule
    dataset_dir: str = ""
    out_dir: str = "runs"
    init_checkpoint: str = ""  # stage-2 starts from a stage-1 checkpoint
    prior_provider: str = "stub"
    prior_weights_path: str = ""
    featnet_weights_path: str = ""
    log_every: int = 1
    checkpoint_every: int = 0  # 0 = final checkpoint only
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ValueError("stage must be 1 or 2")
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        self.milestones = tuple(self.milestones)
        self.disc_milestones = tuple(self.disc_milestones)
        seed_env = os.environ.get("ICISP_SEED")
        if seed_env is not None:
            self.seed = int(seed_env)
            self.model = replace(self.model, seed=int(seed_env))

    @staticmethod
    def stage2_defaults():
        return dict(stage=2, epochs=50, milestones=(40, 45), disc_milestones=(30, 40))


def load_train_config(path) -> TrainConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return TrainConfig(**data)


def save_train_config(cfg: TrainConfig, path):
    with open(path, "w") as fh:
        yaml.safe_dump(asdict(cfg), fh, sort_keys=False)
