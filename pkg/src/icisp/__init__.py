"""Lightweight perceptual image codec with state-space transforms, a
hyperprior entropy model producing real bitstreams, and semantic-informed
adversarial training."""

__version__ = "0.1.0"

from .config import ModelConfig, TrainConfig, paper_model, tiny_model
