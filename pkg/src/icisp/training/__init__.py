from .data import list_images, load_image, make_batches, save_image, synthesize_images
from .gradcheck import REGISTRY, GradCheckReport, grad_check
from .losses import (
    LossReport,
    StubFeatureNet,
    distortion_mse255,
    gram_matrix,
    make_featnet,
    perceptual_loss,
    stage1_loss,
    stage2_loss,
    style_loss,
)
from .loop import TrainingDiverged, load_checkpoint, load_model, lr_at_epoch, save_checkpoint, train
