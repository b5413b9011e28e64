"""Single-image generative modeling: train a multi-scale patch GAN on one
image, then sample diverse variants that keep the image's global structure.

Global structure is retained by self-attention blocks at the coarsest
scales; diversity is restored by smoothing the discriminator's real inputs
with a randomly-drawn Gaussian; generation quality is sharpened by feeding
each scale the previous discriminator's per-patch score map.
"""

from .config import (ConfigError, LossConfig, ModelConfig, PyramidConfig,
                     RunConfig, SAConfig, SmoothingSpec, TrainConfig)
from .attention import SelfAttention
from .metrics import (DiversityReport, FeatureExtractor, create_extractor,
                      diversity, frechet_distance, sifid)
from .networks import (FeedbackMap, ScaleDiscriminator, ScaleGenerator,
                       ScaleModel, build_scale_model)
from .pyramid import ImagePyramid, build_pyramid, plan_scales, resize, upsample
from .sampler import edit, generate, harmonize
from .smoothing import gaussian_kernel, sample_real, smooth
from .trainer import (Cascade, CheckpointError, TrainingDivergedError,
                      TrainState, compute_feedback, load_checkpoint,
                      reconstruct, save_checkpoint, train, train_scale)

__all__ = [
    "Cascade", "CheckpointError", "ConfigError", "DiversityReport",
    "FeatureExtractor", "FeedbackMap", "ImagePyramid", "LossConfig",
    "ModelConfig", "PyramidConfig", "RunConfig", "SAConfig",
    "ScaleDiscriminator", "ScaleGenerator", "ScaleModel", "SelfAttention",
    "SmoothingSpec", "TrainConfig", "TrainState", "TrainingDivergedError",
    "build_pyramid", "build_scale_model", "compute_feedback",
    "create_extractor", "diversity", "edit", "frechet_distance",
    "gaussian_kernel", "generate", "harmonize", "load_checkpoint",
    "plan_scales", "reconstruct", "resize", "sample_real", "save_checkpoint",
    "sifid", "smooth", "train", "train_scale", "upsample",
]
