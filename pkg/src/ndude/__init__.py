"""Discrete denoisers for binary images and DNA reads: count-based DUDE and neural DUDE."""

from .channel import ChannelModel, LossModel, build_bsc, build_qsc, hamming, pseudo_labels
from .context import ContextSpec
from .denoiser import denoise_with_model, dude_denoise
from .nn import Head, MlpModel, build_model, load_model, save_model
from .training import TrainingConfig, finetune, train_pseudo, train_supervised, train_supervised_blind

__version__ = "0.1.0"
