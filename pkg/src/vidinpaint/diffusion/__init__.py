"""Latent-diffusion inpainting: schedule, conditioning, sampling, training."""
from .codec import LATENT_CHANNELS, ToyCodec, ToyTextEncoder, null_embedding
from .conditioning import (
    INPUT_CHANNELS,
    DenoiserInput,
    LatentClip,
    MaskSequence,
    TrainingExample,
    assemble_inpaint_input,
    cfg_epsilon,
    resize_mask,
    training_loss,
)
from .denoiser import ToyDenoiser, init_toy_denoiser, timestep_embedding
from .sampling import DEFAULT_GUIDANCE, DEFAULT_STEPS, InpaintCondition, ddim_sample, ddim_timesteps
from .schedule import NoiseSchedule, build_schedule, forward_noise, noise_at
from .training import AdamW, TrainConfig, TrainResult, synthetic_example, train_toy

__all__ = [
    "LATENT_CHANNELS", "INPUT_CHANNELS", "ToyCodec", "ToyTextEncoder", "null_embedding",
    "DenoiserInput", "LatentClip", "MaskSequence", "TrainingExample", "assemble_inpaint_input",
    "cfg_epsilon", "resize_mask", "training_loss", "ToyDenoiser", "init_toy_denoiser",
    "timestep_embedding", "DEFAULT_GUIDANCE", "DEFAULT_STEPS", "InpaintCondition", "ddim_sample",
    "ddim_timesteps", "NoiseSchedule", "build_schedule", "forward_noise", "noise_at", "AdamW",
    "TrainConfig", "TrainResult", "synthetic_example", "train_toy",
]
