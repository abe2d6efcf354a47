"""Video inpainting building blocks: motion-capture attention, latent
diffusion with inpainting conditioning, instance-aware mask sampling and
task-vector checkpoint merging."""

__version__ = "0.1.0"
