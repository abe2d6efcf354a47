"""AdamW, synthetic training clips and the toy training loop."""
from __future__ import annotations

import configparser
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import InvalidArgumentError
from ..tensor import Tape, Tensor
from .codec import LATENT_CHANNELS, ToyTextEncoder
from .conditioning import TrainingExample, training_loss
from .denoiser import ToyDenoiser
from .schedule import NoiseSchedule, build_schedule

logger = logging.getLogger(__name__)


class AdamW:
    """Decoupled weight decay Adam over a dict of named arrays.

    Moments are kept in float64; parameters keep their own dtype.
    """

    def __init__(self, lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 1e-2):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        self.step_count += 1
        bc1 = 1.0 - self.b1 ** self.step_count
        bc2 = 1.0 - self.b2 ** self.step_count
        updated = {}
        for name, p in params.items():
            g = grads[name].astype(np.float64)
            m = self._m.get(name, np.zeros_like(g))
            v = self._v.get(name, np.zeros_like(g))
            m = self.b1 * m + (1.0 - self.b1) * g
            v = self.b2 * v + (1.0 - self.b2) * g * g
            self._m[name], self._v[name] = m, v
            p64 = p.astype(np.float64)
            p64 = p64 - self.lr * self.weight_decay * p64
            p64 = p64 - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            updated[name] = p64.astype(p.dtype)
        return updated


def synthetic_example(
    seed: int,
    frames: int = 8,
    latent_size: tuple[int, int] = (16, 12),
    prompt: str = "a red ball rolls left",
    d_text: int = 8,
    dtype=np.float32,
) -> TrainingExample:
    """A moving-grating latent clip with a moving rectangular hole."""
    rng = np.random.default_rng(seed)
    w, h = latent_size
    xs, ys = np.meshgrid(np.arange(w), np.arange(h), indexing="ij")
    z0 = np.empty((frames, LATENT_CHANNELS, w, h))
    freq = rng.uniform(0.2, 0.6, size=(LATENT_CHANNELS, 2))
    phase = rng.uniform(0, 2 * np.pi, size=LATENT_CHANNELS)
    for f in range(frames):
        for c in range(LATENT_CHANNELS):
            z0[f, c] = np.sin(freq[c, 0] * (xs - f) + freq[c, 1] * ys + phase[c])
    mask = np.zeros((frames, 1, w, h))
    rw, rh = max(1, w // 4), max(1, h // 4)
    x0, y0 = rng.integers(0, w - rw + 1), rng.integers(0, h - rh + 1)
    for f in range(frames):
        xf = min(w - rw, x0 + f // 2)
        mask[f, 0, xf:xf + rw, y0:y0 + rh] = 1.0
    text = ToyTextEncoder(d_text=d_text).encode(prompt, dtype)
    return TrainingExample(
        z0=Tensor(z0, dtype=dtype),
        mask=Tensor(mask, dtype=dtype),
        z_masked=Tensor(z0 * (1.0 - mask), dtype=dtype),
        text=text,
    )


@dataclass
class TrainResult:
    denoiser: ToyDenoiser
    losses: list[float]

    def loss_csv(self) -> str:
        return "step,loss\n" + "".join(f"{i},{loss!r}\n" for i, loss in enumerate(self.losses))


def train_toy(
    denoiser: ToyDenoiser,
    dataset: Sequence[TrainingExample],
    steps: int,
    lr: float = 1e-4,
    seed: int = 0,
    sched: NoiseSchedule | None = None,
    fixed_timestep: int | None = None,
    resample_noise: bool = True,
    weight_decay: float = 1e-2,
) -> TrainResult:
    """Minimize the noise-prediction loss with AdamW, one example per step.

    Examples are visited round-robin. Each step draws a timestep and noise
    from the seeded stream; ``resample_noise=False`` draws them once per
    example and reuses them (a fixed-batch overfit run) and
    ``fixed_timestep`` pins the timestep.
    """
    if not dataset:
        raise InvalidArgumentError("dataset is empty")
    sched = sched or build_schedule()
    rng = np.random.default_rng(seed)
    opt = AdamW(lr=lr, weight_decay=weight_decay)
    cached: dict[int, tuple[int, Tensor]] = {}
    losses = []
    for step in range(steps):
        idx = step % len(dataset)
        example = dataset[idx]
        if resample_noise or idx not in cached:
            t = fixed_timestep if fixed_timestep is not None else int(rng.integers(sched.T))
            eps = Tensor(rng.standard_normal(example.z0.shape), dtype=example.z0.dtype)
            cached[idx] = (t, eps)
        t, eps = cached[idx]

        named = denoiser.named_parameters()
        with Tape() as tape:
            tape.watch(*named.values())
            loss = training_loss(denoiser, example, t, eps, sched)
        grads = tape.backward(loss.id)
        value = loss.item()
        if not math.isfinite(value):
            raise FloatingPointError(f"loss became {value} at step {step}")
        losses.append(value)
        new = opt.step({k: v.data for k, v in named.items()}, {k: grads[v.id] for k, v in named.items()})
        denoiser = denoiser.with_parameters({k: Tensor(v) for k, v in new.items()})
        if step % 50 == 0:
            logger.debug("step %d loss %.6f", step, value)
    return TrainResult(denoiser, losses)


@dataclass
class TrainConfig:
    """Flat ``key = value`` run configuration."""

    steps: int = 500
    lr: float = 1e-4
    seed: int = 0
    frames: int = 8
    latent_w: int = 16
    latent_h: int = 12
    d_model: int = 8
    d_text: int = 8
    heads: int = 8
    target_w: int = 4
    target_h: int = 3
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    weight_decay: float = 1e-2
    fixed_timestep: int = -1   # -1: draw per step
    resample_noise: bool = True
    prompt: str = "a red ball rolls left"
    clip_seed: int = 0

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str
        parser.read_string("[run]\n" + text)
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, raw in parser["run"].items():
            if key not in known:
                raise InvalidArgumentError(f"unknown config key {key!r}")
            kind = known[key].type
            try:
                if kind in ("bool", bool):
                    values[key] = parser["run"].getboolean(key)
                elif kind in ("int", int):
                    values[key] = int(raw)
                elif kind in ("float", float):
                    values[key] = float(raw)
                else:
                    values[key] = raw
            except ValueError as exc:
                raise InvalidArgumentError(f"bad value for {key}: {raw!r}") from exc
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    def schedule(self) -> NoiseSchedule:
        return build_schedule(self.timesteps, self.beta_start, self.beta_end)
