"""``vidinpaint`` command line.

Exit codes: 0 success, 1 validation, 2 I/O, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text
from .errors import VidInpaintError

log = logging.getLogger("vidinpaint")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; 2 is reserved for I/O here
        raise UsageError(f"{self.prog}: {message}")


def _require_files(*paths: Path) -> None:
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(f"no such file: {p}")


def _require_parent(path: Path) -> None:
    if not path.parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")


def _echo(args: argparse.Namespace) -> None:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    log.info("resolved config: %s", json.dumps(resolved, sort_keys=True))
    if "seed" in resolved:
        log.info("seed: %s", resolved["seed"])


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# merge ----------------------------------------------------------------------

def cmd_merge(args) -> int:
    from .merge import MergeRecipe, load_checkpoint, merge_from_models, pad_input_channels, save_checkpoint

    _require_files(args.base, args.inpaint, args.personalized)
    _require_parent(args.out)
    base, ip, p = (load_checkpoint(x) for x in (args.base, args.inpaint, args.personalized))
    if args.pad_layer:
        # generation-side models get the 4 -> 9 input channels; the inpainting model already has them
        base = pad_input_channels(base, args.pad_layer, 4, 9) if base[args.pad_layer].shape[1] == 4 else base
        p = pad_input_channels(p, args.pad_layer, 4, 9) if args.pad_layer in p and p[args.pad_layer].shape[1] == 4 else p
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = merge_from_models(base, ip, p, MergeRecipe(args.alpha, args.beta))
    for w in caught:
        log.warning("%s", w.message)
    report = args.report or args.out.with_name(args.out.name + ".unmatched.tsv")
    save_checkpoint(result.checkpoint, args.out)
    atomic_write_text(report, "side\tmodel\tname\n" + "".join(line + "\n" for line in result.report_lines()))
    log.info("wrote %s (%d tensors), unmatched report %s", args.out, len(result.checkpoint), report)
    return EXIT_OK


# mask-gen -------------------------------------------------------------------

MODE_PROBS = {"instance": (1.0, 0.0, 0.0), "random": (0.0, 1.0, 0.0)}


def cmd_mask_gen(args) -> int:
    from .regions import DetectionAnnotation, rasterize_box, sample_training_clip, write_mask_frames

    _require_files(args.annotations)
    ann = DetectionAnnotation.load(args.annotations)
    probs = MODE_PROBS.get(args.mode, args.probs)
    w, h = args.size if args.size else ann.resolution
    f = args.frames or ann.num_frames
    rng = np.random.default_rng(args.seed)
    sample = sample_training_clip(ann, (f, w, h), rng, probs=probs, score_threshold=args.score_threshold)
    masks = sample.masks.m.data[:, 0] > 0
    args.out_dir.mkdir(parents=True, exist_ok=True)
    paths = write_mask_frames(args.out_dir, masks)
    manifest = {
        "kind": sample.kind,
        "drawn_kind": sample.drawn_kind,
        "prompt": sample.prompt,
        "phrase": sample.phrase,
        "seed": args.seed,
        "size": [w, h],
        "boxes": [list(b) for b in sample.boxes] if sample.boxes else None,
        "mask_files": [p.name for p in paths],
    }
    atomic_write_text(args.out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("kind=%s frames=%d -> %s", sample.kind, f, args.out_dir)
    if args.verify:
        if sample.kind == "precise":
            bad = [i for i, (m, b) in enumerate(zip(masks, sample.boxes)) if (rasterize_box(b, (w, h)) & ~m).any()]
            if bad:
                log.error("masks do not cover their boxes on frames %s", bad)
                return EXIT_VALIDATION
            log.info("verify: all %d masks cover their boxes", f)
        else:
            log.info("verify: %s sample has no boxes to check", sample.kind)
    return EXIT_OK


# train-toy / sample ------------------------------------------------------------

def _model_and_clip(cfg):
    from .diffusion import init_toy_denoiser, synthetic_example

    den = init_toy_denoiser(cfg.seed, d_model=cfg.d_model, d_text=cfg.d_text, heads=cfg.heads,
                            target=(cfg.target_w, cfg.target_h))
    ex = synthetic_example(cfg.clip_seed, frames=cfg.frames, latent_size=(cfg.latent_w, cfg.latent_h),
                           prompt=cfg.prompt, d_text=cfg.d_text)
    return den, ex


def _load_config(path: Path | None):
    from .diffusion import TrainConfig

    if path is None:
        return TrainConfig()
    _require_files(path)
    return TrainConfig.from_file(path)


def cmd_train_toy(args) -> int:
    from dataclasses import replace

    from .diffusion import train_toy
    from .merge import save_checkpoint

    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    log.info("train config:\n%s", cfg.to_text().rstrip())
    den, ex = _model_and_clip(cfg)
    res = train_toy(den, [ex], cfg.steps, lr=cfg.lr, seed=cfg.seed, sched=cfg.schedule(),
                    fixed_timestep=None if cfg.fixed_timestep < 0 else cfg.fixed_timestep,
                    resample_noise=cfg.resample_noise, weight_decay=cfg.weight_decay)
    save_checkpoint({k: v.data for k, v in res.denoiser.named_parameters().items()}, args.out_dir / "params.ckpt")
    atomic_write_text(args.out_dir / "loss.csv", res.loss_csv())
    atomic_write_text(args.out_dir / "config.txt", cfg.to_text())
    log.info("loss %.6f -> %.6f over %d steps", res.losses[0], res.losses[-1], len(res.losses))
    return EXIT_OK


def cmd_sample(args) -> int:
    from .diffusion import InpaintCondition, ToyCodec, ToyTextEncoder, ddim_sample
    from .merge import load_checkpoint, save_checkpoint
    from .tensor import Tensor

    _require_files(args.ckpt)
    cfg_path = args.config or (args.ckpt.parent / "config.txt" if (args.ckpt.parent / "config.txt").is_file() else None)
    cfg = _load_config(cfg_path)
    den, ex = _model_and_clip(cfg)
    den = den.with_parameters({k: Tensor(v) for k, v in load_checkpoint(args.ckpt).items()})
    text = ToyTextEncoder(d_text=cfg.d_text).encode(args.prompt if args.prompt is not None else cfg.prompt)
    cond = InpaintCondition(ex.mask, ex.z_masked, text)
    out = ddim_sample(den, cond, cfg.schedule(), steps=args.steps, cfg=args.cfg, seed=args.seed)
    z = out.z.data
    if not np.isfinite(z).all():
        raise FloatingPointError("sampled latents contain non-finite values")
    frames = ToyCodec().decode(out.z)
    args.out.mkdir(parents=True, exist_ok=True)
    save_checkpoint({"latents": z}, args.out / "latents.ckpt")
    save_checkpoint({"frames": frames.data}, args.out / "frames.ckpt")
    log.info("wrote latents %s and frames %s to %s", z.shape, frames.shape, args.out)
    return EXIT_OK


# analyze / sweep / cost-report ----------------------------------------------------

def cmd_analyze(args) -> int:
    from .merge import layer_similarity_report, load_checkpoint

    _require_files(args.a, args.b)
    _require_parent(args.out)
    rep = layer_similarity_report(load_checkpoint(args.a), load_checkpoint(args.b))
    atomic_write_text(args.out, rep.grid_csv())
    if args.rows:
        atomic_write_text(args.rows, rep.rows_csv())
    if rep.unmatched:
        log.warning("%d tensors present in only one checkpoint", len(rep.unmatched))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .merge import load_checkpoint, sensitivity_sweep, task_vector

    _require_files(args.base, args.inpaint, args.personalized)
    _require_parent(args.out)
    base, ip, p = (load_checkpoint(x) for x in (args.base, args.inpaint, args.personalized))
    res = sensitivity_sweep(base, task_vector(ip, base), task_vector(p, base), args.alphas, args.betas)
    atomic_write_text(args.out, res.to_csv())
    failed = sum(c.error is not None for c in res.cells)
    if failed:
        log.warning("%d of %d cells failed", failed, len(res.cells))
    return EXIT_OK


def cmd_cost_report(args) -> int:
    from .motion import attention_cost_report

    rep = attention_cost_report(args.b, args.f, args.c, args.w1, args.h1, tuple(args.target), args.l_text, args.heads)
    sys.stdout.write(rep.to_csv() if args.csv else rep.format() + "\n")
    return EXIT_OK


# wiring -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .diffusion import DEFAULT_GUIDANCE, DEFAULT_STEPS
    from .regions import DEFAULT_PROBS, DEFAULT_SCORE_THRESHOLD

    ap = _Parser(prog="vidinpaint", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("merge", help="blend inpainting and personalized checkpoints into a base")
    m.add_argument("--base", type=Path, required=True)
    m.add_argument("--inpaint", type=Path, required=True)
    m.add_argument("--personalized", type=Path, required=True)
    m.add_argument("--alpha", type=float, default=1.0)
    m.add_argument("--beta", type=float, default=1.0)
    m.add_argument("--pad-layer", default=None, help="input conv to zero-pad from 4 to 9 channels")
    m.add_argument("--out", type=Path, required=True)
    m.add_argument("--report", type=Path, default=None)
    m.set_defaults(func=cmd_merge)

    g = sub.add_parser("mask-gen", help="sample a training mask sequence from an annotation file")
    g.add_argument("--annotations", type=Path, required=True)
    g.add_argument("--mode", choices=("sample", "instance", "random"), default="sample")
    g.add_argument("--probs", type=_floats, default=DEFAULT_PROBS)
    g.add_argument("--score-threshold", type=float, default=DEFAULT_SCORE_THRESHOLD)
    g.add_argument("--size", type=int, nargs=2, metavar=("W", "H"), default=None)
    g.add_argument("--frames", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", type=Path, required=True)
    g.add_argument("--verify", action="store_true", help="check box coverage of precise masks")
    g.set_defaults(func=cmd_mask_gen)

    t = sub.add_parser("train-toy", help="fit the toy denoiser on a synthetic clip")
    t.add_argument("--config", type=Path, default=None)
    t.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    t.add_argument("--out-dir", type=Path, required=True)
    t.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("sample", help="DDIM-inpaint the synthetic clip with a trained toy denoiser")
    s.add_argument("--ckpt", type=Path, required=True)
    s.add_argument("--config", type=Path, default=None)
    s.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    s.add_argument("--cfg", type=float, default=DEFAULT_GUIDANCE)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--prompt", default=None)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_sample)

    a = sub.add_parser("analyze", help="per-layer cosine similarity of two checkpoints")
    a.add_argument("--a", type=Path, required=True)
    a.add_argument("--b", type=Path, required=True)
    a.add_argument("--out", type=Path, required=True)
    a.add_argument("--rows", type=Path, default=None, help="also write per-tensor rows")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("sweep", help="alpha/beta grid of merged-checkpoint Frobenius norms")
    w.add_argument("--base", type=Path, required=True)
    w.add_argument("--inpaint", type=Path, required=True)
    w.add_argument("--personalized", type=Path, required=True)
    w.add_argument("--alphas", type=_floats, default=None)
    w.add_argument("--betas", type=_floats, default=None)
    w.add_argument("--out", type=Path, required=True)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("cost-report", help="attention map sizes for one motion block")
    for name, default in (("b", 1), ("f", 16), ("c", 320), ("w1", 8), ("h1", 8), ("l-text", 77), ("heads", 1)):
        c.add_argument(f"--{name}", type=int, default=default)
    c.add_argument("--target", type=int, nargs=2, metavar=("W", "H"), default=(4, 4))
    c.add_argument("--csv", action="store_true")
    c.set_defaults(func=cmd_cost_report)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    log.setLevel(level)
    _echo(args)
    try:
        return args.func(args)
    except (FloatingPointError, OverflowError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (VidInpaintError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
