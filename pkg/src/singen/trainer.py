"""Coarse-to-fine training: one scale at a time, frozen afterwards.

Each epoch draws a fresh sample chain from the coarsest trained scale down
to the scale above the one in training; the upsampled sample, scaled noise,
and the upsampled score map of the previous scale's discriminator on that
sample form the generator input. The discriminator sees a freshly smoothed
real image at attention scales and the raw one elsewhere. A parallel
zero-noise path (a fixed noise map at the coarsest scale, zero noise below)
carries the reconstruction image upward; its error against the
sigma_rec-smoothed real sets the next scale's noise amplitude.

All randomness flows through per-scale generators derived from the run
seed, so full runs and resumed runs are bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import optim

from . import image_io
from .config import RunConfig
from .losses import d_loss, g_loss
from .networks import (FeedbackMap, ScaleModel, build_scale_model,
                       spatial_noise)
from .pyramid import ImagePyramid, build_pyramid, resample, upsample
from .smoothing import reconstruction_target, sample_real


class TrainingDivergedError(RuntimeError):
    """A loss went non-finite; the scale is aborted, prior checkpoints stand."""


class CheckpointError(RuntimeError):
    """A run directory is missing, corrupt, or from a different config."""


def derive_seed(seed: int, tag: str) -> int:
    """Stable sub-seed for one purpose (model init, scale training, z_rec)."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _rng(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed)


@dataclass
class TrainState:
    """Mutable bookkeeping shared across scales of one run."""

    seed: int
    trained: set[int] = field(default_factory=set)
    z_rec_seed: int | None = None
    x_rec: dict[int, torch.Tensor] = field(default_factory=dict)
    rec_feedback: dict[int, torch.Tensor | None] = field(default_factory=dict)


@dataclass
class Cascade:
    """A (possibly partially) trained run: config, pyramid, per-scale models."""

    cfg: RunConfig
    pyramid: ImagePyramid
    models: list[ScaleModel | None]
    state: TrainState

    @property
    def coarsest_index(self) -> int:
        return self.pyramid.coarsest_index

    @property
    def complete(self) -> bool:
        return self.state.trained == set(range(len(self.models)))

    def require_complete(self) -> None:
        if not self.complete:
            missing = sorted(set(range(len(self.models))) - self.state.trained)
            raise RuntimeError(f"run is not fully trained; missing scales {missing}")

    def z_rec(self) -> torch.Tensor:
        if self.state.z_rec_seed is None:
            raise RuntimeError("coarsest scale not trained yet; no z_rec")
        dims = self.pyramid.dims(self.coarsest_index)
        return spatial_noise(dims, _rng(self.state.z_rec_seed), shared_across_channels=True)


def compute_feedback(model_above: ScaleModel, image: torch.Tensor,
                     target_dims: tuple[int, int]) -> FeedbackMap:
    """Score map of the scale-above discriminator, upsampled to the
    consuming scale's dims."""
    if not model_above.trained:
        raise RuntimeError(f"scale {model_above.scale_index} is not trained; "
                           "cannot compute feedback from it")
    with torch.no_grad():
        scores = model_above.discriminator(image)
    return FeedbackMap(scores=upsample(scores, target_dims).detach(),
                       source_scale=model_above.scale_index)


@torch.no_grad()
def run_chain(models: list[ScaleModel | None], dims: list[tuple[int, int]],
              rng: torch.Generator, *, down_to: int = 0,
              source: torch.Tensor | None = None, start_scale: int | None = None,
              noise_scale: float = 1.0) -> torch.Tensor:
    """Run frozen scales from the top down to `down_to`, returning the sample
    at that scale.

    Unconditional mode (source is None) starts from noise at the coarsest
    scale. With `source`, the chain instead enters at `start_scale`, using
    the area-downsampled source as the prior there and the scale-above
    discriminator's opinion of the downsampled source as feedback.
    """
    coarsest = len(models) - 1
    if source is None:
        model = models[coarsest]
        z = spatial_noise(dims[coarsest], rng, shared_across_channels=True)
        x = model.generator(model.noise_amp * noise_scale * z)
        current = coarsest - 1
    else:
        if start_scale is None or not 0 <= start_scale < coarsest:
            raise ValueError(f"start_scale must be in [0, {coarsest - 1}], got {start_scale}")
        model = models[start_scale]
        base = resample(source, dims[start_scale])
        fb = None
        if model.has_feedback:
            above = resample(source, dims[start_scale + 1])
            fb = compute_feedback(models[start_scale + 1], above, dims[start_scale]).scores
        z = spatial_noise(dims[start_scale], rng)
        x = model.generator(base + model.noise_amp * noise_scale * z,
                            prior=base, feedback=fb)
        current = start_scale - 1
    for n in range(current, down_to - 1, -1):
        model = models[n]
        prior = upsample(x, dims[n])
        fb = None
        if model.has_feedback:
            fb = compute_feedback(models[n + 1], x, dims[n]).scores
        z = spatial_noise(dims[n], rng)
        x = model.generator(prior + model.noise_amp * noise_scale * z,
                            prior=prior, feedback=fb)
    return x


def _check_order(n: int, coarsest: int, models: list[ScaleModel | None],
                 state: TrainState) -> None:
    if n in state.trained:
        raise RuntimeError(f"scale {n} is already trained")
    if not 0 <= n <= coarsest:
        raise RuntimeError(f"scale {n} out of range 0..{coarsest}")
    untrained_above = [k for k in range(n + 1, coarsest + 1)
                       if models[k] is None or not models[k].trained]
    if untrained_above:
        raise RuntimeError(
            f"scales must train coarse-to-fine; scale {n} requires trained "
            f"scales {untrained_above}")


def train_scale(n: int, pyramid: ImagePyramid, models: list[ScaleModel | None],
                cfg: RunConfig, state: TrainState, log=None) -> ScaleModel:
    """Train scale n for cfg.train.epochs updates, then freeze it and record
    its reconstruction image for the scale below."""
    coarsest = pyramid.coarsest_index
    _check_order(n, coarsest, models, state)
    tc = cfg.train
    dims = pyramid.all_dims()
    real = pyramid[n]

    model = build_scale_model(n, coarsest, cfg, _rng(derive_seed(state.seed, f"init/{n}")))
    rng = _rng(derive_seed(state.seed, f"train/{n}"))

    # Fixed reconstruction-path inputs for this scale.
    if n == coarsest:
        if state.z_rec_seed is None:
            state.z_rec_seed = derive_seed(state.seed, "z_rec")
        z_rec = spatial_noise(dims[n], _rng(state.z_rec_seed), shared_across_channels=True)
        rec_prior = rec_fb = None
        model.noise_amp = 1.0
    else:
        z_rec = None
        rec_prior = upsample(state.x_rec[n + 1], dims[n])
        rmse = torch.sqrt(F.mse_loss(rec_prior, real)).item()
        model.noise_amp = tc.base_noise_amp * rmse
        rec_fb = None
        if model.has_feedback:
            rec_fb = compute_feedback(models[n + 1], state.x_rec[n + 1], dims[n]).scores
    target_rec = reconstruction_target(real, cfg.smoothing) if model.has_sa else real

    opt_g = optim.Adam(model.generator.parameters(), lr=tc.lr_g, betas=(tc.beta1, tc.beta2))
    opt_d = optim.Adam(model.discriminator.parameters(), lr=tc.lr_d, betas=(tc.beta1, tc.beta2))
    milestone = max(1, int(tc.lr_milestone_frac * tc.epochs))
    sched_g = optim.lr_scheduler.MultiStepLR(opt_g, milestones=[milestone], gamma=tc.lr_gamma)
    sched_d = optim.lr_scheduler.MultiStepLR(opt_d, milestones=[milestone], gamma=tc.lr_gamma)

    def make_fake() -> torch.Tensor:
        if n == coarsest:
            return model.generator(gen_noise)
        return model.generator(prior + model.noise_amp * gen_noise,
                               prior=prior, feedback=fb)

    def make_fake_rec() -> torch.Tensor:
        if n == coarsest:
            return model.generator(z_rec)
        return model.generator(rec_prior, prior=rec_prior, feedback=rec_fb)

    for epoch in range(tc.epochs):
        # Fresh sample path through the frozen scales above.
        if n == coarsest:
            gen_noise = spatial_noise(dims[n], rng, shared_across_channels=True)
            prior = fb = None
        else:
            sample_above = run_chain(models, dims, rng, down_to=n + 1)
            prior = upsample(sample_above, dims[n])
            fb = None
            if model.has_feedback:
                fb = compute_feedback(models[n + 1], sample_above, dims[n]).scores
            gen_noise = spatial_noise(dims[n], rng)

        for _ in range(tc.d_steps):
            real_in = sample_real(real, cfg.smoothing, rng) if model.has_sa else real
            with torch.no_grad():
                fake = make_fake()
            loss_d, d_parts = d_loss(model.discriminator, real_in, fake,
                                     cfg.loss.lambda_gp, rng, return_parts=True)
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()

        for _ in range(tc.g_steps):
            fake = make_fake()
            fake_rec = make_fake_rec()
            loss_g, g_parts = g_loss(model.discriminator, fake, fake_rec,
                                     target_rec, cfg.loss.alpha, return_parts=True)
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

        sched_d.step()
        sched_g.step()

        record = {"scale": n, "epoch": epoch, "d_loss": loss_d.item(),
                  "g_loss": loss_g.item(), **d_parts, **g_parts,
                  "noise_amp": model.noise_amp}
        if not all(math.isfinite(v) for v in record.values()):
            raise TrainingDivergedError(
                f"non-finite loss at scale {n}, epoch {epoch}: {record}")
        if log is not None:
            log(record)

    model.freeze()
    with torch.no_grad():
        state.x_rec[n] = make_fake_rec().detach().clone()
    state.rec_feedback[n] = rec_fb
    state.trained.add(n)
    models[n] = model
    return model


@torch.no_grad()
def reconstruct(cascade: Cascade, down_to: int = 0) -> torch.Tensor:
    """Re-run the zero-noise reconstruction path through trained scales."""
    models, dims = cascade.models, cascade.pyramid.all_dims()
    for n in range(cascade.coarsest_index, down_to - 1, -1):
        if models[n] is None or not models[n].trained:
            raise RuntimeError(f"scale {n} is not trained")
    x = models[cascade.coarsest_index].generator(cascade.z_rec())
    for n in range(cascade.coarsest_index - 1, down_to - 1, -1):
        model = models[n]
        prior = upsample(x, dims[n])
        fb = None
        if model.has_feedback:
            fb = compute_feedback(models[n + 1], x, dims[n]).scores
        x = model.generator(prior, prior=prior, feedback=fb)
    return x.detach()


def train(image: torch.Tensor, cfg: RunConfig, run_dir: str | Path | None = None,
          log=None) -> Cascade:
    """Full coarse-to-fine training of a single image."""
    pyramid = build_pyramid(image, cfg.pyramid)
    cascade = Cascade(cfg=cfg, pyramid=pyramid,
                      models=[None] * len(pyramid),
                      state=TrainState(seed=cfg.train.seed))
    return continue_training(cascade, run_dir=run_dir, log=log)


def continue_training(cascade: Cascade, run_dir: str | Path | None = None,
                      log=None) -> Cascade:
    """Train every not-yet-trained scale, checkpointing after each one."""
    run_dir = Path(run_dir) if run_dir is not None else None
    log_file = None
    if run_dir is not None:
        _init_run_dir(run_dir, cascade)
        log_file = (run_dir / "log.jsonl").open("a")

    def emit(record: dict) -> None:
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")
        if log is not None:
            log(record)

    try:
        for n in range(cascade.coarsest_index, -1, -1):
            if n in cascade.state.trained:
                continue
            train_scale(n, cascade.pyramid, cascade.models, cascade.cfg,
                        cascade.state, log=emit)
            if run_dir is not None:
                log_file.flush()
                _save_scale(run_dir, cascade, n)
                _save_manifest(run_dir, cascade)
    finally:
        if log_file is not None:
            log_file.close()
    return cascade


# --- run-directory layout ---------------------------------------------------
#   config.copy          flat JSON config
#   pyramid/level_{i}.png  8-bit previews of each level
#   pyramid/levels.pt    exact float levels (lossless resume)
#   scale_{n}/G.bin      generator state_dict
#   scale_{n}/D.bin      discriminator state_dict
#   scale_{n}/meta       JSON: noise_amp, config hash, z_rec seed at scale N
#   log.jsonl            one line per epoch
#   manifest             JSON: seed, config hash, trained scales, completeness


def _init_run_dir(run_dir: Path, cascade: Cascade) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = run_dir / "config.copy"
    if cfg_path.exists():
        existing = RunConfig.load(cfg_path)
        if existing.config_hash() != cascade.cfg.config_hash():
            raise CheckpointError(
                f"{cfg_path} holds a different configuration "
                f"({existing.config_hash()} != {cascade.cfg.config_hash()})")
    else:
        cascade.cfg.save(cfg_path)
    pyr_dir = run_dir / "pyramid"
    if not (pyr_dir / "levels.pt").exists():
        pyr_dir.mkdir(exist_ok=True)
        torch.save(cascade.pyramid.levels, pyr_dir / "levels.pt")
        for i, level in enumerate(cascade.pyramid.levels):
            image_io.save_image(level, pyr_dir / f"level_{i}.png")
    _save_manifest(run_dir, cascade)


def _save_scale(run_dir: Path, cascade: Cascade, n: int) -> None:
    model = cascade.models[n]
    scale_dir = run_dir / f"scale_{n}"
    scale_dir.mkdir(exist_ok=True)
    torch.save(model.generator.state_dict(), scale_dir / "G.bin")
    torch.save(model.discriminator.state_dict(), scale_dir / "D.bin")
    meta = {"scale_index": n, "noise_amp": model.noise_amp,
            "config_hash": cascade.cfg.config_hash(),
            "dims": list(cascade.pyramid.dims(n))}
    if n == cascade.coarsest_index:
        meta["z_rec_seed"] = cascade.state.z_rec_seed
    (scale_dir / "meta").write_text(json.dumps(meta, indent=2) + "\n")


def _save_manifest(run_dir: Path, cascade: Cascade) -> None:
    manifest = {"seed": cascade.state.seed,
                "config_hash": cascade.cfg.config_hash(),
                "num_scales": len(cascade.models),
                "trained": sorted(cascade.state.trained),
                "complete": cascade.complete}
    (run_dir / "manifest").write_text(json.dumps(manifest, indent=2) + "\n")


def save_checkpoint(cascade: Cascade, run_dir: str | Path) -> None:
    """Write the full run directory for a cascade trained in memory."""
    run_dir = Path(run_dir)
    _init_run_dir(run_dir, cascade)
    for n in sorted(cascade.state.trained):
        _save_scale(run_dir, cascade, n)
    _save_manifest(run_dir, cascade)


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise CheckpointError(f"missing checkpoint file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint file {path}: {exc}") from exc


def _load_tensor_file(path: Path):
    if not path.exists():
        raise CheckpointError(f"missing checkpoint file: {path}")
    try:
        return torch.load(path, weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint file {path}: {exc}") from exc


def load_checkpoint(run_dir: str | Path, allow_partial: bool = False) -> Cascade:
    """Rebuild a cascade from a run directory.

    Model parameters, the exact pyramid, and the z_rec seed are read back;
    reconstruction images are recomputed (deterministically) from them.
    Refuses directories whose per-scale config hash does not match
    config.copy.
    """
    run_dir = Path(run_dir)
    cfg_path = run_dir / "config.copy"
    if not cfg_path.exists():
        raise CheckpointError(f"not a run directory (missing {cfg_path})")
    cfg = RunConfig.load(cfg_path)
    cfg_hash = cfg.config_hash()
    manifest = _load_json(run_dir / "manifest")
    if manifest.get("config_hash") != cfg_hash:
        raise CheckpointError(
            f"config.copy hash {cfg_hash} does not match manifest "
            f"{manifest.get('config_hash')}; config.copy was edited after training")
    levels = _load_tensor_file(run_dir / "pyramid" / "levels.pt")
    pyramid = ImagePyramid(list(levels))
    coarsest = pyramid.coarsest_index

    state = TrainState(seed=manifest["seed"])
    models: list[ScaleModel | None] = [None] * len(pyramid)
    for n in range(coarsest, -1, -1):
        scale_dir = run_dir / f"scale_{n}"
        if not scale_dir.exists():
            break
        meta = _load_json(scale_dir / "meta")
        if meta.get("config_hash") != cfg_hash:
            raise CheckpointError(
                f"scale {n} was trained under config hash {meta.get('config_hash')}, "
                f"but config.copy hashes to {cfg_hash}; refusing to load")
        model = build_scale_model(n, coarsest, cfg)
        model.generator.load_state_dict(_load_tensor_file(scale_dir / "G.bin"))
        model.discriminator.load_state_dict(_load_tensor_file(scale_dir / "D.bin"))
        model.noise_amp = float(meta["noise_amp"])
        model.freeze()
        models[n] = model
        state.trained.add(n)
        if n == coarsest:
            if "z_rec_seed" not in meta:
                raise CheckpointError(f"{scale_dir / 'meta'} lacks z_rec_seed")
            state.z_rec_seed = int(meta["z_rec_seed"])

    if not state.trained:
        raise CheckpointError(f"no trained scales found under {run_dir}")
    cascade = Cascade(cfg=cfg, pyramid=pyramid, models=models, state=state)
    if not allow_partial and not cascade.complete:
        missing = sorted(set(range(len(models))) - state.trained)
        raise CheckpointError(
            f"run at {run_dir} is not fully trained (missing scales {missing}); "
            "resume training or load with allow_partial=True")

    # Rebuild the reconstruction chain exactly as training left it.
    dims = pyramid.all_dims()
    with torch.no_grad():
        x = models[coarsest].generator(cascade.z_rec())
        state.x_rec[coarsest] = x.detach().clone()
        state.rec_feedback[coarsest] = None
        for n in range(coarsest - 1, -1, -1):
            if models[n] is None:
                break
            rec_prior = upsample(state.x_rec[n + 1], dims[n])
            fb = None
            if models[n].has_feedback:
                fb = compute_feedback(models[n + 1], state.x_rec[n + 1], dims[n]).scores
            state.rec_feedback[n] = fb
            x = models[n].generator(rec_prior, prior=rec_prior, feedback=fb)
            state.x_rec[n] = x.detach().clone()
    return cascade
