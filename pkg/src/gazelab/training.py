"""Optimization loop: alternating critic/generator updates with a linear
learning-rate ramp-down, deterministic batch sampling and resumable state.

One epoch makes ``len(train split) // batch_size`` generator updates; the
critic is updated ``n_critic`` times before each of them, every update on
a fresh batch.  Batches follow a seeded permutation stream, so the whole
run is a pure function of (config, data).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from . import losses
from .config import TrainConfig, echo_effective_config
from .dataio.manifest import EyeDataset
from .dataio.patches import from_unit_range
from .errors import DataError, NumericError
from .geometry import (
    COLUMBIA_PITCHES,
    COLUMBIA_YAWS,
    GazeDirection,
    normalize_gaze,
)
from .models import (
    DualDiscriminatorNet,
    GeneratorNet,
    PerceptualBackbone,
    init_parameters,
    load_checkpoint,
    restore_net,
    save_checkpoint,
)
from .seeding import rng, torch_generator

log = logging.getLogger(__name__)


def learning_rate_at(epoch: int, config: TrainConfig) -> float:
    """Piecewise-linear schedule: flat until the decay start, then linear to 0.

    ``epoch`` is 1-indexed; the returned rate is used for that epoch's updates.
    """
    if epoch < 1 or epoch > config.epochs:
        raise ValueError(f"epoch must be in [1, {config.epochs}], got {epoch}")
    if epoch <= config.lr_decay_start:
        return config.lr
    span = config.epochs - config.lr_decay_start
    return config.lr * (config.epochs - epoch) / span


@dataclass
class TrainingBatch:
    x_r: np.ndarray  # (N, 64, 64, 3) float32 in [-1, 1]
    d_r: np.ndarray  # (N, 2) float32 normalized
    d_g: np.ndarray  # (N, 2) float32 normalized
    x_t: np.ndarray  # (N, 64, 64, 3) float32, ground truth at d_g
    source_indices: np.ndarray


def sample_training_batch(
    dataset: EyeDataset, batch_size: int, seed: int, step: int
) -> TrainingBatch:
    """Deterministic batch for a given (seed, step).

    Source rows follow a per-pass permutation (tail rows that do not fill
    a batch are dropped); each source gets a target direction drawn
    uniformly from its subject's other available grid directions, and the
    matching real sample as ground truth.
    """
    n = len(dataset)
    if n < batch_size:
        raise DataError(f"dataset has {n} rows, smaller than batch size {batch_size}")
    batches_per_pass = n // batch_size
    pass_idx, pos = divmod(step, batches_per_pass)
    perm = rng(seed, "batch-perm", pass_idx).permutation(n)
    src = perm[pos * batch_size : (pos + 1) * batch_size]

    target_rng = rng(seed, "target-draw", step)
    tgt = np.empty(batch_size, dtype=np.int64)
    for k, i in enumerate(src):
        candidates = dataset.candidate_targets(int(i))
        if not candidates:
            row = dataset.rows[int(i)]
            raise DataError(
                f"subject {row.subject} pose {row.head_pose} side {row.eye_side} "
                "has fewer than 2 gaze directions"
            )
        tgt[k] = candidates[int(target_rng.integers(len(candidates)))]

    return TrainingBatch(
        x_r=dataset.images[src],
        d_r=dataset.gaze_n[src],
        d_g=dataset.gaze_n[tgt],
        x_t=dataset.images[tgt],
        source_indices=src,
    )


@dataclass
class TrainState:
    epoch: int = 0  # completed epochs
    global_step: int = 0  # optimizer updates (critic + generator)
    batch_counter: int = 0  # batches drawn from the stream
    critic_updates: int = 0
    generator_updates: int = 0


def _to_nchw(images: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(images)).permute(0, 3, 1, 2)


def _param_vector(net: torch.nn.Module) -> torch.Tensor:
    return torch.cat([p.detach().reshape(-1) for p in net.parameters()])


class Trainer:
    """Owns the nets, optimizers and counters of one training run."""

    def __init__(
        self,
        config: TrainConfig,
        dataset: EyeDataset,
        out_dir: Path,
        state: Optional[TrainState] = None,
    ):
        self.config = config
        self.dataset = dataset
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.state = state or TrainState()

        self.generator = GeneratorNet(
            base_channels=config.gen_base_channels,
            n_residual_blocks=config.n_residual_blocks,
        )
        self.discriminator = DualDiscriminatorNet(
            base_channels=config.disc_base_channels
        )
        init_parameters(self.generator, seed=config.seed)
        init_parameters(self.discriminator, seed=config.seed + 1)
        self.backbone = PerceptualBackbone(
            width_multiplier=config.perceptual_width,
            weights_path=config.perceptual_weights or None,
            seed=config.seed,
        )

        self.opt_g = torch.optim.Adam(
            self.generator.parameters(),
            lr=config.lr,
            betas=(config.beta1, config.beta2),
        )
        self.opt_d = torch.optim.Adam(
            self.discriminator.parameters(),
            lr=config.lr,
            betas=(config.beta1, config.beta2),
        )

        echo_effective_config(config, self.out_dir)
        self.log_path = self.out_dir / "training_log.jsonl"

    # -- plumbing ---------------------------------------------------------

    @property
    def steps_per_epoch(self) -> int:
        n_batches = len(self.dataset) // self.config.batch_size
        if n_batches < 1:
            raise DataError("train split smaller than one batch")
        return n_batches

    def _next_batch(self) -> TrainingBatch:
        batch = sample_training_batch(
            self.dataset,
            self.config.batch_size,
            self.config.seed,
            self.state.batch_counter,
        )
        self.state.batch_counter += 1
        return batch

    def _set_lr(self, lr: float) -> None:
        for opt in (self.opt_d, self.opt_g):
            for group in opt.param_groups:
                group["lr"] = lr

    def _log(self, kind: str, lr: float, report: losses.LossReport) -> None:
        entry = {
            "step": self.state.global_step,
            "epoch": self.state.epoch + 1,
            "kind": kind,
            "lr": lr,
        }
        entry.update(report.to_dict())
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(entry) + "\n")

    def _check_finite(self, total: torch.Tensor, report: losses.LossReport) -> None:
        if torch.isfinite(total):
            return
        snapshot = self.out_dir / "diagnostic_nan.pt"
        self.save(snapshot)
        (self.out_dir / "diagnostic_nan.json").write_text(
            json.dumps({"state": asdict(self.state), "report": report.to_dict()})
        )
        raise NumericError(
            f"non-finite loss at step {self.state.global_step}; "
            f"diagnostic snapshot written to {snapshot}"
        )

    # -- updates ----------------------------------------------------------

    def critic_step(self, batch: TrainingBatch) -> losses.LossReport:
        cfg = self.config
        x_r = _to_nchw(batch.x_r)
        d_r = torch.from_numpy(batch.d_r)
        d_g = torch.from_numpy(batch.d_g)
        with torch.no_grad():
            x_g = self.generator(x_r, d_g)

        adv = losses.wasserstein_terms(self.discriminator.critic_score, x_r, x_g)
        gp = losses.gradient_penalty(
            self.discriminator.critic_score,
            x_r,
            x_g,
            generator=torch_generator(cfg.seed, "gp", self.state.global_step),
        )
        gaze_d = losses.gaze_loss_d(d_r, self.discriminator(x_r).gaze_estimate)
        total, report = losses.total_discriminator_loss(adv, gp, gaze_d, cfg.weights)
        self._check_finite(total, report)

        self.opt_d.zero_grad(set_to_none=True)
        total.backward()
        self.opt_d.step()
        self.state.critic_updates += 1
        self.state.global_step += 1
        return report

    def generator_step(self, batch: TrainingBatch) -> losses.LossReport:
        cfg = self.config
        x_r = _to_nchw(batch.x_r)
        x_t = _to_nchw(batch.x_t)
        d_r = torch.from_numpy(batch.d_r)
        d_g = torch.from_numpy(batch.d_g)

        # The generator update must not touch critic or gaze-head weights.
        for p in self.discriminator.parameters():
            p.requires_grad_(False)
        try:
            x_g = self.generator(x_r, d_g)
            adv_g = losses.generator_adv_loss(self.discriminator.critic_score, x_g)
            gaze_g = losses.gaze_loss_g(d_g, self.discriminator(x_g).gaze_estimate)
            x_cycled = self.generator(x_g, d_r)
            rec = (x_r - x_cycled).abs().mean()
            content, style = losses.perceptual_losses(self.backbone, x_g, x_t)
            total, report = losses.total_generator_loss(
                adv_g, content, style, gaze_g, rec, cfg.weights
            )
            self._check_finite(total, report)

            self.opt_g.zero_grad(set_to_none=True)
            total.backward()
            self.opt_g.step()
        finally:
            for p in self.discriminator.parameters():
                p.requires_grad_(True)
        self.state.generator_updates += 1
        self.state.global_step += 1
        return report

    # -- loops ------------------------------------------------------------

    def train_epoch(self) -> None:
        epoch = self.state.epoch + 1
        lr = learning_rate_at(epoch, self.config)
        self._set_lr(lr)
        for _ in range(self.steps_per_epoch):
            for _ in range(self.config.n_critic):
                report = self.critic_step(self._next_batch())
                self._log("critic", lr, report)
            report = self.generator_step(self._next_batch())
            self._log("generator", lr, report)
        self.state.epoch = epoch

    def train(self, epochs: Optional[int] = None) -> TrainState:
        target = epochs if epochs is not None else self.config.epochs
        while self.state.epoch < target:
            self.train_epoch()
            log.info("epoch %d/%d done", self.state.epoch, target)
            boundary = self.state.epoch % self.config.checkpoint_every == 0
            if boundary or self.state.epoch == target:
                self.save(self.checkpoint_path(self.state.epoch))
                self.save(self.out_dir / "checkpoints" / "latest.pt")
        return self.state

    # -- persistence ------------------------------------------------------

    def checkpoint_path(self, epoch: int) -> Path:
        return self.out_dir / "checkpoints" / f"epoch_{epoch:04d}.pt"

    def save(self, path: Path) -> Path:
        return save_checkpoint(
            path,
            nets={"generator": self.generator, "discriminator": self.discriminator},
            optimizers={"g": self.opt_g, "d": self.opt_d},
            state=asdict(self.state),
            config=self.config.to_mapping(),
        )

    @classmethod
    def resume(
        cls, checkpoint_path: Path, dataset: EyeDataset, out_dir: Path
    ) -> "Trainer":
        payload = load_checkpoint(checkpoint_path)
        config = TrainConfig.from_mapping(payload["extra"]["config"])
        trainer = cls(config, dataset, out_dir, state=TrainState(**payload["extra"]["state"]))
        restore_net(trainer.generator, payload, "generator")
        restore_net(trainer.discriminator, payload, "discriminator")
        trainer.opt_g.load_state_dict(payload["optimizers"]["g"])
        trainer.opt_d.load_state_dict(payload["optimizers"]["d"])
        return trainer


# -- inference -------------------------------------------------------------


def load_generator(checkpoint_path: Path) -> tuple[GeneratorNet, TrainConfig]:
    payload = load_checkpoint(checkpoint_path)
    config = TrainConfig.from_mapping(payload["extra"]["config"])
    net = GeneratorNet(
        base_channels=config.gen_base_channels,
        n_residual_blocks=config.n_residual_blocks,
    )
    restore_net(net, payload, "generator")
    net.eval()
    return net, config


def generate_batch(
    generator: GeneratorNet,
    images_unit: np.ndarray,
    gaze_n: np.ndarray,
    batch_size: int = 64,
) -> np.ndarray:
    """Numpy bridge: redirect (N, 64, 64, 3) unit-range images to gaze_n."""
    out = []
    with torch.no_grad():
        for i in range(0, len(images_unit), batch_size):
            x = _to_nchw(images_unit[i : i + batch_size].astype(np.float32))
            d = torch.from_numpy(gaze_n[i : i + batch_size].astype(np.float32))
            out.append(generator(x, d).permute(0, 2, 3, 1).numpy())
    return np.concatenate(out, axis=0)


def redirect(
    checkpoint_path: Path,
    image_unit: np.ndarray,
    d_g: GazeDirection,
    yaw_max: float = 15.0,
    pitch_max: float = 10.0,
) -> np.ndarray:
    """Redirect one [-1, 1] eye patch to d_g; returns an 8-bit image."""
    generator, _ = load_generator(checkpoint_path)
    gaze_n = normalize_gaze(d_g, yaw_max, pitch_max).as_array()[None, :]
    generated = generate_batch(generator, image_unit[None], gaze_n)[0]
    return from_unit_range(generated)


def default_grid_directions() -> list[GazeDirection]:
    """Row-major grid targets: pitch rows top-down, yaw columns left-right."""
    return [
        GazeDirection(yaw, pitch)
        for pitch in sorted(COLUMBIA_PITCHES, reverse=True)
        for yaw in COLUMBIA_YAWS
    ]


def redirect_grid(
    checkpoint_path: Path,
    image_unit: np.ndarray,
    directions: Optional[Sequence[GazeDirection]] = None,
    n_cols: int = 7,
    yaw_max: float = 15.0,
    pitch_max: float = 10.0,
) -> np.ndarray:
    """Tile redirections over a direction grid into one 8-bit image."""
    directions = list(directions) if directions is not None else default_grid_directions()
    generator, _ = load_generator(checkpoint_path)
    gaze_n = np.stack(
        [normalize_gaze(d, yaw_max, pitch_max).as_array() for d in directions]
    )
    batch = np.repeat(image_unit[None], len(directions), axis=0)
    generated = generate_batch(generator, batch, gaze_n)

    n_rows = (len(directions) + n_cols - 1) // n_cols
    h, w = image_unit.shape[:2]
    canvas = np.zeros((n_rows * h, n_cols * w, 3), dtype=np.uint8)
    for idx, img in enumerate(generated):
        r, c = divmod(idx, n_cols)
        canvas[r * h : (r + 1) * h, c * w : (c + 1) * w] = from_unit_range(img)
    return canvas
