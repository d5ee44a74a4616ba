"""
Self-reconstruction training.

Each training example supplies a log-spectrogram and the embedding of the
same speaker; the model reconstructs the spectrogram from its own content
codes. The objective is::

    total = l1 + l2 + lambda3 * l3
    l1 = MSE(X, X_hat)            decoder output
    l2 = MSE(X, X_tilde)          postnet output
    l3 = mean |E(X) - E(X_tilde)| content-code consistency

evaluated left to right in exactly that order.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .dsp import StftConfig, Waveform, log_spectrogram
from .errors import DegenerateInputError, ShapeError, TrainingDivergedError, ValidationError
from .model import ModelConfig, SingingVC, init_params
from .speaker import embed_utterance

log = logging.getLogger(__name__)

CURVE_FIELDS = ("step", "l1", "l2", "l3", "total")


@dataclass
class TrainConfig:
    lambda3: float = 10000.0
    crop_frames: int = 128
    batch_size: int = 2
    lr: float = 1e-4
    max_steps: int = 100000
    seed: int = 0
    checkpoint_every: int = 1000
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        if self.lambda3 < 0:
            raise ValidationError("lambda3 must be >= 0")
        if self.batch_size < 1 or self.crop_frames < 1:
            raise ValidationError("batch_size and crop_frames must be >= 1")
        if self.max_steps < 0 or self.checkpoint_every < 1:
            raise ValidationError("max_steps must be >= 0 and checkpoint_every >= 1")
        self.betas = tuple(self.betas)

    def check_model(self, cfg: ModelConfig) -> None:
        if self.crop_frames % cfg.downsample:
            raise ValidationError(
                f"crop_frames={self.crop_frames} is not a multiple of downsample={cfg.downsample}"
            )


@dataclass(frozen=True)
class LossReport:
    l1: float
    l2: float
    l3: float
    total: float

    @classmethod
    def from_components(cls, l1, l2, l3, lambda3):
        l1, l2, l3 = float(l1), float(l2), float(l3)
        return cls(l1, l2, l3, total_loss(l1, l2, l3, lambda3))


def _check_pair(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def loss_l1(X: torch.Tensor, X_hat: torch.Tensor) -> torch.Tensor:
    """Mean squared error between the input and the decoder output."""
    _check_pair(X, X_hat)
    return torch.mean((X - X_hat) ** 2)


def loss_l2(X: torch.Tensor, X_tilde: torch.Tensor) -> torch.Tensor:
    _check_pair(X, X_tilde)
    return torch.mean((X - X_tilde) ** 2)


def code_l1(codes: torch.Tensor, other: torch.Tensor) -> torch.Tensor:
    _check_pair(codes, other)
    return torch.mean(torch.abs(codes - other))


def loss_l3(model: SingingVC, X: torch.Tensor, X_tilde: torch.Tensor, e: torch.Tensor, codes=None) -> torch.Tensor:
    """Mean absolute difference between ``E(X, e)`` and ``E(X_tilde, e)``.

    Inputs are batched ``(B, F, T)``; pass ``codes`` to reuse an existing
    ``E(X, e)``.
    """
    if codes is None:
        codes = model.encoder(X, e)
    return code_l1(codes, model.encoder(X_tilde, e))


def total_loss(l1, l2, l3, lambda3):
    return l1 + l2 + lambda3 * l3


def compute_losses(model: SingingVC, X: torch.Tensor, e: torch.Tensor, lambda3: float):
    """Forward pass on a batch; returns ``(l1, l2, l3, total)`` as tensors."""
    codes, x_hat, x_tilde = model(X, e)
    l1 = loss_l1(X, x_hat)
    l2 = loss_l2(X, x_tilde)
    l3 = loss_l3(model, X, x_tilde, e, codes=codes)
    return l1, l2, l3, total_loss(l1, l2, l3, lambda3)


def make_optimizer(params, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=cfg.lr, betas=cfg.betas, eps=cfg.eps)


class Trainer:
    """Owns a model and its Adam state; the single writer of the parameters."""

    def __init__(self, model: SingingVC, cfg: TrainConfig, optimizer=None):
        cfg.check_model(model.cfg)
        self.model = model
        self.cfg = cfg
        self.optimizer = optimizer or make_optimizer(model.parameters(), cfg)

    def train_step(self, X, e) -> LossReport:
        """One Adam step on the total loss of a ``(B, F, T)`` batch.

        The returned report holds the losses before the update.
        """
        model = self.model
        X = torch.as_tensor(np.asarray(X), dtype=model.dtype)
        e = torch.as_tensor(np.asarray(e), dtype=model.dtype)
        model.train()
        l1, l2, l3, total = compute_losses(model, X, e, self.cfg.lambda3)
        report = LossReport.from_components(l1.item(), l2.item(), l3.item(), self.cfg.lambda3)
        if not all(np.isfinite([report.l1, report.l2, report.l3, total.item()])):
            raise TrainingDivergedError(f"non-finite loss at step {model.step + 1}: {report}")
        self.optimizer.zero_grad(set_to_none=True)
        total.backward()
        self.optimizer.step()
        model.step += 1
        return report


@dataclass
class TrainingExample:
    """One utterance prepared for training: its log-spectrogram and speaker embedding."""

    X: np.ndarray
    embedding: np.ndarray
    kind: str = "speech"
    speaker_id: str = ""


def prepare_example(w: Waveform, kind="speech", speaker_id="", backend="baseline", stft_cfg=StftConfig()) -> TrainingExample:
    # the embedding sees the full utterance, not just the crop
    return TrainingExample(log_spectrogram(w, stft_cfg), embed_utterance(w, backend), kind, speaker_id)


def crop(X: np.ndarray, start: int, frames: int) -> np.ndarray:
    """``frames`` columns from ``start``; short inputs are edge-replicated to length."""
    if X.shape[1] < frames:
        return np.pad(X, ((0, 0), (0, frames - X.shape[1])), mode="edge")
    return X[:, start : start + frames]


class BatchSampler:
    """Uniform sampling over utterances with uniformly random crops, seeded."""

    def __init__(self, examples: Sequence[TrainingExample], cfg: TrainConfig):
        self.examples = examples
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

    def next_batch(self):
        frames = self.cfg.crop_frames
        xs, es = [], []
        for _ in range(self.cfg.batch_size):
            ex = self.examples[self.rng.integers(len(self.examples))]
            start = self.rng.integers(max(ex.X.shape[1] - frames, 0) + 1)
            xs.append(crop(ex.X, start, frames))
            es.append(ex.embedding)
        return np.stack(xs), np.stack(es)


def _append_curve(path: Path, step: int, report: LossReport):
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(CURVE_FIELDS)
        writer.writerow([step, repr(report.l1), repr(report.l2), repr(report.l3), repr(report.total)])


def read_curve(path) -> list[tuple[int, LossReport]]:
    with open(path, newline="") as fh:
        return [
            (int(row["step"]), LossReport(float(row["l1"]), float(row["l2"]), float(row["l3"]), float(row["total"])))
            for row in csv.DictReader(fh)
        ]


def checkpoint_path(out_dir, step: int) -> Path:
    return Path(out_dir) / f"step_{step:08d}.ckpt"


def train_loop(
    examples: Sequence[TrainingExample],
    cfg: TrainConfig,
    model_cfg: ModelConfig = ModelConfig(),
    out_dir=None,
    model: SingingVC | None = None,
    optimizer=None,
) -> tuple[SingingVC, list[LossReport]]:
    """Train by self-reconstruction until the model has taken ``cfg.max_steps`` steps.

    A resumed model continues from its own step count; the batch sampler is
    fast-forwarded past the batches it already saw.
    With ``out_dir`` set, every step is appended to ``out_dir/loss.csv`` and a
    checkpoint is written whenever the step count is a multiple of
    ``cfg.checkpoint_every``.
    """
    if len(examples) == 0:
        raise DegenerateInputError("training set is empty")
    kinds = {ex.kind for ex in examples}
    if not {"speech", "singing"} <= kinds:
        log.warning("training set lacks %s examples", " and ".join(sorted({"speech", "singing"} - kinds)))
    if model is None:
        model = init_params(model_cfg, cfg.seed)
    trainer = Trainer(model, cfg, optimizer)
    sampler = BatchSampler(examples, cfg)
    for _ in range(model.step):
        sampler.next_batch()
    curve_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        curve_path = out_dir / "loss.csv"

    curve = []
    meta = {"train_config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}}
    while model.step < cfg.max_steps:
        X, e = sampler.next_batch()
        report = trainer.train_step(X, e)
        curve.append(report)
        if curve_path is not None:
            _append_curve(curve_path, model.step, report)
            if model.step % cfg.checkpoint_every == 0:
                save_checkpoint(checkpoint_path(out_dir, model.step), model, trainer.optimizer, meta)
        if model.step % 100 == 0:
            log.info("step %d total %.6g (l1 %.4g l2 %.4g l3 %.4g)", model.step, report.total, report.l1, report.l2, report.l3)
    return model, curve
