"""
Speaker (style) embeddings.

An embedder backend is any function mapping a :class:`~singit.dsp.Waveform`
to 256 reals; :func:`embed_utterance` validates the input and unit-normalizes
the result. The built-in ``"baseline"`` backend is the long-term average of
the normalized log-spectrogram, a deterministic stand-in for a pretrained
verification network. Other backends plug in through
:func:`register_backend`, or precomputed vectors can be read with
:func:`load_embedding`.
"""
from __future__ import annotations

from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dsp import StftConfig, Waveform, log_spectrogram
from .errors import ConfigurationError, DegenerateInputError, ValidationError

EMBEDDING_DIM = 256
MIN_DURATION = 0.5
SILENCE_RMS = 1e-4

Backend = Callable[[Waveform], np.ndarray]
_BACKENDS: dict[str, Backend] = {}


def register_backend(name: str, fn: Backend) -> None:
    _BACKENDS[name] = fn


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def baseline_backend(w: Waveform) -> np.ndarray:
    cfg = StftConfig(sample_rate=w.sample_rate)
    return log_spectrogram(w, cfg).mean(axis=1)


register_backend("baseline", baseline_backend)


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm <= np.finfo(np.float64).eps:
        raise DegenerateInputError("embedding has zero norm")
    return v / norm


def _check_utterance(w: Waveform) -> None:
    if len(w) < MIN_DURATION * w.sample_rate:
        raise DegenerateInputError(
            f"utterance is {w.duration:.3f} s, need at least {MIN_DURATION} s"
        )
    rms = float(np.sqrt(np.mean(w.samples**2)))
    if rms <= SILENCE_RMS:
        raise DegenerateInputError(f"utterance is silent (RMS {rms:.2e})")


def embed_utterance(w: Waveform, backend: str = "baseline") -> np.ndarray:
    """Unit-norm 256-dim style vector for one utterance."""
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise ConfigurationError(
            f"unknown embedder backend {backend!r}; available: {available_backends()}"
        ) from None
    _check_utterance(w)
    v = np.asarray(fn(w), dtype=np.float64)
    if v.shape != (EMBEDDING_DIM,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"backend {backend!r} returned invalid vector of shape {v.shape}")
    return normalize(v)


def embed_speaker(ws: Sequence[Waveform], backend: str = "baseline") -> np.ndarray:
    """Normalized mean of the per-utterance embeddings."""
    if len(ws) == 0:
        raise DegenerateInputError("need at least one utterance")
    embeddings = np.stack([embed_utterance(w, backend) for w in ws])
    return normalize(embeddings.mean(axis=0))


def save_embedding(path, e: np.ndarray) -> None:
    """Write 256 little-endian float32 values, no header."""
    e = np.asarray(e)
    if e.shape != (EMBEDDING_DIM,):
        raise ValidationError(f"embedding must have shape ({EMBEDDING_DIM},), got {e.shape}")
    Path(path).write_bytes(e.astype("<f4").tobytes())


def load_embedding(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) != 4 * EMBEDDING_DIM:
        raise ValidationError(
            f"{path}: expected {4 * EMBEDDING_DIM} bytes of float32, got {len(raw)}"
        )
    e = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(e)):
        raise ValidationError(f"{path}: embedding contains non-finite values")
    return normalize(e)
