"""
STFT analysis/synthesis, log-magnitude scaling and Griffin-Lim phase recovery.

Everything here is a pure function of its inputs. Spectrograms are plain
``numpy`` arrays laid out as ``(n_freq, n_frames)``; waveforms travel as
:class:`Waveform` so the sample rate is never lost.

The STFT uses center padding with zeros and a periodic window. Synthesis is
the least-squares inverse (overlap-add divided by the summed squared
window), so any window/hop pair whose squared-window sum never vanishes
inverts exactly, and Griffin-Lim is a true alternating projection.

Example
-------
>>> import numpy as np
>>> from singit.dsp import StftConfig, Waveform, stft, istft
>>> cfg = StftConfig()
>>> w = Waveform(np.zeros(16000), 16000)
>>> stft(w, cfg).shape
(256, 101)
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputError, ValidationError

SAMPLE_RATE = 16000
LOG_FLOOR = 1e-5
DB_OFFSET = 100.0
DB_RANGE = 100.0


@dataclass(frozen=True)
class Waveform:
    """Mono sample buffer plus its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("waveform contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self) else 0.0


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 510
    hop: int = 160
    window: str = "hann"
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft % 2:
            raise ValidationError(f"n_fft must be even and >= 2, got {self.n_fft}")
        if not 1 <= self.hop <= self.n_fft:
            raise ValidationError(f"hop must lie in [1, n_fft], got {self.hop}")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if not sps.check_NOLA(self.window_array, self.n_fft, self.n_fft - self.hop):
            raise ValidationError(
                f"window {self.window!r} with hop {self.hop} cannot be inverted "
                "(squared-window overlap sum vanishes)"
            )

    @property
    def n_freq(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def window_array(self) -> np.ndarray:
        return _window(self.window, self.n_fft)

    @property
    def amplitude_scale(self) -> float:
        """Factor mapping a unit-amplitude sinusoid to STFT magnitude 1."""
        return 2.0 / float(self.window_array.sum())

    def n_frames(self, n_samples: int) -> int:
        return n_samples // self.hop + 1

    def max_length(self, n_frames: int) -> int:
        """Longest signal a ``n_frames`` STFT can synthesize."""
        return (n_frames - 1) * self.hop + self.n_fft - self.n_fft // 2


@lru_cache(maxsize=16)
def _window(name: str, n_fft: int) -> np.ndarray:
    win = sps.get_window(name, n_fft, fftbins=True).astype(np.float64)
    win.setflags(write=False)
    return win


def _samples(w) -> np.ndarray:
    if isinstance(w, Waveform):
        return w.samples
    return np.asarray(w, dtype=np.float64)


def stft(w, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Complex STFT of shape ``(n_fft // 2 + 1, len(w) // hop + 1)``."""
    x = _samples(w)
    if x.ndim != 1 or x.shape[0] == 0:
        raise DegenerateInputError("cannot analyse an empty waveform")
    pad = cfg.n_fft // 2
    padded = np.pad(x, (pad, pad))
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.n_fft)[:: cfg.hop]
    return np.fft.rfft(frames * cfg.window_array, axis=1).T


def _overlap_add(S: np.ndarray, cfg: StftConfig, length: int) -> np.ndarray:
    win = cfg.window_array
    n_frames = S.shape[1]
    frames = np.fft.irfft(S.T, n=cfg.n_fft, axis=1) * win
    total = (n_frames - 1) * cfg.hop + cfg.n_fft
    out = np.zeros(total)
    norm = np.zeros(total)
    win_sq = win**2
    for t in range(n_frames):
        start = t * cfg.hop
        out[start : start + cfg.n_fft] += frames[t]
        norm[start : start + cfg.n_fft] += win_sq
    pad = cfg.n_fft // 2
    out = out[pad : pad + length]
    norm = norm[pad : pad + length]
    nonzero = norm > np.finfo(np.float64).tiny
    out[nonzero] /= norm[nonzero]
    return out


def _limit_peak(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x)) if x.size else 0.0
    return x / peak if peak > 1.0 else x


def istft(S: np.ndarray, cfg: StftConfig = StftConfig(), length: int | None = None) -> Waveform:
    """Least-squares inverse of :func:`stft`.

    ``length`` defaults to ``(n_frames - 1) * hop``, the length of any signal
    whose STFT has ``n_frames`` columns. The result is rescaled by its peak
    only when the peak exceeds 1.
    """
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != cfg.n_freq:
        raise ValidationError(f"expected ({cfg.n_freq}, T) spectrum, got {S.shape}")
    n_frames = S.shape[1]
    if n_frames == 0:
        raise DegenerateInputError("cannot synthesize from zero frames")
    if length is None:
        length = (n_frames - 1) * cfg.hop
    if length < 1 or length > cfg.max_length(n_frames):
        raise ValidationError(
            f"length {length} outside synthesizable span [1, {cfg.max_length(n_frames)}]"
        )
    return Waveform(_limit_peak(_overlap_add(S, cfg, length)), cfg.sample_rate)


def mag_to_log(M: np.ndarray) -> np.ndarray:
    """Map linear magnitudes to the normalized log scale in [0, 1]."""
    M = np.asarray(M, dtype=np.float64)
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValidationError("magnitudes must be finite and non-negative")
    db = 20.0 * np.log10(np.maximum(M, LOG_FLOOR))
    return np.clip((db + DB_OFFSET) / DB_RANGE, 0.0, 1.0)


def log_to_mag(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)) or np.any(X < 0.0) or np.any(X > 1.0):
        raise ValidationError("log-spectrogram entries must lie in [0, 1]")
    return 10.0 ** ((DB_RANGE * X - DB_OFFSET) / 20.0)


def magnitude(w, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """STFT magnitude scaled so a full-scale sinusoid peaks near 1 (0 dB)."""
    return np.abs(stft(w, cfg)) * cfg.amplitude_scale


def log_spectrogram(w, cfg: StftConfig = StftConfig()) -> np.ndarray:
    return mag_to_log(magnitude(w, cfg))


def _bin_weights(n_freq: int) -> np.ndarray:
    # one-sided spectrum: interior bins stand for two conjugate bins
    weights = np.full((n_freq, 1), 2.0)
    weights[0] = weights[-1] = 1.0
    return weights


def spectral_distance(S: np.ndarray, M: np.ndarray) -> float:
    """Frobenius distance ``|| |S| - M ||`` over the full two-sided spectrum."""
    diff = np.abs(S) - M
    return float(np.sqrt(np.sum(_bin_weights(M.shape[0]) * diff**2)))


def griffin_lim(
    M: np.ndarray,
    iters: int = 60,
    seed: int = 0,
    cfg: StftConfig = StftConfig(),
    length: int | None = None,
    init: str = "random",
    return_objective: bool = False,
):
    """Recover a waveform whose STFT magnitude approximates ``M``.

    Plain alternating projection between the magnitude constraint and the set
    of consistent spectrograms. ``M`` is in raw STFT units (see
    :func:`magnitude_to_waveform` for the scaled variant).

    Parameters
    ----------
    M : array, shape (n_freq, n_frames)
        Target magnitude.
    iters : int
        Number of projection rounds, at least 1.
    seed : int
        Seed for the random initial phase.
    init : {"random", "zero"}
        Initial phase.
    return_objective : bool
        Also return the distance ``|| |stft(x_k)| - M ||`` for every
        iterate ``x_1 .. x_iters`` (see :func:`spectral_distance`).

    Returns
    -------
    Waveform, or (Waveform, ndarray) when ``return_objective`` is set.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != cfg.n_freq:
        raise ValidationError(f"expected ({cfg.n_freq}, T) magnitude, got {M.shape}")
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValidationError("magnitudes must be finite and non-negative")
    if iters < 1:
        raise ValidationError("iters must be >= 1")
    if length is None:
        length = (M.shape[1] - 1) * cfg.hop
    if length < 1 or length > cfg.max_length(M.shape[1]):
        raise ValidationError(f"length {length} outside synthesizable span")

    if init == "random":
        rng = np.random.default_rng(seed)
        phase = np.exp(2j * np.pi * rng.random(M.shape))
    elif init == "zero":
        phase = np.ones(M.shape, dtype=np.complex128)
    else:
        raise ValidationError(f"unknown phase init {init!r}")

    objective = np.empty(iters)
    for k in range(iters):
        x = _overlap_add(M * phase, cfg, length)
        S = stft(x, cfg)
        objective[k] = spectral_distance(S, M)
        mag = np.abs(S)
        phase = np.where(mag > 0, S / np.where(mag > 0, mag, 1.0), 1.0)

    out = Waveform(_limit_peak(x), cfg.sample_rate)
    if return_objective:
        return out, objective
    return out


def magnitude_to_waveform(M: np.ndarray, cfg: StftConfig = StftConfig(), **kwargs):
    """Griffin-Lim on a magnitude produced by :func:`magnitude`."""
    return griffin_lim(np.asarray(M) / cfg.amplitude_scale, cfg=cfg, **kwargs)
