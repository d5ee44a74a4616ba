"""Deterministic synthetic signals for demos and tests."""
from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .dsp import SAMPLE_RATE, Waveform


def sine(freq: float, duration: float = 1.0, sample_rate: int = SAMPLE_RATE, amplitude: float = 0.5) -> Waveform:
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t), sample_rate)


def white_noise(duration: float = 1.0, seed: int = 0, sample_rate: int = SAMPLE_RATE, amplitude: float = 0.5) -> Waveform:
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    return Waveform(np.clip(amplitude * rng.standard_normal(n), -1, 1), sample_rate)


def speech_like(
    duration: float = 3.0,
    f0: float = 120.0,
    formants: tuple[float, ...] = (700.0, 1200.0, 2600.0),
    seed: int = 0,
    sample_rate: int = SAMPLE_RATE,
    vibrato: float = 0.0,
) -> Waveform:
    """Glottal-pulse-like harmonic source through formant resonators.

    Pitch drifts slowly (plus optional vibrato depth in semitones), the
    amplitude follows a syllable-rate envelope and a little breath noise is
    mixed in. Peak is normalized to 0.8.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    drift = 1.0 + 0.08 * np.sin(2 * np.pi * 0.4 * t + rng.uniform(0, 2 * np.pi))
    semis = vibrato * np.sin(2 * np.pi * 5.5 * t)
    inst_f0 = f0 * drift * 2.0 ** (semis / 12.0)
    phase = 2 * np.pi * np.cumsum(inst_f0) / sample_rate
    n_harm = int(0.45 * sample_rate / (f0 * 1.1))
    source = sum(np.sin(k * phase) / k for k in range(1, n_harm + 1))
    source = source + 0.02 * rng.standard_normal(n)

    x = np.zeros(n)
    for i, fc in enumerate(formants):
        bw = 80.0 + 40.0 * i
        r = np.exp(-np.pi * bw / sample_rate)
        theta = 2 * np.pi * fc / sample_rate
        a = [1.0, -2 * r * np.cos(theta), r * r]
        x += sps.lfilter([1.0 - r], a, source) / (i + 1)

    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * 3.0 * t + rng.uniform(0, 2 * np.pi)) ** 2
    fade = np.minimum(1.0, np.minimum(t, duration - t) / 0.02)
    x = x * envelope * np.clip(fade, 0.0, 1.0)
    return Waveform(0.8 * x / np.max(np.abs(x)), sample_rate)
