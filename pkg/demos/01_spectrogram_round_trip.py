"""
Spectrograms and their inverse
==============================

A waveform goes into a 256-bin log-spectrogram and comes back out.  With
the phase kept, the inverse is exact up to rounding; the log map is a
bijection on the unclipped range.
"""

# %%
# A synthetic voice stands in for a recording: a harmonic source at 120 Hz
# pushed through three formant resonators, with syllable-rate loudness.
import numpy as np

from singit import dsp, synth

voice = synth.speech_like(2.0, f0=120, seed=0)
cfg = dsp.StftConfig()
print(f"{voice.duration:.2f} s at {voice.sample_rate} Hz, peak {voice.peak:.2f}")

# %%
# 510-point frames hopped by 160 samples: 256 frequency bins every 10 ms.
S = dsp.stft(voice, cfg)
print("complex STFT", S.shape)

# %%
# Overlap-add with the squared-window normalization undoes the analysis.
back = dsp.istft(S, cfg, len(voice))
inner = slice(cfg.n_fft, -cfg.n_fft)
err = np.max(np.abs(back.samples[inner] - voice.samples[inner]))
print(f"max interior error {err:.1e}")

# %%
# The model sees magnitudes in dB, shifted and scaled into [0, 1].
X = dsp.log_spectrogram(voice, cfg)
print(f"log-spectrogram {X.shape}, range [{X.min():.3f}, {X.max():.3f}]")
M = dsp.log_to_mag(X)
print("log map inverts:", np.allclose(dsp.mag_to_log(M), X))

# %%
# The loudest bin in each frame is usually the fundamental, one bin from 120 Hz.
hz = np.arange(cfg.n_freq) * cfg.sample_rate / cfg.n_fft
print("median strongest bin:", np.round(np.median(hz[X.argmax(axis=0)])), "Hz")
