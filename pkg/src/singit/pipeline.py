"""
Inference-time style transfer.

:func:`transfer` renders the content of a vocal track (person A) in the voice
of a speaker (person B)::

    X_A    = log-spectrogram of vocals_A
    e_B    = embed_speaker(speech_B)
    codes  = E(X_A, e_B)
    X_tilde = P(D(codes, e_B))
    output = griffin_lim(log_to_mag(X_tilde))

:func:`transfer_song` wraps that with source separation and remixing.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .data import remix, separate, separator_command
from .dsp import StftConfig, Waveform, log_spectrogram, log_to_mag, magnitude_to_waveform
from .model import SingingVC, decode, encode, postnet_apply
from .speaker import embed_speaker, embed_utterance


@dataclass
class TransferOptions:
    gl_iters: int = 60
    gl_seed: int = 0
    gl_init: str = "random"
    backend: str = "baseline"
    # ablation: feed the content singer's own embedding to the encoder
    source_embedding_to_encoder: bool = False
    stft: StftConfig = field(default_factory=StftConfig)


def _target_embedding(speech_b, backend) -> np.ndarray:
    if isinstance(speech_b, np.ndarray):
        return speech_b
    if isinstance(speech_b, Waveform):
        speech_b = [speech_b]
    return embed_speaker(list(speech_b), backend)


def convert_spectrogram(model: SingingVC, X_a: np.ndarray, e_b: np.ndarray, e_enc: np.ndarray | None = None) -> np.ndarray:
    """Postnet output for content ``X_a`` under style ``e_b`` (inference mode)."""
    if e_enc is None:
        e_enc = e_b
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            codes = encode(model, X_a, e_enc)
            X_tilde = postnet_apply(model, decode(model, codes, e_b))
    finally:
        model.train(was_training)
    return X_tilde.double().numpy()


def transfer_spectrogram(vocals_a: Waveform, speech_b, model: SingingVC, options: TransferOptions | None = None) -> np.ndarray:
    options = options or TransferOptions()
    if model.step == 0:
        warnings.warn("transfer with an untrained model (step 0)", RuntimeWarning, stacklevel=3)
    X_a = log_spectrogram(vocals_a, options.stft)
    e_b = _target_embedding(speech_b, options.backend)
    e_enc = embed_utterance(vocals_a, options.backend) if options.source_embedding_to_encoder else None
    return convert_spectrogram(model, X_a, e_b, e_enc)


def transfer(vocals_a: Waveform, speech_b, model: SingingVC, options: TransferOptions | None = None) -> Waveform:
    """Convert ``vocals_a`` to the voice of ``speech_b``.

    ``speech_b`` is one waveform, a list of them, or a precomputed embedding.
    The output has exactly ``len(vocals_a)`` samples and peak at most 1.
    """
    options = options or TransferOptions()
    X_tilde = transfer_spectrogram(vocals_a, speech_b, model, options)
    M = log_to_mag(np.clip(X_tilde, 0.0, 1.0))
    return magnitude_to_waveform(
        M,
        options.stft,
        iters=options.gl_iters,
        seed=options.gl_seed,
        init=options.gl_init,
        length=len(vocals_a),
    )


def transfer_song(
    song,
    speech_b,
    model: SingingVC,
    options: TransferOptions | None = None,
    separator: str | None = None,
    vocal_gain: float = 1.0,
    workdir=None,
    return_stems: bool = False,
):
    """Separate ``song``, convert its vocals, and remix with the instrumental."""
    separator = separator_command(separator)
    vocals, instrumental = separate(song, separator, workdir)
    converted = transfer(vocals, speech_b, model, options)
    mix = remix(converted, instrumental, vocal_gain)
    if return_stems:
        return mix, converted, instrumental
    return mix
