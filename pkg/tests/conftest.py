import numpy as np
import pytest
import torch

from singit import synth
from singit.model import ModelConfig

torch.set_num_threads(1)

SMALL = ModelConfig(freq_bins=8, emb_dim=8, conv_channels=8, conv_kernel=5,
                    enc_lstm_hidden=4, dec_lstm_hidden=4, downsample=4, postnet_layers=5)


def naive_stft(x, n_fft=510, hop=160):
    """Frame-by-frame DFT with an explicit exponential matrix, zero-padded centers."""
    x = np.asarray(x, dtype=np.float64)
    n = np.arange(n_fft)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * n / n_fft)  # periodic Hann
    k = np.arange(n_fft // 2 + 1)[:, None]
    dft = np.exp(-2j * np.pi * k * n[None, :] / n_fft)
    cols = []
    center = 0
    while center <= len(x):
        frame = np.zeros(n_fft)
        for i in range(n_fft):
            j = center - n_fft // 2 + i
            if 0 <= j < len(x):
                frame[i] = x[j]
        cols.append(dft @ (frame * window))
        center += hop
    return np.stack(cols, axis=1)


@pytest.fixture(scope="session")
def speech3s():
    return synth.speech_like(3.0, seed=0)


@pytest.fixture(scope="session")
def small_cfg():
    return SMALL


def overfit(lambda3, lr, max_steps=2000, budget_s=600.0, target=100.0, seed=0):
    """Train the default model on one 128-frame segment until L1 drops ``target``-fold.

    Stops at the target, at ``max_steps`` or once ``budget_s`` seconds have
    passed. Returns (model, example, curve, elapsed seconds).
    """
    import time

    from singit import training
    from singit.model import init_params

    segment = synth.speech_like(127 * 160 / 16000, seed=0)  # 128 frames
    example = training.prepare_example(segment, kind="singing", speaker_id="a")
    cfg = training.TrainConfig(lambda3=lambda3, lr=lr, batch_size=1, seed=seed)
    model = init_params(ModelConfig(), seed)
    trainer = training.Trainer(model, cfg)
    X, e = example.X[None], example.embedding[None]
    curve = []
    start = time.perf_counter()
    while len(curve) < max_steps:
        curve.append(trainer.train_step(X, e))
        if curve[0].l1 / curve[-1].l1 >= target or time.perf_counter() - start > budget_s:
            break
    return model, example, curve, time.perf_counter() - start


@pytest.fixture(scope="session")
def overfit_model():
    """A model fitted to one segment with a light content-code weight."""
    model, example, curve, elapsed = overfit(lambda3=1.0, lr=1e-3, max_steps=1000, budget_s=900.0)
    return model, example, curve, elapsed


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
