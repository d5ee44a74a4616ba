import numpy as np
import pytest

from singit import speaker, synth
from singit.dsp import Waveform
from singit.errors import ConfigurationError, DegenerateInputError, ValidationError

from conftest import naive_stft


def mean_log_spectrum_oracle(x):
    S = naive_stft(x)
    window_sum = 255.0  # sum of a periodic Hann of length 510
    db = 20 * np.log10(np.maximum(np.abs(S) * 2 / window_sum, 1e-5))
    X = np.clip((db + 100) / 100, 0, 1)
    v = X.mean(axis=1)
    return v / np.sqrt(np.sum(v * v))


def test_deterministic_bitwise(speech3s):
    assert np.array_equal(speaker.embed_utterance(speech3s), speaker.embed_utterance(speech3s))


@pytest.mark.parametrize("seed", range(3))
def test_unit_norm(seed):
    e = speaker.embed_utterance(synth.speech_like(1.0, f0=100 + 40 * seed, seed=seed))
    assert e.shape == (256,)
    assert abs(np.linalg.norm(e) - 1) < 1e-6


def test_baseline_on_sine_matches_oracle():
    w = synth.sine(440.0, 0.75)
    np.testing.assert_allclose(speaker.embed_utterance(w), mean_log_spectrum_oracle(w.samples), atol=1e-10)


def test_dimension_independent_of_length():
    for duration in (0.5, 1.3, 4.0):
        assert speaker.embed_utterance(synth.speech_like(duration)).shape == (256,)


def test_rejects_short_and_silent():
    with pytest.raises(DegenerateInputError):
        speaker.embed_utterance(synth.speech_like(0.4))
    with pytest.raises(DegenerateInputError):
        speaker.embed_utterance(Waveform(np.full(16000, 5e-5)))


def test_unknown_backend():
    with pytest.raises(ConfigurationError):
        speaker.embed_utterance(synth.speech_like(1.0), backend="resemblyzer-missing")


def test_scale_invariance(speech3s):
    a = speaker.embed_utterance(speech3s)
    b = speaker.embed_utterance(Waveform(0.5 * speech3s.samples))
    assert float(a @ b) > 0.99


def test_embed_speaker_same_utterance_twice(speech3s):
    np.testing.assert_allclose(
        speaker.embed_speaker([speech3s, speech3s]), speaker.embed_utterance(speech3s), atol=1e-15
    )


def test_embed_speaker_three_utterances():
    ws = [synth.speech_like(1.0, f0=f0, seed=i) for i, f0 in enumerate((100, 150, 210))]
    per = [mean_log_spectrum_oracle(w.samples) for w in ws]
    mean = np.sum(per, axis=0) / 3
    np.testing.assert_allclose(speaker.embed_speaker(ws), mean / np.sqrt(np.sum(mean**2)), atol=1e-10)


def test_embed_speaker_opposite_embeddings_fail():
    flipped = {}

    def signed(w):
        v = speaker.baseline_backend(w)
        return -v if flipped.get(id(w)) else v

    speaker.register_backend("signed-test", signed)
    w1 = synth.speech_like(1.0)
    w2 = Waveform(w1.samples.copy())
    flipped[id(w2)] = True
    with pytest.raises(DegenerateInputError):
        speaker.embed_speaker([w1, w2], backend="signed-test")


def test_embed_speaker_empty():
    with pytest.raises(DegenerateInputError):
        speaker.embed_speaker([])


def test_embedding_file_round_trip(tmp_path, speech3s):
    e = speaker.embed_utterance(speech3s)
    path = tmp_path / "b.emb"
    speaker.save_embedding(path, e)
    raw = path.read_bytes()
    assert len(raw) == 1024
    np.testing.assert_array_equal(np.frombuffer(raw, "<f4"), e.astype("<f4"))
    loaded = speaker.load_embedding(path)
    np.testing.assert_allclose(loaded, e, atol=1e-6)


def test_embedding_file_rejects_wrong_size(tmp_path):
    path = tmp_path / "bad.emb"
    path.write_bytes(b"\0" * 1020)
    with pytest.raises(ValidationError):
        speaker.load_embedding(path)
