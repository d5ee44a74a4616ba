"""
From speech to singing
======================

The full path: separate a song, encode its vocals, decode them with a new
speaker's embedding, rebuild audio with Griffin-Lim and mix the
accompaniment back in.  The stand-in separator shipped with the package
returns the song as its vocal stem, and an untrained model is used, so
the point here is the plumbing rather than the sound.
"""

# %%
import sys
import tempfile
import warnings
from pathlib import Path

from singit import data, pipeline, synth
from singit.model import ModelConfig, init_params

work = Path(tempfile.mkdtemp())
song = synth.speech_like(2.0, f0=220, formants=(800, 1150, 2900), seed=5, vibrato=0.5)
data.save_audio(work / "song.wav", song)
speaker_b = [synth.speech_like(1.5, f0=105, formants=(500, 1500, 2500), seed=s) for s in (1, 2)]

# %%
# Any command taking {input} and {outdir} that writes vocals.wav and
# accompaniment.wav can act as the separator.
separator = f"{sys.executable} -m singit.mock_separator {{input}} {{outdir}}"
vocals, accompaniment = data.separate(work / "song.wav", separator, work / "stems")
print(f"vocals {vocals.duration:.2f} s, accompaniment peak {accompaniment.peak:.2f}")

# %%
model = init_params(ModelConfig(), seed=0)
options = pipeline.TransferOptions(gl_iters=30)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")  # the model has not been trained
    mix = pipeline.transfer_song(work / "song.wav", speaker_b, model, options, separator=separator)
data.save_audio(work / "converted.wav", mix)
# Untrained weights predict magnitudes near the log floor, hence a faint result.
print(f"wrote {work / 'converted.wav'}: {mix.duration:.2f} s, peak {mix.peak:.1e}")
