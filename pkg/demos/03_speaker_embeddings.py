"""
Who is speaking
===============

A speaker embedding is a unit vector summarizing a voice.  The built-in
baseline averages the log-spectrogram over time, so it captures the
long-term spectral envelope: formants and brightness, not words.
"""

# %%
import numpy as np

from singit import synth
from singit.speaker import embed_speaker, embed_utterance

low = [synth.speech_like(1.5, f0=105, formants=(500, 1500, 2500), seed=s) for s in range(3)]
high = [synth.speech_like(1.5, f0=240, formants=(850, 1900, 3100), seed=s) for s in range(3)]

# %%
# Utterances from one voice land closer together than utterances across voices.
e_low = [embed_utterance(w) for w in low]
e_high = [embed_utterance(w) for w in high]
within = np.mean([a @ b for i, a in enumerate(e_low) for b in e_low[i + 1:]])
across = np.mean([a @ b for a in e_low for b in e_high])
print(f"cosine within a voice {within:.4f}, across voices {across:.4f}")

# %%
# Several utterances are pooled into one speaker embedding.
e = embed_speaker(low)
print("speaker embedding", e.shape, "norm", round(float(np.linalg.norm(e)), 6))

# %%
# Other extractors plug in by name; anything mapping a waveform to a
# vector of the same size works.
from singit.speaker import available_backends

print("backends:", available_backends())
