"""
Training on a single segment
============================

The autoencoder is trained by self-reconstruction: content and voice come
from the same clip, so the target is the input.  Fitting one 1.28 s clip
is the quickest way to see all three losses move.  The step count is
kept short here; raise STEPS to watch the decoder loss keep falling.
"""

# %%
import os

import torch

from singit import synth, training
from singit.model import ModelConfig, init_params

torch.set_num_threads(1)
STEPS = int(os.environ.get("DEMO_STEPS", 60))

clip = synth.speech_like(127 * 160 / 16000, seed=0)  # exactly 128 frames
example = training.prepare_example(clip, kind="singing")
print("training input", example.X.shape)

# %%
# The shipped content-code weight of 1e4 overwhelms the reconstruction
# terms early on; a weight of 1 shows reconstruction learning quickly.
cfg = training.TrainConfig(lambda3=1.0, lr=1e-3, batch_size=1)
model = init_params(ModelConfig(), seed=0)
trainer = training.Trainer(model, cfg)
X, e = example.X[None], example.embedding[None]

first = None
for step in range(1, STEPS + 1):
    report = trainer.train_step(X, e)
    first = first or report
    if step % 10 == 0 or step == 1:
        print(f"step {step:4d}  L1 {report.l1:.5f}  L2 {report.l2:.5f}  L3 {report.l3:.2e}")
print(f"L1 fell {first.l1 / report.l1:.1f}x in {STEPS} steps")
