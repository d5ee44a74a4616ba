"""Stand-in source separator honouring the adapter contract.

    python -m singit.mock_separator INPUT OUTDIR [--instrumental FILE] [--fail]

Copies INPUT to OUTDIR/vocals.wav. OUTDIR/accompaniment.wav is silence of
the same length, or FILE trimmed/zero-padded to that length.
"""
import argparse
import sys

import numpy as np

from .data import load_audio, save_audio
from .dsp import Waveform


def main(argv=None):
    parser = argparse.ArgumentParser(prog="singit.mock_separator")
    parser.add_argument("input")
    parser.add_argument("outdir")
    parser.add_argument("--instrumental")
    parser.add_argument("--fail", action="store_true", help="exit 1 without output")
    args = parser.parse_args(argv)
    if args.fail:
        print("mock separator: failing on request", file=sys.stderr)
        return 1
    song = load_audio(args.input)
    accompaniment = np.zeros(len(song))
    if args.instrumental:
        inst = load_audio(args.instrumental).samples[: len(song)]
        accompaniment[: len(inst)] = inst
    save_audio(f"{args.outdir}/vocals.wav", song)
    save_audio(f"{args.outdir}/accompaniment.wav", Waveform(accompaniment, song.sample_rate))
    return 0


if __name__ == "__main__":
    sys.exit(main())
