"""
``singit`` command line.

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.

Settings that mirror a field of ``TrainConfig``, ``ModelConfig`` or
``StftConfig`` (``lr``, ``max_steps``, ``downsample``, ``hop``, ...) are
resolved with the precedence: command-line flag, then the environment
variable ``SINGIT_<FIELD>`` (e.g. ``SINGIT_LR``), then the JSON file given by
``--config``, then the built-in default.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SingitError

log = logging.getLogger("singit")

ENV_PREFIX = "SINGIT_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _config_classes():
    from .dsp import StftConfig
    from .model import ModelConfig
    from .training import TrainConfig

    return TrainConfig, ModelConfig, StftConfig


def _coerce(value, default):
    if isinstance(default, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        items = value.split(",") if isinstance(value, str) else value
        return tuple(float(v) for v in items)
    return value


def resolve_config(cls, flags: dict, file_values: dict, environ=os.environ):
    """Instantiate ``cls`` taking each field from flag > env > file > default."""
    kwargs = {}
    defaults = cls()
    for f in dataclasses.fields(cls):
        default = getattr(defaults, f.name)
        if flags.get(f.name) is not None:
            kwargs[f.name] = _coerce(flags[f.name], default)
        elif ENV_PREFIX + f.name.upper() in environ:
            kwargs[f.name] = _coerce(environ[ENV_PREFIX + f.name.upper()], default)
        elif f.name in file_values:
            kwargs[f.name] = _coerce(file_values[f.name], default)
    return cls(**kwargs)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise SingitError(f"{path}: config must be a JSON object")
    known = {f.name for cls in _config_classes() for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise SingitError(f"{path}: unknown config keys {unknown}")
    return values


def _add_config_flags(parser, cls, skip=()):
    group = parser.add_argument_group(f"{cls.__name__} fields")
    defaults = cls()
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        default = getattr(defaults, f.name)
        group.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f.name,
            default=None,
            type=str if isinstance(default, (tuple, str)) else type(default),
            help=f"default {default}",
        )


def _stft_config(args):
    from .dsp import StftConfig

    return resolve_config(StftConfig, vars(args), _load_config_file(getattr(args, "config", None)))


def cmd_ingest(args):
    from .data import ingest, write_manifest

    manifest = ingest(args.root, args.default_kind)
    write_manifest(args.out, manifest)
    print(f"{len(manifest)} entries, {manifest.skipped} skipped -> {args.out}")


def cmd_separate(args):
    from .data import save_audio, separate

    vocals, instrumental = separate(args.song, args.separator, args.outdir)
    save_audio(Path(args.outdir) / "vocals.wav", vocals)
    save_audio(Path(args.outdir) / "accompaniment.wav", instrumental)


def cmd_embed(args):
    from .data import load_audio
    from .speaker import embed_speaker, save_embedding

    e = embed_speaker([load_audio(p) for p in args.speech], args.backend)
    save_embedding(args.out, e)


def cmd_train(args):
    from .checkpoint import load_checkpoint, save_checkpoint
    from .data import load_audio, read_manifest
    from .model import ModelConfig
    from .training import TrainConfig, make_optimizer, prepare_example, train_loop

    file_values = _load_config_file(args.config)
    train_cfg = resolve_config(TrainConfig, vars(args), file_values)
    model_cfg = resolve_config(ModelConfig, vars(args), file_values)
    stft_cfg = resolve_config(_config_classes()[2], vars(args), file_values)

    manifest = read_manifest(args.manifest)
    manifest.validate()
    examples = []
    for entry in manifest:
        if entry.kind == "instrumental":
            continue
        kind = "singing" if entry.kind == "vocals" else entry.kind
        examples.append(prepare_example(load_audio(entry.path), kind, entry.speaker_id, args.backend, stft_cfg))

    model = optimizer = None
    if args.resume:
        model, optimizer, _ = load_checkpoint(args.resume, lambda p: make_optimizer(p, train_cfg))
    model, curve = train_loop(examples, train_cfg, model_cfg, args.out_dir, model, optimizer)
    save_checkpoint(Path(args.out_dir) / "final.ckpt", model, metadata={"train_config": dataclasses.asdict(train_cfg)})
    if curve:
        print(f"step {model.step}: total {curve[-1].total:.6g}")


def _target(args):
    from .data import load_audio
    from .speaker import load_embedding

    if args.embedding:
        return load_embedding(args.embedding)
    if not args.speech:
        raise UsageError("transfer: one of --speech or --embedding is required")
    return [load_audio(p) for p in args.speech]


def cmd_transfer(args):
    from .checkpoint import load_checkpoint
    from .data import load_audio, save_audio
    from .pipeline import TransferOptions, transfer, transfer_song

    if bool(args.song) == bool(args.vocals):
        raise UsageError("transfer: give exactly one of --song or --vocals")
    target = _target(args)
    options = TransferOptions(
        gl_iters=args.gl_iters,
        gl_seed=args.seed,
        gl_init="zero" if args.zero_phase else "random",
        backend=args.backend,
        source_embedding_to_encoder=args.source_embedding_to_encoder,
        stft=_stft_config(args),
    )
    if args.song:
        from .data import separator_command

        separator_command(args.separator)  # fail before loading the model
        model, _ = load_checkpoint(args.ckpt)
        out = transfer_song(args.song, target, model, options, args.separator, args.vocal_gain)
    else:
        model, _ = load_checkpoint(args.ckpt)
        out = transfer(load_audio(args.vocals), target, model, options)
    save_audio(args.out, out)


def cmd_vocode(args):
    from .data import load_audio, save_audio
    from .dsp import log_spectrogram, log_to_mag, magnitude_to_waveform

    cfg = _stft_config(args)
    if args.input.endswith(".npy"):
        X = np.load(args.input)
        length = None
    else:
        w = load_audio(args.input, cfg.sample_rate)
        X, length = log_spectrogram(w, cfg), len(w)
    out = magnitude_to_waveform(
        log_to_mag(X), cfg, iters=args.gl_iters, seed=args.seed,
        init="zero" if args.zero_phase else "random", length=length,
    )
    save_audio(args.out, out)


def _read_ratings(lines):
    ratings = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            ratings.append(int(line))
        except ValueError:
            raise SingitError(f"not an integer rating: {line!r}") from None
    return ratings


def cmd_survey_stats(args):
    from .survey import survey_stats

    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            ratings = _read_ratings(fh)
    else:
        ratings = _read_ratings(sys.stdin)
    result = survey_stats(ratings)
    print(str(result) + (" (degenerate: n=1)" if result.degenerate else ""))


def build_parser() -> argparse.ArgumentParser:
    TrainConfig, ModelConfig, StftConfig = _config_classes()
    parser = _Parser(prog="singit", description="Zero-shot speech-to-singing style transfer.")
    parser.add_argument("--version", action="version", version=f"singit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("ingest", help="index a speaker-per-directory corpus into a .manifest")
    p.add_argument("root")
    p.add_argument("--out", required=True)
    p.add_argument("--default-kind", default="speech", choices=("speech", "singing", "vocals", "instrumental"))
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("separate", help="split a song into vocals/accompaniment via the external separator")
    p.add_argument("--song", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--separator", help="command template with {input} and {outdir} (default: $SINGIT_SEPARATOR_CMD)")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("embed", help="compute a speaker embedding file (256 little-endian float32)")
    p.add_argument("--speech", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="baseline")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="self-reconstruction training from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="JSON file of config fields")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--backend", default="baseline")
    _add_config_flags(p, TrainConfig, skip=("betas", "eps"))
    _add_config_flags(p, ModelConfig)
    _add_config_flags(p, StftConfig, skip=("window",))
    p.set_defaults(func=cmd_train)

    def gl_flags(p):
        p.add_argument("--gl-iters", type=int, default=60)
        p.add_argument("--seed", type=int, default=0, help="Griffin-Lim phase seed")
        p.add_argument("--zero-phase", action="store_true", help="zero initial phase instead of random")
        p.add_argument("--config", help="JSON file of config fields")
        _add_config_flags(p, StftConfig, skip=("window",))

    p = sub.add_parser("transfer", help="sing a song (or vocal track) in the voice of a speaker")
    p.add_argument("--song")
    p.add_argument("--vocals", help="already-separated vocal track; skips separation")
    p.add_argument("--speech", nargs="+")
    p.add_argument("--embedding", help="precomputed embedding file instead of --speech")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--separator")
    p.add_argument("--vocal-gain", type=float, default=1.0)
    p.add_argument("--backend", default="baseline")
    p.add_argument("--source-embedding-to-encoder", action="store_true",
                   help="ablation: encoder sees the singer's own embedding")
    gl_flags(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("vocode", help="Griffin-Lim resynthesis of a WAV or a .npy log-spectrogram")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    gl_flags(p)
    p.set_defaults(func=cmd_vocode)

    p = sub.add_parser(
        "survey-stats",
        help="mean and 95%% confidence half-width of 1-5 ratings",
        description="Reads one integer rating (1-5) per line from --file or stdin and prints "
        "'mean±halfwidth'. The half-width is t(0.975, n-1) * s / sqrt(n) (Student-t interval, "
        "sample standard deviation s).",
    )
    p.add_argument("--file")
    p.set_defaults(func=cmd_survey_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except SystemExit as exc:  # --help / --version
        return exc.code if isinstance(exc.code, int) else 0
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (SingitError, OSError, ValueError) as exc:
        print(f"singit: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
