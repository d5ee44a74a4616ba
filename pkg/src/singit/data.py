"""
Audio I/O, dataset manifests, the external source-separation adapter and remixing.

Source separation itself is never done here: :func:`separate` runs whatever
command ``SINGIT_SEPARATOR_CMD`` names, e.g.::

    export SINGIT_SEPARATOR_CMD="spleeter-wrapper {input} {outdir}"

After a zero exit the command must have written ``{outdir}/vocals.wav`` and
``{outdir}/accompaniment.wav``. ``python -m singit.mock_separator`` is a
stand-in that obeys the same contract.
"""
from __future__ import annotations

import json
import logging
import os
import shlex
import subprocess
import tempfile
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from filelock import FileLock
from scipy import signal as sps
from scipy.io import wavfile

from .dsp import SAMPLE_RATE, Waveform
from .errors import AdapterError, AudioIOError, ConfigurationError, DegenerateInputError, ValidationError

log = logging.getLogger(__name__)

SEPARATOR_ENV = "SINGIT_SEPARATOR_CMD"
KIND_FILE = ".kind"
KINDS = ("speech", "singing", "vocals", "instrumental")
MANIFEST_SUFFIX = ".manifest"
RESAMPLE_TAPS = 64
STEM_TOLERANCE = 160


def _read_wav(path):
    path = Path(path)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", wavfile.WavFileWarning)
            sr, data = wavfile.read(path)
    except Exception as exc:
        raise AudioIOError(f"{path}: cannot read audio ({exc})") from exc
    for w in caught:
        if "prematurely" in str(w.message):
            raise AudioIOError(f"{path}: truncated file ({w.message})")
    return sr, data


def _to_float(data: np.ndarray, path) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise AudioIOError(f"{path}: unsupported sample format {data.dtype} (need PCM16 or float32)")


def resample(x: np.ndarray, orig_sr: int, target_sr: int) -> np.ndarray:
    """Polyphase resampling with a Kaiser-windowed sinc, 64 taps per phase."""
    if orig_sr == target_sr:
        return np.asarray(x, dtype=np.float64)
    ratio = Fraction(target_sr, orig_sr)
    up, down = ratio.numerator, ratio.denominator
    rate = max(up, down)
    h = sps.firwin(RESAMPLE_TAPS * rate + 1, 1.0 / rate, window=("kaiser", 8.0))
    return sps.resample_poly(np.asarray(x, dtype=np.float64), up, down, window=h)


def load_audio(path, sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Read a PCM16/float32 WAV as mono at ``sample_rate``.

    Channels are averaged; the result is divided by its peak only if the
    peak exceeds 1.
    """
    sr, data = _read_wav(path)
    x = _to_float(data, path)
    if x.ndim == 2:
        if x.shape[1] > 2:
            raise AudioIOError(f"{path}: {x.shape[1]} channels, only mono/stereo supported")
        x = x.mean(axis=1)
    if x.shape[0] == 0:
        raise AudioIOError(f"{path}: no samples")
    if not np.all(np.isfinite(x)):
        raise AudioIOError(f"{path}: non-finite samples")
    x = resample(x, sr, sample_rate)
    peak = np.max(np.abs(x))
    if peak > 1.0:
        x = x / peak
    return Waveform(x, sample_rate)


def save_audio(path, w: Waveform) -> None:
    """Write ``w`` as a float32 WAV."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))


def audio_duration(path) -> float:
    """Duration from the header (sample count / rate) without decoding."""
    path = Path(path)
    try:
        sr, data = wavfile.read(path, mmap=True)
    except Exception as exc:
        raise AudioIOError(f"{path}: cannot read audio ({exc})") from exc
    return data.shape[0] / sr


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    utterance_id: str
    kind: str
    path: str
    duration_s: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if not self.duration_s > 0:
            raise ValidationError(f"{self.path}: duration must be positive")

    @property
    def key(self):
        return (self.speaker_id, self.utterance_id, self.kind)


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    skipped: int = 0

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self) -> None:
        seen = set()
        for entry in self.entries:
            if entry.key in seen:
                raise ValidationError(f"duplicate manifest key {entry.key}")
            seen.add(entry.key)
            if not Path(entry.path).exists():
                raise ValidationError(f"missing file {entry.path}")

    def speakers(self) -> list[str]:
        return sorted({e.speaker_id for e in self.entries})


def write_manifest(path, manifest) -> None:
    """One JSON object per line, fields in declaration order."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in manifest:
            fh.write(json.dumps(asdict(entry), ensure_ascii=False) + "\n")


def read_manifest(path) -> Manifest:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entries.append(ManifestEntry(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad manifest record ({exc})") from None
    return Manifest(entries)


def _kind_for(directory: Path, root: Path, default_kind: str, cache: dict) -> str:
    # nearest .kind file walking up to (and including) the root
    if directory in cache:
        return cache[directory]
    tag = directory / KIND_FILE
    if tag.is_file():
        kind = tag.read_text(encoding="utf-8").strip()
        if kind not in KINDS:
            raise ValidationError(f"{tag}: unknown kind {kind!r}")
    elif directory == root:
        kind = default_kind
    else:
        kind = _kind_for(directory.parent, root, default_kind, cache)
    cache[directory] = kind
    return kind


def ingest(root, default_kind: str = "speech") -> Manifest:
    """Index a speaker-per-directory corpus.

    ``root/<speaker_id>/**/<name>.wav`` becomes one entry whose utterance id is
    the path below the speaker directory without extension. The kind comes
    from the nearest ``.kind`` file (containing e.g. ``singing``) or
    ``default_kind``. Other files are skipped and counted.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"{root}: not a directory")
    if default_kind not in KINDS:
        raise ValidationError(f"unknown kind {default_kind!r}")
    manifest = Manifest()
    cache: dict = {}
    for speaker_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for path in sorted(p for p in speaker_dir.rglob("*") if p.is_file()):
            if path.name == KIND_FILE:
                continue
            if path.suffix.lower() != ".wav":
                manifest.skipped += 1
                continue
            utt = path.relative_to(speaker_dir).with_suffix("").as_posix()
            kind = _kind_for(path.parent, root, default_kind, cache)
            manifest.entries.append(
                ManifestEntry(speaker_dir.name, utt, kind, str(path), audio_duration(path))
            )
    if not manifest.entries:
        raise DegenerateInputError(f"{root}: no audio files found")
    if manifest.skipped:
        log.warning("skipped %d non-audio files under %s", manifest.skipped, root)
    return manifest


def separator_command(command: str | None = None) -> str:
    command = command or os.environ.get(SEPARATOR_ENV)
    if not command:
        raise ConfigurationError(
            f"no source separator configured; set {SEPARATOR_ENV} to a command "
            "template using {input} and {outdir}"
        )
    return command


def separate(song, command: str | None = None, outdir=None, sample_rate: int = SAMPLE_RATE):
    """Split ``song`` into ``(vocals, instrumental)`` via the external adapter.

    Concurrent calls sharing an ``outdir`` are serialized with a lock file.
    """
    command = separator_command(command)
    song = Path(song)
    if not song.is_file():
        raise AudioIOError(f"{song}: no such file")
    if outdir is None:
        with tempfile.TemporaryDirectory(prefix="singit-sep-") as tmp:
            return _run_separator(command, song, Path(tmp), sample_rate)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with FileLock(str(outdir / ".separate.lock")):
        return _run_separator(command, song, outdir, sample_rate)


def _run_separator(command, song, outdir, sample_rate):
    argv = [arg.format(input=str(song), outdir=str(outdir)) for arg in shlex.split(command)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except OSError as exc:
        raise AdapterError(f"cannot run separator {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        raise AdapterError(
            f"separator exited with status {proc.returncode}\n"
            f"command: {shlex.join(argv)}\nstderr: {proc.stderr[-2000:]}"
        )
    stems = []
    for name in ("vocals.wav", "accompaniment.wav"):
        path = outdir / name
        if not path.is_file():
            raise AdapterError(f"separator did not produce {path}")
        stems.append(load_audio(path, sample_rate))
    vocals, instrumental = stems
    if abs(len(vocals) - len(instrumental)) > STEM_TOLERANCE:
        raise AdapterError(
            f"stem lengths differ by {abs(len(vocals) - len(instrumental))} samples"
        )
    return vocals, instrumental


def remix(vocals: Waveform, instrumental: Waveform, vocal_gain: float = 1.0) -> Waveform:
    """Sum the stems, zero-padding the shorter; rescale by 1/peak if the peak exceeds 1."""
    if vocals.sample_rate != instrumental.sample_rate:
        raise ValidationError(
            f"sample rates differ: {vocals.sample_rate} vs {instrumental.sample_rate}"
        )
    n = max(len(vocals), len(instrumental))
    mix = np.zeros(n)
    mix[: len(vocals)] += vocal_gain * vocals.samples
    mix[: len(instrumental)] += instrumental.samples
    peak = np.max(np.abs(mix)) if n else 0.0
    if peak > 1.0:
        mix /= peak
    return Waveform(mix, vocals.sample_rate)
