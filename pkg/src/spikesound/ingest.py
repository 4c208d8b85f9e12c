"""Audio loading, duration rules, and dataset manifest construction.

Reads PCM WAV files (8/16/24-bit integer or 32/64-bit float), mixes down to
mono, and resamples everything to one canonical rate so frame counts are
reproducible across heterogeneous corpora.  Manifests are plain CSV files
(``path,class_label,fold,split``) with paths relative to the manifest
location.
"""

from __future__ import annotations

import csv
import logging
import re
import struct
from dataclasses import dataclass, field
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, resample_poly

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 44100

# Polyphase anti-alias filter: windowed sinc, Kaiser beta 8.6, 64 taps per
# phase.  Fixed so resampled output is bit-reproducible everywhere.
_KAISER_BETA = 8.6
_TAPS_PER_PHASE = 64


@dataclass
class Waveform:
    """Mono audio samples at a fixed rate.

    Attributes
    ----------
    samples : ndarray
        1-D float64 amplitudes in [-1, 1].
    sample_rate : int
        Sampling rate in Hz, > 0.
    source_path : str
        Origin of the audio (file path or synthetic tag).
    duration_s : float
        len(samples) / sample_rate, computed unless given.
    """

    samples: np.ndarray
    sample_rate: int
    source_path: str = ""
    duration_s: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be 1-D")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.duration_s is None:
            self.duration_s = len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class ManifestEntry:
    """One clip in a dataset manifest."""

    path: str
    class_label: str
    fold: int | None = None
    split: str = "train"

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")
        if self.fold is not None and self.fold < 0:
            raise ValueError("fold must be >= 0")


@dataclass
class DatasetRules:
    """How to turn a directory tree into a manifest.

    labels is the declared label set; any file resolving to a label outside
    it is an error.  label_pattern / fold_pattern / split_pattern are regexes
    applied to the file's relative POSIX path (first capture group used);
    with label_pattern None the parent directory name is the label.  A file
    matching split_pattern goes to the test split.  duration_s, if set,
    keeps only clips of that exact duration (within duration_tol seconds).
    """

    labels: tuple[str, ...]
    exclude: tuple[str, ...] = ()
    label_pattern: str | None = None
    fold_pattern: str | None = None
    split_pattern: str | None = None
    duration_s: float | None = None
    duration_tol: float | None = None


def _pcm_to_float(data: np.ndarray) -> np.ndarray:
    """Scale integer PCM to [-1, 1]; float data passes through."""
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # 24-bit PCM arrives as int32 with the payload in the top 3 bytes,
        # so full-scale division works for both 24- and 32-bit.
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise DataError(f"unsupported WAV sample format: {data.dtype}")


def _anti_alias_filter(up: int, down: int) -> np.ndarray:
    max_rate = max(up, down)
    half_len = (_TAPS_PER_PHASE // 2) * max_rate
    return firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", _KAISER_BETA))


def resample(samples: np.ndarray, orig_rate: int, target_rate: int) -> np.ndarray:
    """Polyphase windowed-sinc resampling from orig_rate to target_rate.

    Output length is ceil(n * target / orig).  Identity when the rates match.
    """
    if orig_rate == target_rate:
        return np.asarray(samples, dtype=np.float64)
    g = gcd(int(target_rate), int(orig_rate))
    up, down = int(target_rate) // g, int(orig_rate) // g
    h = _anti_alias_filter(up, down)
    return resample_poly(np.asarray(samples, dtype=np.float64), up, down, window=h)


def load_audio(path: str | Path, target_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Load a PCM WAV file as a mono waveform at target_rate.

    Multi-channel audio is averaged across channels, integer PCM is scaled
    to [-1, 1] by full scale, and the result is resampled with the package's
    fixed polyphase filter.  Deterministic: identical bytes give identical
    samples.

    Raises
    ------
    DataError
        If the file is unreadable, not PCM/float WAV, or has zero length.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError as exc:
        raise DataError(f"cannot read audio file: {path}") from exc
    except ValueError as exc:
        raise DataError(f"unsupported codec in {path}: {exc}") from exc
    except Exception as exc:  # malformed RIFF, truncated file, ...
        raise DataError(f"cannot read audio file {path}: {exc}") from exc
    if data.size == 0:
        raise DataError(f"zero-length audio: {path}")
    x = _pcm_to_float(data)
    if x.ndim == 2:
        x = x.mean(axis=1)
    y = resample(x, rate, target_rate)
    np.clip(y, -1.0, 1.0, out=y)
    return Waveform(samples=y, sample_rate=int(target_rate), source_path=str(path))


def wav_duration(path: str | Path) -> float:
    """Duration in seconds from the WAV header alone (no sample decode)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            riff = fh.read(12)
            if len(riff) < 12 or riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
                raise DataError(f"not a RIFF/WAVE file: {path}")
            byte_rate = None
            block_align = None
            sample_rate = None
            while True:
                hdr = fh.read(8)
                if len(hdr) < 8:
                    break
                tag, size = hdr[:4], struct.unpack("<I", hdr[4:])[0]
                if tag == b"fmt ":
                    fmt = fh.read(size)
                    _, _, sample_rate, byte_rate, block_align, _ = struct.unpack(
                        "<HHIIHH", fmt[:16]
                    )
                elif tag == b"data":
                    if block_align in (None, 0) or sample_rate in (None, 0):
                        raise DataError(f"WAV data chunk before fmt chunk: {path}")
                    return size / (block_align * sample_rate)
                else:
                    fh.seek(size + (size & 1), 1)
    except OSError as exc:
        raise DataError(f"cannot read audio file: {path}") from exc
    raise DataError(f"no data chunk found in {path}")


def center_crop(w: Waveform, seconds: float) -> Waveform:
    """Keep exactly round(seconds * rate) samples around the clip midpoint.

    When the discarded sample count is odd, the extra sample is dropped from
    the end.  Idempotent for a fixed duration.
    """
    n = int(round(seconds * w.sample_rate))
    discard = len(w.samples) - n
    if discard < 0:
        raise DataError(
            f"clip {w.source_path or '<memory>'} is {w.duration_s:.3f}s, "
            f"shorter than requested {seconds}s"
        )
    start = discard // 2
    return Waveform(
        samples=w.samples[start : start + n].copy(),
        sample_rate=w.sample_rate,
        source_path=w.source_path,
    )


def filter_exact_duration(
    entries: list[ManifestEntry],
    seconds: float,
    tolerance: float | None = None,
    root: str | Path = ".",
) -> list[ManifestEntry]:
    """Keep entries whose file duration is within tolerance of seconds.

    Default tolerance is half a sample period at the canonical rate.  Input
    order is preserved; the result is a subsequence of the input.
    """
    if tolerance is None:
        tolerance = 0.5 / DEFAULT_SAMPLE_RATE
    root = Path(root)
    kept = []
    for e in entries:
        if abs(wav_duration(root / e.path) - seconds) <= tolerance:
            kept.append(e)
    return kept


def _extract(pattern: str, relpath: str, what: str) -> str:
    m = re.search(pattern, relpath)
    if not m or not m.groups():
        raise DataError(f"cannot parse {what} from {relpath!r} with {pattern!r}")
    return m.group(1)


def build_manifest(root: str | Path, rules: DatasetRules) -> list[ManifestEntry]:
    """Scan root for .wav files and apply the dataset rules.

    Returns a lexicographically ordered manifest (by relative POSIX path)
    with excluded labels removed; logs per-fold class counts.
    """
    root = Path(root)
    declared = set(rules.labels)
    excluded = set(rules.exclude)
    entries: list[ManifestEntry] = []
    for p in sorted(root.rglob("*.wav"), key=lambda q: q.relative_to(root).as_posix()):
        rel = p.relative_to(root).as_posix()
        if rules.label_pattern is not None:
            label = _extract(rules.label_pattern, rel, "label")
        else:
            label = p.parent.name
        if label in excluded:
            continue
        if label not in declared:
            raise DataError(f"label {label!r} of {rel!r} not in declared label set")
        fold = None
        if rules.fold_pattern is not None:
            raw = _extract(rules.fold_pattern, rel, "fold")
            try:
                fold = int(raw)
            except ValueError as exc:
                raise DataError(f"unparsable fold identifier {raw!r} in {rel!r}") from exc
        split = "train"
        if rules.split_pattern is not None and re.search(rules.split_pattern, rel):
            split = "test"
        entries.append(ManifestEntry(path=rel, class_label=label, fold=fold, split=split))
    if rules.duration_s is not None:
        entries = filter_exact_duration(
            entries, rules.duration_s, rules.duration_tol, root=root
        )
    for (fold, label), count in sorted(fold_class_counts(entries).items(), key=str):
        log.info("manifest: fold=%s class=%s count=%d", fold, label, count)
    return entries


def fold_class_counts(entries: list[ManifestEntry]) -> dict[tuple[int | None, str], int]:
    """Clip count per (fold, class_label)."""
    counts: dict[tuple[int | None, str], int] = {}
    for e in entries:
        key = (e.fold, e.class_label)
        counts[key] = counts.get(key, 0) + 1
    return counts


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    """Write the manifest CSV (UTF-8, LF endings, relative paths)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "class_label", "fold", "split"])
        for e in entries:
            writer.writerow(
                [e.path, e.class_label, "" if e.fold is None else e.fold, e.split]
            )


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read a manifest CSV written by write_manifest."""
    path = Path(path)
    entries = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["path", "class_label", "fold", "split"]:
                raise DataError(f"bad manifest header in {path}: {reader.fieldnames}")
            for row in reader:
                entries.append(
                    ManifestEntry(
                        path=row["path"],
                        class_label=row["class_label"],
                        fold=int(row["fold"]) if row["fold"] != "" else None,
                        split=row["split"],
                    )
                )
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    return entries
