"""Benchmark orchestration: synthetic corpora, full pipeline runs, reports.

A bench run encodes every clip with each selected codec, decodes, scores
reconstruction per band and per class, measures firing rates and encoding
cost, optionally trains the spiking classifier, and emits plot-ready CSVs
plus a run_summary.json echoing the full configuration.  Given the same
config and seed, every non-timing output byte is reproducible.
"""

from __future__ import annotations

import json
import logging
import platform
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
import scipy
from scipy.io import wavfile

from . import __version__
from .codec import CODEC_IDS, CodecConfig, decode_matrix, encode_matrix, serialized_size
from .errors import ConfigError, DataError
from .frontend import (
    FrontendConfig,
    FeatureMatrix,
    mel_spectrogram,
    partition_bands,
    N_BANDS,
)
from .ingest import ManifestEntry, Waveform, center_crop, load_audio, read_manifest, write_manifest
from .metrics import (
    encoder_state_bytes,
    firing_rate,
    score_matrix,
    score_per_band,
    score_per_class,
    write_efficiency_csv,
    write_per_band_csv,
    write_per_class_csv,
)
from .snn import ProtocolSample, SnnConfig, run_protocol

log = logging.getLogger(__name__)

SYNTH_CLASSES = ("tone", "chirp", "band_noise", "am_tone", "impulse_train")


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale corpus of spectrally separable classes."""

    n_clips: int = 40
    classes: tuple[str, ...] = SYNTH_CLASSES
    duration_s: float = 5.0
    sample_rate: int = 44100

    def __post_init__(self):
        unknown = set(self.classes) - set(SYNTH_CLASSES)
        if unknown:
            raise ConfigError(f"unknown synthetic classes: {sorted(unknown)}")
        if self.n_clips < len(self.classes):
            raise ConfigError("need at least one clip per class")


@dataclass
class RunConfig:
    dataset: str = "synthetic"  # manifest path or "synthetic"
    codecs: tuple[str, ...] = CODEC_IDS
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    codec_params: dict[str, CodecConfig] = field(
        default_factory=lambda: {c: CodecConfig() for c in CODEC_IDS}
    )
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    snn: SnnConfig = field(default_factory=SnnConfig)
    run_snn: bool = False
    crop_seconds: float | None = None
    seed: int = 1234
    output_dir: str = "runs/out"

    def __post_init__(self):
        if not self.codecs:
            raise ConfigError("at least one codec must be selected")
        unknown = set(self.codecs) - set(CODEC_IDS)
        if unknown:
            raise ConfigError(f"unknown codecs: {sorted(unknown)}")
        if len(set(self.codecs)) != len(self.codecs):
            raise ConfigError(f"duplicate codecs: {list(self.codecs)}")
        for c in self.codecs:
            if c not in self.codec_params:
                self.codec_params[c] = CodecConfig()


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

def _tone(rng, n, rate):
    f = 440.0 * (1.0 + rng.uniform(-0.05, 0.05))
    phase = rng.uniform(0, 2 * np.pi)
    t = np.arange(n) / rate
    return 0.5 * np.sin(2 * np.pi * f * t + phase)


def _chirp(rng, n, rate):
    f0 = 800.0 * (1.0 + rng.uniform(-0.05, 0.05))
    f1 = 1600.0 * (1.0 + rng.uniform(-0.05, 0.05))
    t = np.arange(n) / rate
    sweep = f0 + (f1 - f0) * t / t[-1] / 2.0
    return 0.5 * np.sin(2 * np.pi * sweep * t + rng.uniform(0, 2 * np.pi))


def _band_noise(rng, n, rate, lo=4800.0, hi=7200.0):
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    x = np.fft.irfft(spec, n)
    peak = np.abs(x).max()
    return 0.5 * x / peak if peak > 0 else x


def _am_tone(rng, n, rate):
    f = 2500.0 * (1.0 + rng.uniform(-0.05, 0.05))
    fm = rng.uniform(3.0, 8.0)
    t = np.arange(n) / rate
    env = 1.0 + 0.8 * np.sin(2 * np.pi * fm * t)
    return 0.25 * env * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))


def _impulse_train(rng, n, rate):
    x = np.zeros(n)
    period = 0.1 * (1.0 + rng.uniform(-0.1, 0.1))
    pos = rng.uniform(0.0, period)
    while pos < n / rate:
        x[int(pos * rate)] = 0.9 * rng.choice([-1.0, 1.0])
        pos += period * (1.0 + rng.uniform(-0.1, 0.1))
    click = np.exp(-np.arange(int(0.002 * rate)) / (0.0005 * rate))
    return np.convolve(x, click)[:n]


_GENERATORS = {
    "tone": _tone,
    "chirp": _chirp,
    "band_noise": _band_noise,
    "am_tone": _am_tone,
    "impulse_train": _impulse_train,
}

_NOISE_FLOOR = 0.01


def generate_synthetic(spec: SyntheticSpec,
                       seed: int) -> tuple[list[Waveform], list[ManifestEntry]]:
    """Deterministic in-memory corpus; clip i depends only on (seed, i).

    Clips are dealt to classes round-robin so the manifest stays balanced;
    every clip gets a small broadband noise floor so all mel channels carry
    signal.  Every fourth clip of a class goes to the test split.
    """
    n = int(round(spec.duration_s * spec.sample_rate))
    waveforms, entries = [], []
    per_class_counter = {c: 0 for c in spec.classes}
    for i in range(spec.n_clips):
        kind = spec.classes[i % len(spec.classes)]
        rng = np.random.default_rng([seed, i])
        x = _GENERATORS[kind](rng, n, spec.sample_rate)
        x = x + _NOISE_FLOOR * rng.standard_normal(n)
        np.clip(x, -1.0, 1.0, out=x)
        j = per_class_counter[kind]
        per_class_counter[kind] += 1
        name = f"{kind}/{kind}_{j:03d}.wav"
        waveforms.append(Waveform(samples=x, sample_rate=spec.sample_rate,
                                  source_path=name))
        entries.append(ManifestEntry(path=name, class_label=kind, fold=None,
                                     split="test" if j % 4 == 3 else "train"))
    return waveforms, entries


def write_synthetic_corpus(spec: SyntheticSpec, seed: int,
                           out_dir: str | Path) -> Path:
    """Materialize the corpus as 16-bit WAVs plus manifest.csv; returns the
    manifest path.  Byte-identical for identical (spec, seed)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    waveforms, entries = generate_synthetic(spec, seed)
    for w, e in zip(waveforms, entries):
        path = out_dir / e.path
        path.parent.mkdir(parents=True, exist_ok=True)
        pcm = np.round(w.samples * 32767.0).astype(np.int16)
        wavfile.write(str(path), w.sample_rate, pcm)
    manifest_path = out_dir / "manifest.csv"
    write_manifest(entries, manifest_path)
    return manifest_path


# ---------------------------------------------------------------------------
# Bench
# ---------------------------------------------------------------------------

@dataclass
class ClipRecord:
    entry: ManifestEntry
    features: FeatureMatrix


def _load_corpus(cfg: RunConfig, out_dir: Path) -> tuple[str, list[ClipRecord]]:
    if cfg.dataset == "synthetic":
        manifest_path = write_synthetic_corpus(cfg.synthetic, cfg.seed,
                                               out_dir / "corpus")
        dataset_name = "synthetic"
    else:
        manifest_path = Path(cfg.dataset)
        dataset_name = manifest_path.stem
    entries = read_manifest(manifest_path)
    if not entries:
        raise DataError(f"empty manifest: {manifest_path}")
    root = manifest_path.parent
    records = []
    for e in entries:
        try:
            w = load_audio(root / e.path, cfg.frontend.sample_rate)
            if cfg.crop_seconds is not None:
                w = center_crop(w, cfg.crop_seconds)
            records.append(ClipRecord(entry=e, features=mel_spectrogram(w, cfg.frontend)))
        except DataError as exc:
            raise DataError(f"clip {e.path!r}: {exc}") from exc
    return dataset_name, records


@dataclass
class BenchResult:
    output_dir: Path
    per_band_rows: list[tuple[str, int, float, float]]
    per_class_rows: list[tuple[str, str, float]]
    efficiency_rows: list[tuple[str, str, float, float, float]]
    classification_rows: list[tuple[str, str, str, float]]


def run_bench(cfg: RunConfig) -> BenchResult:
    """Full pipeline for every selected codec; writes the report files.

    Outputs land in cfg.output_dir: per_band.csv, per_class.csv,
    efficiency.csv, run_summary.json, and classification.csv when the SNN
    protocol is enabled.  All results are staged in memory and written in
    one pass so a failure leaves no partial report behind.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_name, records = _load_corpus(cfg, out_dir)
    bands = partition_bands(records[0].features.channel_center_hz)

    per_band_rows = []
    per_class_rows = []
    efficiency_rows = []
    classification_rows = []
    for codec in sorted(cfg.codecs):
        ccfg = cfg.codec_params[codec]
        band_errs = np.zeros(N_BANDS)
        band_counts = np.zeros(N_BANDS, dtype=np.int64)
        class_scores = []
        rates, times_ms, aux = [], [], []
        samples = []
        for rec in records:
            t0 = time.perf_counter()
            st = encode_matrix(rec.features, ccfg, codec)
            times_ms.append(1000.0 * (time.perf_counter() - t0))
            est = decode_matrix(st)
            overall = score_matrix(rec.features.values, est,
                                   class_label=rec.entry.class_label)
            class_scores.append((rec.entry.class_label, overall))
            for sc in score_per_band(rec.features, est, bands):
                if not sc.absent:
                    band_errs[sc.band] += sc.errdb
                    band_counts[sc.band] += 1
            rates.append(firing_rate(st))
            aux.append(serialized_size(st) + encoder_state_bytes(st))
            if cfg.run_snn:
                samples.append(ProtocolSample(
                    inputs=st.spikes.astype(np.float64),
                    label=rec.entry.class_label,
                    fold=rec.entry.fold,
                    split=rec.entry.split,
                ))
        for b in range(N_BANDS):
            if band_counts[b]:
                mean_err = band_errs[b] / band_counts[b]
                per_band_rows.append((codec, b, mean_err, -mean_err))
        for label, mean_err in score_per_class(class_scores).items():
            per_class_rows.append((codec, label, mean_err))
        efficiency_rows.append((
            codec, dataset_name, float(np.mean(rates)),
            float(np.median(times_ms)), float(np.mean(aux)),
        ))
        if cfg.run_snn:
            result = run_protocol(samples, cfg.snn)
            for fr in result.per_fold:
                fold_label = "holdout" if fr.fold is None else str(fr.fold)
                classification_rows.append((codec, dataset_name, fold_label,
                                            fr.macro_acc))
            classification_rows.append((codec, dataset_name, "mean",
                                        result.mean_macro_acc))
        log.info("bench: codec=%s clips=%d mean_rate=%.2f%%",
                 codec, len(records), float(np.mean(rates)))

    written = []
    try:
        write_per_band_csv(out_dir / "per_band.csv", per_band_rows)
        written.append(out_dir / "per_band.csv")
        write_per_class_csv(out_dir / "per_class.csv", per_class_rows)
        written.append(out_dir / "per_class.csv")
        write_efficiency_csv(out_dir / "efficiency.csv", efficiency_rows)
        written.append(out_dir / "efficiency.csv")
        if cfg.run_snn:
            _write_classification_csv(out_dir / "classification.csv",
                                      classification_rows)
            written.append(out_dir / "classification.csv")
        _write_run_summary(out_dir / "run_summary.json", cfg, dataset_name, records)
        written.append(out_dir / "run_summary.json")
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return BenchResult(
        output_dir=out_dir,
        per_band_rows=per_band_rows,
        per_class_rows=per_class_rows,
        efficiency_rows=efficiency_rows,
        classification_rows=classification_rows,
    )


def _write_classification_csv(path: Path, rows) -> None:
    lines = ["codec,dataset,fold,macro_acc"]
    for codec, ds, fold, acc in rows:
        lines.append(f"{codec},{ds},{fold},{acc:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_run_summary(path: Path, cfg: RunConfig, dataset_name: str,
                       records: list[ClipRecord]) -> None:
    classes = sorted({r.entry.class_label for r in records})
    summary = {
        "config": run_config_to_dict(cfg),
        "seed": cfg.seed,
        "dataset": {
            "name": dataset_name,
            "n_clips": len(records),
            "classes": classes,
            "n_frames": records[0].features.n_frames,
        },
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "spikesound": __version__,
        },
    }
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# Report comparison
# ---------------------------------------------------------------------------

def _read_csv_rows(path: Path) -> list[dict[str, str]]:
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _codec_ranking(rows, key_field, value_field):
    """Per key: codecs sorted ascending by value (lower is better)."""
    table: dict[str, list[tuple[float, str]]] = {}
    for row in rows:
        table.setdefault(row[key_field], []).append(
            (float(row[value_field]), row["codec"])
        )
    return {k: [c for _, c in sorted(v)] for k, v in sorted(table.items())}


def _win_counts(rows, key_field, value_field):
    """Codec -> number of keys where it is strictly best."""
    values: dict[str, dict[str, float]] = {}
    for row in rows:
        values.setdefault(row[key_field], {})[row["codec"]] = float(row[value_field])
    wins: dict[str, int] = {}
    for key, per_codec in values.items():
        best = min(per_codec.values())
        winners = [c for c, v in per_codec.items() if v == best]
        if len(winners) == 1:
            wins[winners[0]] = wins.get(winners[0], 0) + 1
    return wins


def compare_report(report_a: str | Path, report_b: str | Path) -> dict:
    """Ordering summary for two bench reports over the same corpus.

    Within each report, codecs are ranked by ERRdB per band and per class
    and by firing rate (ascending; lower is better throughout).  Across the
    two reports, each (codec, key) cell is compared and marked 'a', 'b', or
    'tie'.  Raises DataError when the corpora differ.
    """
    dirs = {"a": Path(report_a), "b": Path(report_b)}
    summaries = {}
    for tag, d in dirs.items():
        summary_path = d / "run_summary.json"
        if not summary_path.exists():
            raise DataError(f"missing run_summary.json in {d}")
        summaries[tag] = json.loads(summary_path.read_text(encoding="utf-8"))
    if summaries["a"]["dataset"] != summaries["b"]["dataset"]:
        raise DataError(
            "mismatched corpora: "
            f"{summaries['a']['dataset']} vs {summaries['b']['dataset']}"
        )

    out: dict = {"reports": {t: str(d) for t, d in dirs.items()}}
    tables = {}
    for tag, d in dirs.items():
        band_rows = _read_csv_rows(d / "per_band.csv")
        class_rows = _read_csv_rows(d / "per_class.csv")
        eff_rows = _read_csv_rows(d / "efficiency.csv")
        tables[tag] = {"band": band_rows, "class": class_rows, "eff": eff_rows}
        out[f"report_{tag}"] = {
            "errdb_ranking_per_band": _codec_ranking(band_rows, "band", "errdb"),
            "errdb_ranking_per_class": _codec_ranking(class_rows, "class", "errdb"),
            "firing_rate_ranking": _codec_ranking(eff_rows, "dataset",
                                                  "firing_rate_pct"),
            "band_wins": _win_counts(band_rows, "band", "errdb"),
            "class_wins": _win_counts(class_rows, "class", "errdb"),
        }

    def cell_relations(field_key, key_field, value_field):
        rel = {}
        a_map = {(r["codec"], r[key_field]): float(r[value_field])
                 for r in tables["a"][field_key]}
        b_map = {(r["codec"], r[key_field]): float(r[value_field])
                 for r in tables["b"][field_key]}
        for cell in sorted(set(a_map) & set(b_map)):
            va, vb = a_map[cell], b_map[cell]
            rel["/".join(cell)] = "tie" if va == vb else ("a" if va < vb else "b")
        return rel

    out["cross_report"] = {
        "errdb_per_band": cell_relations("band", "band", "errdb"),
        "errdb_per_class": cell_relations("class", "class", "errdb"),
        "firing_rate": cell_relations("eff", "dataset", "firing_rate_pct"),
    }
    relations = [v for table in out["cross_report"].values() for v in table.values()]
    out["all_ties"] = bool(relations) and all(v == "tie" for v in relations)
    return out


# ---------------------------------------------------------------------------
# Config (de)serialization
# ---------------------------------------------------------------------------

def run_config_to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["codecs"] = list(cfg.codecs)
    d["frontend"] = asdict(cfg.frontend)
    d["synthetic"] = asdict(cfg.synthetic)
    d["synthetic"]["classes"] = list(cfg.synthetic.classes)
    d["snn"] = asdict(cfg.snn)
    d["snn"]["hidden_sizes"] = list(cfg.snn.hidden_sizes)
    d["codec_params"] = {k: asdict(v) for k, v in cfg.codec_params.items()}
    return d


def _build(cls, data: dict, what: str):
    valid = set(cls.__dataclass_fields__)
    unknown = set(data) - valid
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what} config: {exc}") from exc


def run_config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    kwargs: dict = {}
    if "frontend" in data:
        kwargs["frontend"] = _build(FrontendConfig, data.pop("frontend"), "frontend")
    if "synthetic" in data:
        synth = dict(data.pop("synthetic"))
        if "classes" in synth:
            synth["classes"] = tuple(synth["classes"])
        kwargs["synthetic"] = _build(SyntheticSpec, synth, "synthetic")
    if "snn" in data:
        snn = dict(data.pop("snn"))
        if "hidden_sizes" in snn:
            snn["hidden_sizes"] = tuple(snn["hidden_sizes"])
        kwargs["snn"] = _build(SnnConfig, snn, "snn")
    if "codec_params" in data:
        kwargs["codec_params"] = {
            k: _build(CodecConfig, v, f"codec {k}")
            for k, v in data.pop("codec_params").items()
        }
    if "codecs" in data:
        data["codecs"] = tuple(data["codecs"])
    kwargs.update(data)
    return _build(RunConfig, kwargs, "run")


def load_run_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a JSON object: {path}")
    return run_config_from_dict(data)
