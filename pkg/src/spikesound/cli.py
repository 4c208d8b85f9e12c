"""Command-line entry point.

Subcommands: synth, encode, reconstruct, bench, train, compare.  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .codec import decode_matrix, encode_matrix, load_spikes, save_spikes
from .errors import ConfigError, DataError, NumericError
from .frontend import load_features, mel_spectrogram, save_features
from .harness import (
    RunConfig,
    compare_report,
    load_run_config,
    run_bench,
    write_synthetic_corpus,
)
from .ingest import center_crop, load_audio, read_manifest
from .metrics import score_matrix
from .snn import ProtocolSample, run_protocol

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="run configuration JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--codec", choices=["sf", "mw", "tae"],
                   help="restrict the run to one codec")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikesound",
        description="Spike-encoding benchmark harness for environmental sound",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("synth", "generate the synthetic corpus (WAVs + manifest.csv)"),
        ("encode", "encode a corpus to spike-train files"),
        ("reconstruct", "decode spike files and score the reconstruction"),
        ("bench", "full encode/decode/score benchmark with CSV reports"),
        ("train", "run the spiking-classifier protocol"),
        ("compare", "rank codecs across two bench reports"),
    ]:
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        if name == "reconstruct":
            p.add_argument("encoded_dir", type=Path,
                           help="directory produced by the encode subcommand")
        if name == "compare":
            p.add_argument("report_a", type=Path)
            p.add_argument("report_b", type=Path)
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.codec is not None:
        cfg = replace(cfg, codecs=(args.codec,))
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(args.out))
    return cfg


def _cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    manifest = write_synthetic_corpus(cfg.synthetic, cfg.seed,
                                      Path(cfg.output_dir))
    print(f"wrote synthetic corpus with manifest {manifest}")
    return EXIT_OK


def _corpus_features(cfg: RunConfig, out_dir: Path):
    if cfg.dataset == "synthetic":
        manifest = write_synthetic_corpus(cfg.synthetic, cfg.seed, out_dir / "corpus")
    else:
        manifest = Path(cfg.dataset)
    entries = read_manifest(manifest)
    root = manifest.parent
    for e in entries:
        try:
            w = load_audio(root / e.path, cfg.frontend.sample_rate)
            if cfg.crop_seconds is not None:
                w = center_crop(w, cfg.crop_seconds)
            yield e, mel_spectrogram(w, cfg.frontend)
        except DataError as exc:
            raise DataError(f"clip {e.path!r}: {exc}") from exc


def _cmd_encode(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for e, feats in _corpus_features(cfg, out_dir):
        feat_rel = Path("features") / Path(e.path).with_suffix(".spkf")
        (out_dir / feat_rel).parent.mkdir(parents=True, exist_ok=True)
        save_features(feats, out_dir / feat_rel)
        for codec in sorted(cfg.codecs):
            st = encode_matrix(feats, cfg.codec_params[codec], codec)
            spike_rel = Path("spikes") / Path(e.path).with_suffix(f".{codec}.spk")
            (out_dir / spike_rel).parent.mkdir(parents=True, exist_ok=True)
            save_spikes(st, out_dir / spike_rel)
            index.append({"clip": e.path, "class_label": e.class_label,
                          "codec": codec, "spikes": spike_rel.as_posix(),
                          "features": feat_rel.as_posix()})
    (out_dir / "encode_index.json").write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"encoded {len(index)} spike files under {out_dir}")
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    enc_dir = Path(args.encoded_dir)
    index_path = enc_dir / "encode_index.json"
    if not index_path.exists():
        raise DataError(f"no encode_index.json in {enc_dir}")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    out_dir = Path(args.out) if args.out else enc_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["codec,clip,class,errdb,snr"]
    n = 0
    for item in index:
        if args.codec and item["codec"] != args.codec:
            continue
        st = load_spikes(enc_dir / item["spikes"])
        feats = load_features(enc_dir / item["features"])
        est = decode_matrix(st)
        score = score_matrix(feats.values, est, class_label=item["class_label"])
        lines.append(f"{item['codec']},{item['clip']},{item['class_label']},"
                     f"{score.errdb:.6f},{score.snr:.6f}")
        n += 1
    (out_dir / "reconstruct_scores.csv").write_text("\n".join(lines) + "\n",
                                                    encoding="utf-8")
    print(f"decoded and scored {n} spike files; scores in {out_dir}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _resolve_config(args)
    result = run_bench(cfg)
    print(f"bench complete: reports in {result.output_dir}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = ["codec,dataset,fold,macro_acc"]
    dataset_name = "synthetic" if cfg.dataset == "synthetic" else Path(cfg.dataset).stem
    corpus = list(_corpus_features(cfg, out_dir))
    for codec in sorted(cfg.codecs):
        samples = []
        for e, feats in corpus:
            st = encode_matrix(feats, cfg.codec_params[codec], codec)
            samples.append(ProtocolSample(
                inputs=st.spikes.astype(np.float64), label=e.class_label,
                fold=e.fold, split=e.split,
            ))
        result = run_protocol(samples, cfg.snn)
        for fr in result.per_fold:
            fold_label = "holdout" if fr.fold is None else str(fr.fold)
            rows.append(f"{codec},{dataset_name},{fold_label},{fr.macro_acc:.6f}")
        rows.append(f"{codec},{dataset_name},mean,{result.mean_macro_acc:.6f}")
        log_rows = ["epoch,split,loss,macro_acc"]
        for hist in result.histories:
            for epoch, split, loss, acc in hist.rows:
                log_rows.append(f"{epoch},{split},{loss:.6f},{acc:.6f}")
        (out_dir / f"training_log_{codec}.csv").write_text(
            "\n".join(log_rows) + "\n", encoding="utf-8")
        print(f"{codec}: mean macro accuracy {result.mean_macro_acc:.3f}")
    (out_dir / "classification.csv").write_text("\n".join(rows) + "\n",
                                                encoding="utf-8")
    return EXIT_OK


def _cmd_compare(args) -> int:
    summary = compare_report(args.report_a, args.report_b)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / "ordering_summary.json"
    dest.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    for tag in ("report_a", "report_b"):
        wins = summary[tag]["band_wins"]
        print(f"{tag} band wins: {wins}")
    print(f"all ties: {summary['all_ties']}; details in {dest}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "encode": _cmd_encode,
    "reconstruct": _cmd_reconstruct,
    "bench": _cmd_bench,
    "train": _cmd_train,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
