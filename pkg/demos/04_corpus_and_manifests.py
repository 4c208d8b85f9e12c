#!/usr/bin/env python3
"""Corpus-on-disk workflow: WAV files, manifest rules, loading, cropping.

Materializes a synthetic corpus as real 16-bit WAVs, then treats it like a
user-supplied dataset: scans the directory tree with labeling/duration
rules into a manifest, loads a clip at the canonical rate, and crops it.
This is the same path a real corpus takes into the bench harness.

    python demos/04_corpus_and_manifests.py
"""

import tempfile
from pathlib import Path

from spikesound import (
    DatasetRules,
    SyntheticSpec,
    build_manifest,
    center_crop,
    load_audio,
    write_manifest,
    write_synthetic_corpus,
)
from spikesound.ingest import fold_class_counts

root = Path(tempfile.mkdtemp()) / "corpus"
spec = SyntheticSpec(n_clips=15, duration_s=2.0)
write_synthetic_corpus(spec, seed=3, out_dir=root)
print(f"wrote {len(list(root.rglob('*.wav')))} WAVs under {root}")

# Rebuild a manifest from the directory tree alone, as for a real dataset:
# labels from parent directory names, keep only clips of exactly 2 s.
rules = DatasetRules(
    labels=tuple(spec.classes),
    exclude=("impulse_train",),
    duration_s=2.0,
    duration_tol=0.001,
)
entries = build_manifest(root, rules)
print(f"manifest: {len(entries)} entries after excluding one class")
for key, count in sorted(fold_class_counts(entries).items(), key=str):
    print(f"  fold={key[0]} class={key[1]}: {count}")

manifest_path = root / "rebuilt_manifest.csv"
write_manifest(entries, manifest_path)
print(f"saved {manifest_path.name}:")
print("  " + "\n  ".join(manifest_path.read_text().splitlines()[:4]) + "\n  ...")

# Load one clip at the canonical 44.1 kHz and take its central second.
clip = load_audio(root / entries[0].path)
cropped = center_crop(clip, 1.0)
print(f"\nloaded {entries[0].path}: {clip.duration_s:.2f}s at {clip.sample_rate} Hz")
print(f"center-cropped to {cropped.duration_s:.2f}s "
      f"({len(cropped.samples)} samples)")
