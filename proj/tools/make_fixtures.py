#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The pcgraph Authors
"""Regenerates the committed test fixtures and their manifest.

The manifest values are computed here, independently of the C++ loaders,
and the data tests compare against them.
"""

import argparse
import json
import random
import struct
from pathlib import Path

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def make_images(rng: random.Random, count=16, height=8, width=8, channels=1, classes=4):
    pixels = bytearray()
    labels = []
    for i in range(count):
        label = i % classes
        labels.append(label)
        for c in range(channels):
            for y in range(height):
                for x in range(width):
                    # brighter quadrant per class, plus noise
                    quad = (y >= height // 2) * 2 + (x >= width // 2)
                    base = 200 if quad == label else 30
                    pixels.append(max(0, min(255, base + rng.getrandbits(6) - 32)))
    # one saturated pixel so normalization hits exactly 1.0
    pixels[0] = 255
    header = b"PCIM" + struct.pack("<5I", 1, count, height, width, channels)
    body = bytes(pixels) + struct.pack("<%dI" % count, *labels)
    return header + body, pixels, labels


WORDS = ("the quick brown fox jumps over a lazy dog while seven wizards quietly "
         "hex jumbo kites and the five boxing wizards jump over small puddles near "
         "old mills where river water turns heavy wheels every single morning").split()


def make_corpus(rng: random.Random, target=4096):
    out = []
    size = 0
    while size < target:
        n = 4 + rng.getrandbits(3)
        sentence = " ".join(WORDS[rng.getrandbits(16) % len(WORDS)] for _ in range(n))
        sentence = sentence[0].upper() + sentence[1:] + ". "
        out.append(sentence)
        size += len(sentence)
    return "".join(out)[:target]


SYLLABLES = {
    "Italian": ["ro", "ssi", "bel", "li", "ma", "ri", "no", "gio", "van", "ni"],
    "Japanese": ["ta", "ka", "ha", "shi", "mo", "to", "yu", "ki", "na", "ri"],
    "Russian": ["iv", "an", "ov", "pet", "ro", "sky", "vol", "kov", "mi", "lin"],
    "Scottish": ["mac", "don", "ald", "camp", "bell", "fra", "ser", "gor", "son", "ross"],
    "Greek": ["pa", "pa", "dop", "ou", "los", "nik", "ol", "aid", "is", "kos"],
}


def make_names(rng: random.Random, count=100):
    cats = list(SYLLABLES)
    lines = []
    for _ in range(count):
        cat = cats[rng.getrandbits(16) % len(cats)]
        parts = SYLLABLES[cat]
        n = 2 + rng.getrandbits(1)
        name = "".join(parts[rng.getrandbits(16) % len(parts)] for _ in range(n))
        lines.append((name.capitalize(), cat))
    return lines


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests" / "fixtures"))
    ap.add_argument("--seed", type=int, default=20260101)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    pcim, pixels, labels = make_images(rng)
    (out / "images16.pcim").write_bytes(pcim)

    corpus = make_corpus(rng)
    (out / "corpus.txt").write_bytes(corpus.encode("ascii"))

    names = make_names(rng)
    (out / "names100.tsv").write_bytes("".join(f"{n}\t{c}\n" for n, c in names).encode("utf-8"))

    histogram = {}
    for _, c in names:
        histogram[c] = histogram.get(c, 0) + 1
    manifest = {
        "images16.pcim": {
            "fnv1a64": "%016x" % fnv1a64(pcim),
            "count": len(labels),
            "pixel_sum": sum(pixels),
            "label_histogram": [labels.count(k) for k in range(max(labels) + 1)],
        },
        "corpus.txt": {
            "bytes": len(corpus),
            "alphabet_size": len(set(corpus)),
            "sequences_window_50": (len(corpus) - 1) // 50,
        },
        "names100.tsv": {
            "records": len(names),
            "classes_first_seen": list(histogram),
            "histogram": [histogram[c] for c in histogram],
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
