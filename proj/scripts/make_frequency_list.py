# Copyright 2026 The phrasebias Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes data/frequency_en.tsv: "word<TAB>count", most frequent first.

Counts are wordfreq's English frequencies scaled to occurrences per billion
words. wordfreq blends several sources (Wikipedia among them); no
Wikipedia-only list is reachable offline.
"""
import argparse
import pathlib

import wordfreq


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--size", type=int, default=8000)
    args = ap.parse_args()
    rows = []
    for word in wordfreq.top_n_list("en", args.size * 2):
        if not word.isascii() or not word.isalpha():
            continue
        rows.append((word, round(wordfreq.word_frequency(word, "en") * 1e9)))
        if len(rows) == args.size:
            break
    rows.sort(key=lambda r: (-r[1], r[0]))
    args.out.write_text("".join(f"{w}\t{c}\n" for w, c in rows))


if __name__ == "__main__":
    main()
