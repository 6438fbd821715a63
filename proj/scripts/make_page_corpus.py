# Copyright 2026 The phrasebias Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes a small synthetic wikitext corpus for offline pipeline runs.

Each page introduces one subject and links domain terms plus a share of
off-topic anchors, the way encyclopedia pages do. It also carries links the
extractor must skip (files, categories, section and interlanguage links,
references and navboxes). The output is deterministic.
"""
import argparse
import pathlib
import random

DOMAINS = {
    "mathematics": ["algebra", "geometry", "calculus", "number theory", "linear algebra", "topology",
                    "probability theory", "statistics", "differential equations", "prime numbers",
                    "mathematical proof", "set theory", "trigonometry", "integral", "derivative",
                    "equation", "theorem", "matrix", "vector space", "polynomial", "arithmetic",
                    "fractions", "geometry of numbers", "mathematical analysis", "graph theory"],
    "science": ["physics", "chemistry", "biology", "astronomy", "experiment", "laboratory",
                "scientific method", "quantum mechanics", "relativity", "molecule", "atom",
                "cell biology", "genetics", "evolution", "planets", "telescope", "energy",
                "electricity", "thermodynamics", "organic chemistry", "particle physics",
                "hypothesis", "microscope", "periodic table", "space exploration"],
    "art": ["poetry", "dance", "painting", "music", "sculpture", "literature", "novel", "theatre",
            "drama", "ballet", "opera", "symphony", "portrait", "watercolour", "poem", "choreography",
            "art gallery", "impressionism", "jazz", "folk music", "sonnet", "still life",
            "contemporary dance", "classical music", "fine art"],
}

PAGES = {
    "mathematics": ["Mathematics", "Algebra", "Geometry", "Calculus"],
    "science": ["Physics", "Chemistry", "Biology", "Astronomy"],
    "art": ["Poetry", "Dance", "Painting", "Music"],
}

GENERAL = ["history", "Europe", "city", "river", "university", "language", "government",
           "nineteenth century", "world war", "television", "newspaper", "football", "food",
           "agriculture", "trade", "religion", "village", "ocean", "mountain", "weather",
           "railway", "computer", "internet", "family", "school"]

FILLER = ["is studied widely", "has a long history", "is taught in many schools",
          "developed over many centuries", "draws on earlier work", "is practised across the world"]


def link(phrase, rng):
    if rng.random() < 0.3:
        return f"[[{phrase.capitalize()}|{phrase}]]"
    return f"[[{phrase}]]"


def page_text(title, domain, rng):
    own = list(DOMAINS[domain])
    rng.shuffle(own)
    others = [t for d, ts in DOMAINS.items() if d != domain for t in ts]
    rng.shuffle(others)
    general = list(GENERAL)
    rng.shuffle(general)
    lines = [f"'''{title}''' is a field of [[{domain}]].",
             f"{{{{Infobox field|related=[[{general[0]}]]}}}}"]
    lines.append(f"== Overview ==")
    for i in range(0, 20, 4):
        chunk = own[i:i + 4]
        lines.append(f"{title} {rng.choice(FILLER)}. It relates to {link(chunk[0], rng)}, "
                     f"{link(chunk[1], rng)} and {link(chunk[2], rng)}; see also {link(chunk[3], rng)}.")
    lines.append("== History ==")
    for j in range(4):
        lines.append(f"Work on {title.lower()} grew in the [[{general[j + 1]}]] of [[{general[j + 5]}]], "
                     f"and touched on {link(others[j], rng)}.<ref>[[{general[j + 9]}]] report.</ref>")
    lines.append(f"See [[#Overview]] and [[File:{title}.png|thumb|{title}]].")
    lines.append(f"[[Category:{domain.capitalize()}]] [[de:{title}]]")
    lines.append("{{Navbox|" + " ".join(f"[[{t}]]" for t in own[20:]) + "}}")
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    for domain, titles in PAGES.items():
        for title in titles:
            (args.out / f"{title.lower()}.wiki").write_text(page_text(title, domain, rng))


if __name__ == "__main__":
    main()
