# Copyright 2026 The phrasebias Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes SEAT-6/6b/7/7b/8/8b specs as JSON {name, targ1, targ2, attr1, attr2}.

Word lists follow the WEAT 6-8 stimuli (Caliskan et al., 2017). Sentences are
produced with semantically bleached templates in the style of May et al.
(2019); the exact sentence files of the original release are not reachable
offline, so these are a close approximation.
"""
import argparse
import json
import pathlib

MALE_NAMES = ["John", "Paul", "Mike", "Kevin", "Steve", "Greg", "Jeff", "Bill"]
FEMALE_NAMES = ["Amy", "Joan", "Lisa", "Sarah", "Diana", "Kate", "Ann", "Donna"]
CAREER = ["executive", "management", "professional", "corporation", "salary", "office", "business", "career"]
FAMILY = ["home", "parents", "children", "family", "cousins", "marriage", "wedding", "relatives"]
MALE_TERMS_7 = ["male", "man", "boy", "brother", "he", "him", "his", "son"]
FEMALE_TERMS_7 = ["female", "woman", "girl", "sister", "she", "her", "hers", "daughter"]
MATH = ["math", "algebra", "geometry", "calculus", "equations", "computation", "numbers", "addition"]
ARTS_7 = ["poetry", "art", "dance", "literature", "novel", "symphony", "drama", "sculpture"]
SCIENCE = ["science", "technology", "physics", "chemistry", "Einstein", "NASA", "experiment", "astronomy"]
ARTS_8 = ["poetry", "art", "Shakespeare", "dance", "literature", "novel", "symphony", "drama"]
MALE_TERMS_8 = ["brother", "father", "uncle", "grandfather", "son", "he", "his", "him"]
FEMALE_TERMS_8 = ["sister", "mother", "aunt", "grandmother", "daughter", "she", "hers", "her"]

NAME_TEMPLATES = ["This is {}.", "That is {}.", "Here is {}.", "There is {}.", "{} is here.",
                  "{} is there.", "{} is a person.", "The person's name is {}."]
WORD_TEMPLATES = ["This is {}.", "That is {}.", "There is {}.", "Here is {}.", "{} is here.",
                  "{} is there.", "It is {}.", "This is about {}."]


def sentences(words, templates):
    return [t.format(w) for w in words for t in templates]


def spec(name, x, y, a, b, xt=WORD_TEMPLATES, yt=WORD_TEMPLATES, at=WORD_TEMPLATES, bt=WORD_TEMPLATES):
    return {"name": name, "targ1": sentences(x, xt), "targ2": sentences(y, yt),
            "attr1": sentences(a, at), "attr2": sentences(b, bt)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    N = NAME_TEMPLATES
    specs = [
        spec("seat-6", MALE_NAMES, FEMALE_NAMES, CAREER, FAMILY, xt=N, yt=N),
        spec("seat-6b", MALE_TERMS_7, FEMALE_TERMS_7, CAREER, FAMILY),
        spec("seat-7", MATH, ARTS_7, MALE_TERMS_7, FEMALE_TERMS_7),
        spec("seat-7b", MATH, ARTS_7, MALE_NAMES, FEMALE_NAMES, at=N, bt=N),
        spec("seat-8", SCIENCE, ARTS_8, MALE_TERMS_8, FEMALE_TERMS_8),
        spec("seat-8b", SCIENCE, ARTS_8, MALE_NAMES, FEMALE_NAMES, at=N, bt=N),
    ]
    for s in specs:
        (args.out / f"{s['name']}.json").write_text(json.dumps(s, indent=1) + "\n")


if __name__ == "__main__":
    main()
