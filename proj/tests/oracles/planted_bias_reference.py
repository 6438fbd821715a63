# Copyright 2026 The phrasebias Authors
# SPDX-License-Identifier: Apache-2.0
"""Reference prompt loss for a toy model with a planted gender association.

Independent of the C++ code: re-implements the toy forward pass and the
divergences with numpy, step by step. The printed values are frozen into
tests/unit/bias_objective_test.cpp.

Toy model: ids 0..3 are PAD CLS SEP MASK, explicit words from id 4.
  context = mean(embed[ids])
  h_p     = tanh(embed[x_p] + position[p] + mix * context)
  logits  = W h_p + b
"""
import json

import numpy as np

WORDS = ["he", "she", "man", "woman", "likes", "math", "art", "poetry", "algebra"]
V, D, L = 14, 3, 16
CLS, SEP, MASK = 1, 2, 3
ID = {w: 4 + i for i, w in enumerate(WORDS)}


def params():
    i = np.arange(V)[:, None]
    j = np.arange(D)[None, :]
    embed = 0.1 * np.sin(i + 2.0 * j)
    position = 0.05 * np.cos(np.arange(L)[:, None] + j)
    head = 0.2 * np.cos(0.5 * i + j)
    bias = 0.01 * np.arange(V, dtype=float)
    # Planted association: male words push the first hidden unit up, and
    # the first unit favours "math"/"algebra" over "art"/"poetry".
    for w, s in (("he", 1.0), ("man", 0.8), ("she", -1.0), ("woman", -0.8)):
        embed[ID[w]] = [s, 0.0, 0.1]
    head[ID["math"]] = [2.0, 0.1, 0.0]
    head[ID["algebra"]] = [1.5, 0.0, 0.2]
    head[ID["art"]] = [-2.0, 0.0, 0.1]
    head[ID["poetry"]] = [-1.5, 0.2, 0.0]
    return embed, position, head, bias, 0.7


def mask_logits(ids, p):
    embed, position, head, bias, mix = p
    context = embed[ids].mean(axis=0)
    rows = []
    for pos, t in enumerate(ids):
        if t == MASK:
            h = np.tanh(embed[t] + position[pos] + mix * context)
            rows.append(head @ h + bias)
    return np.array(rows)


def distribution(attribute, prompt, phrases, weights, p):
    n = len(phrases[0])
    ids = [CLS, ID[attribute]] + [ID[w] for w in prompt] + [MASK] * n + [SEP]
    logits = mask_logits(ids, p)
    scores = np.array([sum(logits[l, ID[w]] for l, w in enumerate(ph)) for ph in phrases])
    scores = scores + np.log(np.array(weights, dtype=float))
    e = np.exp(scores - scores.max())
    return e / e.sum()


def kld(a, b, eps=1e-12):
    return float(np.sum(a * np.log((a + eps) / (b + eps))))


def jsd(dists):
    mean = np.mean(dists, axis=0)
    return float(np.mean([kld(d, mean) for d in dists]))


def loss(tuples, prompt, buckets, p):
    total = 0.0
    for tup in tuples:
        for phrases, weights in buckets:
            total += jsd([distribution(a, prompt, phrases, weights, p) for a in tup])
    return total


def main():
    p = params()
    tuples = [("he", "she"), ("man", "woman")]
    one = [["math"], ["art"], ["poetry"], ["algebra"]]
    two = [["algebra", "math"], ["poetry", "art"], ["math", "poetry"]]
    unweighted = [(one, [1, 1, 1, 1]), (two, [1, 1, 1])]
    weighted = [(one, [2, 1, 3, 1]), (two, [1, 2, 1])]
    out = {
        "loss_likes": loss(tuples, ["likes"], unweighted, p),
        "loss_empty": loss(tuples, [], unweighted, p),
        "loss_likes_weighted": loss(tuples, ["likes"], weighted, p),
        "loss_first_tuple_bucket1": loss(tuples[:1], ["likes"], unweighted[:1], p),
        "dist_he_likes_bucket1": distribution("he", ["likes"], one, [1, 1, 1, 1], p).tolist(),
        "dist_she_likes_bucket2": distribution("she", ["likes"], two, [1, 1, 1], p).tolist(),
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
