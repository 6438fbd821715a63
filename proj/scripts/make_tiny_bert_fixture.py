#!/usr/bin/env python3
# Copyright 2026 The phrasebias Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes tiny random BERT and DistilBERT masked-LM checkpoints plus reference
activations and gradients computed by transformers, for the native backend tests."""

import argparse
import json
import pathlib

import numpy as np
import torch
from safetensors.torch import load_file, save_file
from transformers import (BertConfig, BertForMaskedLM, BertTokenizer, DistilBertConfig,
                          DistilBertForMaskedLM)

WORDS = """the a an is was he she his her man woman men women boy girl mother father son
daughter king queen works as nurse doctor engineer teacher likes math art poetry algebra
science music dance painting career family home office physics chemistry biology of in
and to for with this that there here sentence person people""".split()
PIECES = ["##s", "##ed", "##ing", "##er", "##ly", "un", "##able", "re", "##ness", "gra", "##ph",
          "theory", "caf", "##e", "na", "##ive", "."]
SENTENCES = [
    "he works as a [MASK] .",
    "The woman likes [MASK] [MASK] poetry.",
    "this is a sentence about graph theory and unreadable naïve café",
    "[MASK] is here .",
]


def build_vocab(out_dir):
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS + PIECES
    (out_dir / "vocab.txt").write_text("\n".join(vocab) + "\n")
    return vocab


def perturb(model, scale):
    g = torch.Generator().manual_seed(1234)
    with torch.no_grad():
        for name, p in model.named_parameters():
            p.add_(torch.randn(p.shape, generator=g) * scale)


def add_pooler(out_dir, hidden):
    # Masked-LM heads drop the pooler; public BERT checkpoints keep one.
    g = torch.Generator().manual_seed(99)
    pooler = torch.nn.Linear(hidden, hidden)
    with torch.no_grad():
        pooler.weight.copy_(torch.randn(hidden, hidden, generator=g) * 0.3)
        pooler.bias.copy_(torch.randn(hidden, generator=g) * 0.1)
    path = out_dir / "model.safetensors"
    tensors = load_file(str(path))
    tensors["bert.pooler.dense.weight"] = pooler.weight.detach().clone()
    tensors["bert.pooler.dense.bias"] = pooler.bias.detach().clone()
    save_file(tensors, str(path), metadata={"format": "pt"})
    return pooler


def dump(model, tokenizer, out_dir, arch, pooler=None):
    model.eval()
    tensors = {}
    rng = np.random.default_rng(7)
    for s, text in enumerate(SENTENCES):
        enc = tokenizer(text, return_tensors="pt")
        ids = enc["input_ids"]
        tensors[f"s{s}.ids"] = ids[0].to(torch.float32)
        model.zero_grad()
        kwargs = {"input_ids": ids, "attention_mask": torch.ones_like(ids)}
        if arch == "bert":
            kwargs["token_type_ids"] = torch.zeros_like(ids)
        out = model(**kwargs, output_hidden_states=True)
        hidden = out.hidden_states[-1][0]
        tensors[f"s{s}.hidden"] = hidden.detach().clone()
        if arch == "bert":
            pooled = torch.tanh(pooler(hidden[:1]))
            tensors[f"s{s}.pooled"] = pooled[0].detach().clone()
        mask_pos = (ids[0] == tokenizer.mask_token_id).nonzero().flatten()
        if len(mask_pos) == 0:
            continue
        logits = out.logits[0, mask_pos]
        tensors[f"s{s}.mask_logits"] = logits.detach().clone()
        weights = torch.tensor(rng.standard_normal(logits.shape), dtype=torch.float32)
        tensors[f"s{s}.dlogits"] = weights
        (logits * weights).sum().backward()
        for name, p in model.named_parameters():
            if p.grad is not None:
                tensors[f"s{s}.grad.{name}"] = p.grad.detach().clone()
    save_file({k: v.contiguous() for k, v in tensors.items()}, str(out_dir / "expected.safetensors"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()
    torch.manual_seed(0)

    bert_dir = args.out / "tiny_bert"
    bert_dir.mkdir(parents=True, exist_ok=True)
    vocab = build_vocab(bert_dir)
    cfg = BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=2, num_attention_heads=2,
                     intermediate_size=32, max_position_embeddings=32, type_vocab_size=2,
                     initializer_range=0.3, hidden_act="gelu", hidden_dropout_prob=0.0,
                     attention_probs_dropout_prob=0.0)
    model = BertForMaskedLM(cfg)
    perturb(model, 0.05)
    model.save_pretrained(bert_dir, safe_serialization=True)
    tok = BertTokenizer(str(bert_dir / "vocab.txt"), do_lower_case=True)
    tok.save_pretrained(bert_dir)
    pooler = add_pooler(bert_dir, 16)
    dump(model, tok, bert_dir, "bert", pooler)

    distil_dir = args.out / "tiny_distilbert"
    distil_dir.mkdir(parents=True, exist_ok=True)
    build_vocab(distil_dir)
    dcfg = DistilBertConfig(vocab_size=len(vocab), dim=16, n_layers=2, n_heads=2, hidden_dim=32,
                            max_position_embeddings=32, initializer_range=0.3, activation="gelu",
                            dropout=0.0, attention_dropout=0.0)
    dmodel = DistilBertForMaskedLM(dcfg)
    perturb(dmodel, 0.05)
    dmodel.save_pretrained(distil_dir, safe_serialization=True)
    dtok = BertTokenizer(str(distil_dir / "vocab.txt"), do_lower_case=True)
    dtok.save_pretrained(distil_dir)
    dump(dmodel, dtok, distil_dir, "distilbert")


if __name__ == "__main__":
    main()
