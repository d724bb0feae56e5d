#!/usr/bin/env python3
"""Frozen transformer encoder speaking the turnqual line protocol.

One serialized context per stdin line in, one line of whitespace-separated
floats out. Configured through the environment set by the `pretrained`
adapter: TURNQUAL_MODEL_NAME, TURNQUAL_CACHE_DIR, TURNQUAL_DIMENSION,
TURNQUAL_MAX_TOKENS.

Emits the model's pooled output ([CLS] through the pooler) when it has one,
otherwise the attention-masked mean of the last hidden layer.
"""
import os
import sys

import torch
from transformers import AutoModel, AutoTokenizer


def main():
    name = os.environ.get("TURNQUAL_MODEL_NAME", "bert-base-uncased")
    cache = os.environ.get("TURNQUAL_CACHE_DIR") or None
    dim = int(os.environ.get("TURNQUAL_DIMENSION", "768"))
    max_len = int(os.environ.get("TURNQUAL_MAX_TOKENS", "512"))

    tok = AutoTokenizer.from_pretrained(name, cache_dir=cache)
    # keep the end of the text: the response being judged comes last
    tok.truncation_side = "left"
    model = AutoModel.from_pretrained(name, cache_dir=cache)
    model.eval()
    if model.config.hidden_size != dim:
        sys.exit(f"{name} has hidden size {model.config.hidden_size}, adapter expects {dim}")
    max_len = min(max_len, tok.model_max_length)

    with torch.no_grad():
        for line in sys.stdin:
            batch = tok(line.rstrip("\n"), truncation=True, max_length=max_len, return_tensors="pt")
            out = model(**batch)
            pooled = getattr(out, "pooler_output", None)
            if pooled is None:
                mask = batch["attention_mask"].unsqueeze(-1).float()
                pooled = (out.last_hidden_state * mask).sum(1) / mask.sum(1)
            sys.stdout.write(" ".join(f"{v:.8g}" for v in pooled[0].tolist()) + "\n")
            sys.stdout.flush()


if __name__ == "__main__":
    main()
