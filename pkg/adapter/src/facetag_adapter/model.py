"""Seq2seq model loading, generation, and fine-tuning.

torch and transformers are imported lazily so the echo path has no heavy
dependencies. The newline character is swapped for one atomic special
token before tokenization so multi-line dialog context survives models
whose vocabularies drop "\n".
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

from .config import AdapterConfig


def load_model(checkpoint: str, config: AdapterConfig):
    from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint)
    if config.newline_token not in tokenizer.get_vocab():
        tokenizer.add_special_tokens(
            {"additional_special_tokens": [config.newline_token]}
        )
        model.resize_token_embeddings(len(tokenizer))
    model.eval()
    return tokenizer, model


def encode_text(text: str, config: AdapterConfig) -> str:
    return text.replace("\n", f" {config.newline_token} ")


def generate_one(tokenizer, model, text: str, config: AdapterConfig) -> str:
    import torch

    batch = tokenizer(
        encode_text(text, config),
        return_tensors="pt",
        truncation=True,
        max_length=config.max_input_tokens,
    )
    with torch.no_grad():
        ids = model.generate(
            **batch,
            num_beams=config.beam_width,
            max_new_tokens=config.max_output_tokens,
        )
    return tokenizer.decode(ids[0], skip_special_tokens=True).strip()


def read_examples(path: str | Path) -> list[dict]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                examples.append(json.loads(line))
    return examples


def train_micro_f1(tokenizer, model, examples: Iterable[dict], config: AdapterConfig) -> float:
    """Exact-match rate of generations against targets; over a closed
    label set this equals micro F1."""
    total = 0
    hits = 0
    for ex in examples:
        total += 1
        if generate_one(tokenizer, model, ex["input"], config) == ex["target"]:
            hits += 1
    return hits / total if total else 0.0


def finetune(
    examples_path: str | Path,
    out_dir: str | Path,
    config: AdapterConfig,
    fold: int | None = None,
    log=print,
) -> Path:
    """Fine-tune one checkpoint on the examples outside `fold` (all
    examples when fold is None), early-stopping on training micro F1."""
    import torch
    from torch.utils.data import DataLoader

    examples = read_examples(examples_path)
    if fold is not None:
        examples = [ex for ex in examples if ex.get("fold") != fold]
    if not examples:
        raise ValueError("no training examples after fold filtering")

    tokenizer, model = load_model(config.model_id, config)
    model.train()
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
        eps=config.epsilon,
    )

    def collate(batch):
        enc = tokenizer(
            [encode_text(ex["input"], config) for ex in batch],
            return_tensors="pt",
            truncation=True,
            max_length=config.max_input_tokens,
            padding=True,
        )
        labels = tokenizer(
            [ex["target"] for ex in batch],
            return_tensors="pt",
            truncation=True,
            max_length=config.max_output_tokens,
            padding=True,
        ).input_ids
        labels[labels == tokenizer.pad_token_id] = -100
        enc["labels"] = labels
        return enc

    loader = DataLoader(
        examples, batch_size=config.batch_size, shuffle=True, collate_fn=collate
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    best_f1 = -math.inf
    bad_epochs = 0
    for epoch in range(1, config.max_epochs + 1):
        model.train()
        optimizer.zero_grad()
        for step, batch in enumerate(loader, start=1):
            loss = model(**batch).loss / config.grad_accumulation
            loss.backward()
            if step % config.grad_accumulation == 0:
                optimizer.step()
                optimizer.zero_grad()
        optimizer.step()
        optimizer.zero_grad()

        model.eval()
        f1 = train_micro_f1(tokenizer, model, examples, config)
        log(f"epoch {epoch}: train micro F1 {f1:.4f}")
        if f1 > best_f1:
            best_f1 = f1
            bad_epochs = 0
            model.save_pretrained(out)
            tokenizer.save_pretrained(out)
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                log(f"early stop after epoch {epoch} (patience {config.patience})")
                break
    log(f"best train micro F1 {best_f1:.4f}; checkpoint at {out}")
    return out
