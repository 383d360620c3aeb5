from __future__ import annotations

import json

import pytest
import torch


CORPUS = [
    "def add(a, b):",
    "    return a + b",
    "def solve(n):",
    "    total = 0",
    "    for i in range(n):",
    "        total += i",
    "    return total",
    "step one: expand the bracket",
    "step two: collect terms",
    "the answer is 42",
    "x = 1",
    "y = x * 3",
    "print(x + y)",
] * 8


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A tiny random-weight causal LM plus tokenizer, built offline."""
    from tokenizers import Tokenizer, models, pre_tokenizers, trainers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    tok = Tokenizer(models.BPE(unk_token="<unk>"))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    trainer = trainers.BpeTrainer(
        vocab_size=500,
        special_tokens=["<unk>", "<pad>", "<eos>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(CORPUS, trainer)
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="<unk>", pad_token="<pad>", eos_token="<eos>"
    )

    torch.manual_seed(1234)
    config = GPT2Config(
        vocab_size=len(fast),
        n_positions=128,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=fast.eos_token_id,
        eos_token_id=fast.eos_token_id,
        pad_token_id=fast.pad_token_id,
    )
    model = GPT2LMHeadModel(config)
    model.eval()

    target = tmp_path_factory.mktemp("tiny-lm")
    fast.save_pretrained(target)
    model.save_pretrained(target)
    return target


@pytest.fixture()
def toy_dataset(tmp_path):
    samples = [
        {
            "id": "code1",
            "instruction": "write a function that adds two numbers",
            "output": "def add(a, b):\n    return a + b",
            "meta": {"level": "1"},
        },
        {
            "id": "code2",
            "instruction": "sum the first n integers",
            "output": "def solve(n):\n    total = 0\n    for i in range(n):\n        total += i\n    return total",
            "meta": {"level": "3"},
        },
        {
            "id": "math1",
            "instruction": "expand (x+1)(x+2)",
            "output": "step one: expand the bracket\n\nstep two: collect terms\n\nthe answer is x*x + 3*x + 2",
            "meta": {"level": "2"},
        },
        {
            "id": "oneline",
            "instruction": "what is 6 times 7",
            "output": "the answer is 42",
            "meta": {"level": "1"},
        },
        {
            "id": "assign",
            "instruction": "assign and print",
            "output": "x = 1\ny = x * 3\nprint(x + y)",
            "meta": {"level": "2"},
        },
    ]
    path = tmp_path / "dataset.jsonl"
    path.write_text("\n".join(json.dumps(s) for s in samples) + "\n", encoding="utf-8")
    return path
