"""Shared fixtures: miniature locally-built models so tests run offline.

Hidden size stays at the contractual 768; everything else (layer count,
heads, feed-forward width, vocabulary) is shrunk for speed. The text model
gets a hand-written WordPiece vocabulary of the words the tests use.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np
import pytest
import torch

from pauseextract import ExtractionConfig

VOCAB_WORDS = [
    "der", "die", "das", "Hund", "Katze", "Baum", "haus", "wald", "berg",
    "see", "und", "ein", "äh", "hund",
]


@pytest.fixture(scope="session")
def text_model_dir(tmp_path_factory) -> Path:
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("text-model")
    vocab = {
        token: idx
        for idx, token in enumerate(
            ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *VOCAB_WORDS]
        )
    }
    core = Tokenizer(models.WordPiece(vocab, unk_token="[UNK]"))
    core.normalizer = normalizers.BertNormalizer(lowercase=False)
    core.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    tokenizer = BertTokenizerFast(
        tokenizer_object=core,
        do_lower_case=False,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    tokenizer.save_pretrained(root)

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=128,
        max_position_embeddings=128,
    )
    BertModel(config).save_pretrained(root)
    return root


@pytest.fixture(scope="session")
def audio_model_dir(tmp_path_factory) -> Path:
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    root = tmp_path_factory.mktemp("audio-model")
    torch.manual_seed(4321)
    config = Wav2Vec2Config(
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=128,
        conv_dim=(32, 32, 32, 32, 32, 32, 32),
    )
    Wav2Vec2Model(config).save_pretrained(root)
    return root


@pytest.fixture(scope="session")
def config(text_model_dir, audio_model_dir) -> ExtractionConfig:
    return ExtractionConfig(
        text_model=str(text_model_dir),
        audio_model=str(audio_model_dir),
        audio_layer=2,
        window_s=2.0,
    )


@pytest.fixture(scope="session")
def text_resources(config):
    from pauseextract import load_text_resources

    return load_text_resources(config)


@pytest.fixture(scope="session")
def audio_resources(config):
    from pauseextract import load_audio_resources

    return load_audio_resources(config)


def sine_wave(duration_s: float, rate: int = 16_000, freq: float = 220.0) -> np.ndarray:
    t = np.arange(int(duration_s * rate)) / rate
    return (0.4 * np.sin(2 * np.pi * freq * t)).astype(np.float32)


def write_wav(path: Path, samples: np.ndarray, rate: int = 16_000) -> None:
    pcm = np.clip(samples * 32768.0, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(pcm.tobytes())
