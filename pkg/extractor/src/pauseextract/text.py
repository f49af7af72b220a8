"""Text embedding export: pretrained masked LM over pause-annotated text.

The tokenizer learns the pause/disfluency special tokens so each annotation
survives as exactly one token, the embedding table is resized to the new
vocabulary, and every token of the input is mapped to its final-layer hidden
state — no pooling, one 768-dim row per token. The model stays frozen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import torch

from .config import ExtractionConfig
from .pemb import EMBED_DIM

# Fixed seed for the embedding rows created by the vocabulary resize, so a
# given config produces identical matrices across processes.
_RESIZE_SEED = 0


class ModelLoadFailure(RuntimeError):
    """Pretrained model or tokenizer could not be loaded."""


class EmptyText(ValueError):
    """Input produced zero tokens; matrices must have at least one row."""


@dataclass(frozen=True)
class TextResources:
    """A loaded tokenizer/model pair with the special tokens registered."""

    config: ExtractionConfig
    tokenizer: Any
    model: Any


def load_text_resources(config: ExtractionConfig) -> TextResources:
    """Load the text model, register special tokens, resize embeddings."""
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(config.text_model)
        model = AutoModel.from_pretrained(config.text_model)
    except Exception as exc:
        raise ModelLoadFailure(f"cannot load text model {config.text_model!r}: {exc}") from exc

    if model.config.hidden_size != EMBED_DIM:
        raise ModelLoadFailure(
            f"text model {config.text_model!r} has hidden size "
            f"{model.config.hidden_size}, expected {EMBED_DIM}"
        )

    original_rows = model.get_input_embeddings().weight.shape[0]
    tokenizer.add_special_tokens({"additional_special_tokens": list(config.special_tokens)})
    model.resize_token_embeddings(len(tokenizer))
    if len(tokenizer) > original_rows:
        # Give each newly created vocabulary row its own seeded random
        # embedding; the library's resize may otherwise assign every new
        # token the same vector, and unseeded rows would differ per process.
        std = float(getattr(model.config, "initializer_range", 0.02))
        generator = torch.Generator().manual_seed(_RESIZE_SEED)
        with torch.no_grad():
            weight = model.get_input_embeddings().weight
            weight[original_rows:] = torch.normal(
                0.0, std,
                size=(len(tokenizer) - original_rows, weight.shape[1]),
                generator=generator,
            )
    model.eval()
    return TextResources(config=config, tokenizer=tokenizer, model=model)


def registered_special_tokens(resources: TextResources) -> tuple[str, ...]:
    """The configured special tokens, verified to be single known tokens."""
    unk_id = resources.tokenizer.unk_token_id
    ids = resources.tokenizer.convert_tokens_to_ids(list(resources.config.special_tokens))
    for token, token_id in zip(resources.config.special_tokens, ids):
        if token_id is None or token_id == unk_id:
            raise ModelLoadFailure(f"special token {token!r} is not registered")
    if len(set(ids)) != len(ids):
        raise ModelLoadFailure("special tokens do not map to distinct ids")
    return tuple(resources.config.special_tokens)


def extract_text(text: str, resources: TextResources) -> np.ndarray:
    """Final-layer hidden states for every token of ``text``.

    Returns a (tokens x 768) float32 array. The model's own sequence markers
    are not added, so row ``i`` belongs to token ``i`` of the input.
    """
    if not isinstance(text, str):
        raise TypeError(f"text must be a string, got {type(text).__name__}")
    encoded = resources.tokenizer(
        text, add_special_tokens=False, return_tensors="pt"
    )
    if encoded["input_ids"].shape[1] == 0:
        raise EmptyText("input has no tokens")
    with torch.no_grad():
        hidden = resources.model(**encoded).last_hidden_state
    matrix = hidden[0].to(torch.float32).cpu().numpy()
    assert matrix.shape[1] == EMBED_DIM
    return matrix


def tokenize_text(text: str, resources: TextResources) -> list[str]:
    """The token strings ``extract_text`` produces one row for, in order."""
    return resources.tokenizer.tokenize(text)


__all__ = [
    "EmptyText",
    "ModelLoadFailure",
    "TextResources",
    "extract_text",
    "load_text_resources",
    "registered_special_tokens",
    "tokenize_text",
]
