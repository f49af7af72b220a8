"""Audio embedding export: windowed hidden states from a speech encoder.

The waveform is z-normalized as a whole, cut into consecutive windows of
``window_s`` seconds (a trailing partial window is kept when it is at least
one second), and each window is pushed through the frozen encoder. The
selected transformer layer yields one feature vector per ~20 ms frame; the
frames of a window are mean-pooled into a single 768-dim row, so the output
has one row per window.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np
import torch

from .config import ExtractionConfig
from .pemb import EMBED_DIM
from .text import ModelLoadFailure

MIN_WINDOW_S = 1.0

Pathish = Union[str, Path]


class AudioTooShort(ValueError):
    """Recording is shorter than the one-second minimum."""


class DegenerateWaveform(ValueError):
    """Waveform has zero variance, so z-normalization is undefined."""


class UnsupportedAudio(ValueError):
    """Waveform file is not mono 16-bit PCM at the model's sampling rate."""


@dataclass(frozen=True)
class AudioResources:
    """A loaded speech encoder plus its expected sampling rate."""

    config: ExtractionConfig
    model: Any
    sampling_rate: int


def load_audio_resources(config: ExtractionConfig) -> AudioResources:
    """Load the speech encoder and validate the layer selection against it."""
    from transformers import AutoModel

    try:
        model = AutoModel.from_pretrained(config.audio_model)
    except Exception as exc:
        raise ModelLoadFailure(
            f"cannot load audio model {config.audio_model!r}: {exc}"
        ) from exc

    if model.config.hidden_size != EMBED_DIM:
        raise ModelLoadFailure(
            f"audio model {config.audio_model!r} has hidden size "
            f"{model.config.hidden_size}, expected {EMBED_DIM}"
        )
    layers = model.config.num_hidden_layers
    if config.audio_layer > layers:
        raise ModelLoadFailure(
            f"audio model {config.audio_model!r} has {layers} transformer "
            f"layers, cannot extract layer {config.audio_layer}"
        )
    model.eval()
    rate = getattr(model.config, "sampling_rate", 16_000) or 16_000
    return AudioResources(config=config, model=model, sampling_rate=rate)


def read_waveform(source: Pathish, expected_rate: int) -> np.ndarray:
    """Read a mono 16-bit PCM waveform file as float32 in [-1, 1]."""
    try:
        with wave.open(str(source), "rb") as f:
            channels = f.getnchannels()
            width = f.getsampwidth()
            rate = f.getframerate()
            frames = f.readframes(f.getnframes())
    except (OSError, wave.Error) as exc:
        raise UnsupportedAudio(f"cannot read waveform {source}: {exc}") from exc
    if channels != 1:
        raise UnsupportedAudio(f"{source}: expected mono audio, got {channels} channels")
    if width != 2:
        raise UnsupportedAudio(f"{source}: expected 16-bit samples, got {8 * width}-bit")
    if rate != expected_rate:
        raise UnsupportedAudio(
            f"{source}: expected {expected_rate} Hz sampling rate, got {rate}"
        )
    return np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0


def window_bounds(n_samples: int, rate: int, window_s: float) -> list[tuple[int, int]]:
    """Start/end sample offsets of the extraction windows.

    Full windows of ``window_s`` seconds, plus the trailing remainder when it
    covers at least :data:`MIN_WINDOW_S`.
    """
    if n_samples < int(MIN_WINDOW_S * rate):
        raise AudioTooShort(
            f"recording holds {n_samples / rate:.2f}s, need >= {MIN_WINDOW_S}s"
        )
    step = int(round(window_s * rate))
    bounds = [(start, min(start + step, n_samples)) for start in range(0, n_samples, step)]
    if bounds and (bounds[-1][1] - bounds[-1][0]) < int(MIN_WINDOW_S * rate):
        bounds.pop()
    return bounds


def extract_audio(waveform: np.ndarray, resources: AudioResources) -> np.ndarray:
    """Windowed, layer-pooled features for a waveform: (windows x 768) float32."""
    samples = np.asarray(waveform, dtype=np.float32).reshape(-1)
    if not np.all(np.isfinite(samples)):
        raise DegenerateWaveform("waveform contains non-finite samples")

    std = float(samples.std())
    if std == 0.0:
        raise DegenerateWaveform("waveform has zero variance; cannot z-normalize")
    normalized = (samples - samples.mean()) / std

    layer = resources.config.audio_layer
    rows = []
    with torch.no_grad():
        for start, end in window_bounds(
            len(normalized), resources.sampling_rate, resources.config.window_s
        ):
            window = torch.from_numpy(normalized[start:end])[None, :]
            states = resources.model(window, output_hidden_states=True).hidden_states
            rows.append(states[layer][0].mean(dim=0).to(torch.float32).cpu().numpy())
    matrix = np.stack(rows)
    assert matrix.shape[1] == EMBED_DIM
    return matrix


def extract_audio_file(source: Pathish, resources: AudioResources) -> np.ndarray:
    """Read a waveform file and extract its window features."""
    return extract_audio(read_waveform(source, resources.sampling_rate), resources)


__all__ = [
    "MIN_WINDOW_S",
    "AudioResources",
    "AudioTooShort",
    "DegenerateWaveform",
    "UnsupportedAudio",
    "extract_audio",
    "extract_audio_file",
    "load_audio_resources",
    "read_waveform",
    "window_bounds",
]
