"""Embedding export for pause-annotated speech studies.

Converts word-timestamped recognizer output into transcript documents,
registers the pause special-token registry in a pretrained tokenizer, and
exports per-token text matrices and per-window audio matrices as ``.pemb``
files for the classifier pipeline.
"""

from .asr import AsrDocumentError, MissingTimestamps, ingest_asr
from .audio import (
    AudioResources,
    AudioTooShort,
    DegenerateWaveform,
    UnsupportedAudio,
    extract_audio,
    extract_audio_file,
    load_audio_resources,
    read_waveform,
    window_bounds,
)
from .config import ConfigError, ExtractionConfig, config_to_json, load_extraction_config
from .pemb import (
    EMBED_DIM,
    ExtractionRecord,
    MatrixShapeError,
    matrix_to_bytes,
    write_matrix,
)
from .text import (
    EmptyText,
    ModelLoadFailure,
    TextResources,
    extract_text,
    load_text_resources,
    registered_special_tokens,
    tokenize_text,
)
from .tokens import DISFLUENCY_TOKEN, PAUSE_TOKENS, SPECIAL_TOKENS

__version__ = "0.1.0"

__all__ = [
    "AsrDocumentError",
    "AudioResources",
    "AudioTooShort",
    "ConfigError",
    "DISFLUENCY_TOKEN",
    "DegenerateWaveform",
    "EMBED_DIM",
    "EmptyText",
    "ExtractionConfig",
    "ExtractionRecord",
    "MatrixShapeError",
    "MissingTimestamps",
    "ModelLoadFailure",
    "PAUSE_TOKENS",
    "SPECIAL_TOKENS",
    "TextResources",
    "UnsupportedAudio",
    "config_to_json",
    "extract_audio",
    "extract_audio_file",
    "extract_text",
    "ingest_asr",
    "load_audio_resources",
    "load_extraction_config",
    "load_text_resources",
    "matrix_to_bytes",
    "read_waveform",
    "registered_special_tokens",
    "tokenize_text",
    "window_bounds",
    "write_matrix",
]
