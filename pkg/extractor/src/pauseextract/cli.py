"""Command-line interface for the embedding exporter."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .asr import AsrDocumentError, ingest_asr
from .audio import (
    AudioTooShort,
    DegenerateWaveform,
    UnsupportedAudio,
    extract_audio_file,
    load_audio_resources,
)
from .config import ConfigError, ExtractionConfig, load_extraction_config
from .pemb import IoFailure, write_matrix
from .text import EmptyText, ModelLoadFailure, extract_text, load_text_resources

EXIT_OK = 0
EXIT_IO = 1
EXIT_BAD_INPUT = 2
EXIT_MODEL = 3


def _load_config(path: Optional[str]) -> ExtractionConfig:
    return load_extraction_config(path) if path else ExtractionConfig()


def _collect(in_dir: Path, pattern: str) -> list[Path]:
    files = sorted(in_dir.glob(pattern))
    if not files:
        raise AsrDocumentError(f"no {pattern} files in {in_dir}")
    return files


def cmd_ingest(args: argparse.Namespace) -> int:
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    files = _collect(in_dir, "*.json")
    converted = []
    for path in files:
        try:
            document = ingest_asr(
                path.read_text(encoding="utf-8"), subject_id=path.stem, test=args.test
            )
        except AsrDocumentError as exc:
            raise AsrDocumentError(f"{path.name}: {exc}") from exc
        converted.append((path.stem, document))
    out_dir.mkdir(parents=True, exist_ok=True)
    for stem, document in converted:
        (out_dir / f"{stem}.json").write_text(
            json.dumps(document, indent=2) + "\n", encoding="utf-8"
        )
    print(f"converted {len(converted)} recognizer document(s) -> {out_dir}")
    return EXIT_OK


def cmd_text(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    files = _collect(in_dir, "*.txt")
    resources = load_text_resources(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in files:
        matrix = extract_text(path.read_text(encoding="utf-8").strip(), resources)
        write_matrix(matrix, out_dir / f"{path.stem}.pemb")
        print(f"{path.stem}: {matrix.shape[0]} tokens")
    print(f"wrote {len(files)} text matrix file(s) -> {out_dir}")
    return EXIT_OK


def cmd_audio(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    files = _collect(in_dir, "*.wav")
    resources = load_audio_resources(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in files:
        matrix = extract_audio_file(path, resources)
        write_matrix(matrix, out_dir / f"{path.stem}.pemb")
        print(f"{path.stem}: {matrix.shape[0]} window(s)")
    print(f"wrote {len(files)} audio matrix file(s) -> {out_dir}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pauseextract",
        description="Export text/audio embedding matrices for pause-annotated speech",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="convert recognizer output to transcript documents")
    p.add_argument("--in", dest="in_dir", required=True, help="recognizer JSON directory")
    p.add_argument("--test", required=True, choices=["VFT", "PDT"])
    p.add_argument("--out", dest="out_dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("text", help="export token embedding matrices")
    p.add_argument("--config", help="extraction config JSON (defaults if omitted)")
    p.add_argument("--in", dest="in_dir", required=True, help="enriched .txt directory")
    p.add_argument("--out", dest="out_dir", required=True)
    p.set_defaults(func=cmd_text)

    p = sub.add_parser("audio", help="export window embedding matrices")
    p.add_argument("--config", help="extraction config JSON (defaults if omitted)")
    p.add_argument("--in", dest="in_dir", required=True, help="mono 16-bit .wav directory")
    p.add_argument("--out", dest="out_dir", required=True)
    p.set_defaults(func=cmd_audio)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AsrDocumentError, ConfigError, EmptyText, AudioTooShort,
            DegenerateWaveform, UnsupportedAudio) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ModelLoadFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
