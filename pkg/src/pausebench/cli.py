"""Command-line entry points for the whole pipeline.

Exit codes are scriptable: 0 success, 2 parse errors (documents, specs,
flags), 3 manifest/matrix problems, 4 degenerate data for the requested
task, 5 verification failure.  Every run starts by echoing its fully
resolved configuration, and identical inputs plus seeds produce identical
outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .enrichment import (
    PAUSE_SCHEMES,
    ItemKind,
    TranscriptError,
    enrich,
    parse_timed_transcript,
    render,
    scheme_id_from_string,
)
from .experiments import (
    TASKS,
    DegenerateTrainingSet,
    ExperimentConfig,
    SingleClass,
    TaskId,
    TooFewSubjects,
    load_samples,
    report_to_json,
    run_cv,
    train_model,
)
from .neuralcore import Mode, grad_check, save_model
from .synthcohort import SpecError, generate_cohort, load_cohort_spec
from .tensorio import (
    IoFailure,
    Label,
    ManifestError,
    MatrixError,
    load_manifest,
    read_matrix_header,
)

__all__ = ["main"]

_TASK_FLAGS = {
    "nc-mci": TaskId.ONSET,
    "mci-ad": TaskId.MONITORING,
    "nc-ad": TaskId.EXCLUSION,
}
_MODE_FLAGS = {
    "self-text": Mode.SELF_TEXT,
    "self-audio": Mode.SELF_AUDIO,
    "cross": Mode.CROSS,
}
_SCHEME_FLAGS = ("p1", "p2", "p3", "p4", "p3-disfl")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_MANIFEST = 3
EXIT_DEGENERATE = 4
EXIT_VERIFY = 5


def _default_seed(fallback: int = 0) -> int:
    raw = os.environ.get("PAUSEBENCH_SEED")
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise SpecError(f"PAUSEBENCH_SEED must be an integer, got {raw!r}")


def _echo_config(subcommand: str, **kv: object) -> None:
    parts = " ".join(f"{k}={v}" for k, v in kv.items())
    print(f"[config] subcommand={subcommand} {parts}")


def cmd_enrich(args: argparse.Namespace) -> int:
    scheme = PAUSE_SCHEMES[scheme_id_from_string(args.scheme)]
    include_disfl = True if args.disfl else None
    _echo_config(
        "enrich",
        input=args.in_dir,
        scheme=scheme.id.value,
        disfl=scheme.disfluencies or bool(args.disfl),
        output=args.out_dir,
    )
    in_dir = Path(args.in_dir)
    paths = sorted(in_dir.glob("*.json"))
    if not paths:
        print(f"error: no transcript documents (*.json) in {in_dir}", file=sys.stderr)
        return EXIT_PARSE

    # Parse everything before writing anything, so a bad file aborts cleanly.
    parsed = []
    for path in paths:
        try:
            parsed.append((path, parse_timed_transcript(path)))
        except TranscriptError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_PARSE

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bin_counts: Counter[str] = Counter()
    for path, transcript in parsed:
        enriched = enrich(transcript, scheme, include_disfl)
        for item in enriched.items:
            if item.kind in (ItemKind.PAUSE, ItemKind.DISFL):
                bin_counts[item.text] += 1
        (out_dir / f"{path.stem}.txt").write_text(render(enriched) + "\n", encoding="utf-8")

    print(f"enriched {len(parsed)} transcript(s) -> {out_dir}")
    for token in sorted(bin_counts):
        print(f"  {token} {bin_counts[token]}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_cohort_spec(args.spec)
    _echo_config(
        "synth", spec=args.spec, out=args.out_dir, seed=spec.seed,
        scheme=spec.scheme.value, delta=spec.delta,
        counts=f"nc:{spec.count_nc},mci:{spec.count_mci},ad:{spec.count_ad}",
    )
    cohort = generate_cohort(spec, args.out_dir)
    labels = Counter(r.label.value for r in cohort.manifest.records)
    summary = ", ".join(f"{lab}={labels[lab]}" for lab in sorted(labels))
    print(f"generated {len(cohort.manifest.records)} subjects ({summary})")
    print(f"manifest: {cohort.manifest_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    task = TASKS[_TASK_FLAGS[args.task]]
    mode = _MODE_FLAGS[args.mode]
    _echo_config(
        "train", manifest=args.manifest, task=args.task, mode=args.mode,
        seed=seed, out=args.out,
    )
    manifest = load_manifest(args.manifest)
    config = ExperimentConfig(task=task.id, mode=mode, seed=seed)
    samples = load_samples(manifest, task, mode)
    run = train_model(config, samples)
    hp = replace(config.hp, class_weights=run.class_weights)
    save_model(args.out, run.params, hp)
    print(
        f"trained on {len(samples)} subjects; stopped at epoch {run.stopping_epoch}; "
        f"final training loss {run.loss_history[-1]:.6f}"
    )
    print(f"model: {args.out}")
    return EXIT_OK


def cmd_cv(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    task = TASKS[_TASK_FLAGS[args.task]]
    mode = _MODE_FLAGS[args.mode]
    _echo_config(
        "cv", manifest=args.manifest, task=args.task, mode=args.mode,
        folds=args.folds, seed=seed, report=args.report,
    )
    manifest = load_manifest(args.manifest)
    config = ExperimentConfig(task=task.id, mode=mode, seed=seed, folds=args.folds)
    report = run_cv(config, manifest)
    Path(args.report).write_text(report_to_json(report), encoding="utf-8")
    folds = " ".join(f"{a:.4f}" for a in report.fold_aucs)
    print(f"fold AUCs: {folds}")
    print(f"mean AUC: {report.mean_auc:.4f}")
    print(f"report: {args.report}")
    return EXIT_OK


def cmd_grad_check(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed(fallback=7)
    _echo_config("grad-check", seed=seed)
    report = grad_check(seed)
    for mode in report.per_mode:
        print(
            f"  {mode.mode}: max relative error {mode.max_relative_error:.3e} "
            f"(worst: {mode.worst_field})"
        )
    print(f"max relative error: {report.max_relative_error:.3e} "
          f"(tolerance {report.tolerance:.0e})")
    if not report.passed:
        print("gradient check FAILED", file=sys.stderr)
        return EXIT_VERIFY
    print("gradient check passed")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    path = Path(args.file)
    _echo_config("inspect", file=path)
    suffix = path.suffix.lower()
    if suffix == ".pemb":
        rows, cols = read_matrix_header(path)
        print(f"embedding matrix: {rows} rows x {cols} cols (float32)")
        return EXIT_OK
    if suffix == ".pemm":
        from .neuralcore import load_model

        params, hp = load_model(path)
        print(
            f"model: d_model={params.d_model} hidden={params.hidden_dim} "
            f"classes={params.n_classes}"
        )
        print(
            f"hyperparameters: lr={hp.learning_rate} batch={hp.batch_size} "
            f"max_epochs={hp.max_epochs} dropout={hp.dropout_rate} "
            f"weights={hp.class_weights}"
        )
        return EXIT_OK
    manifest = load_manifest(path)
    counts = Counter(r.label.value for r in manifest.records)
    with_audio = sum(1 for r in manifest.records if r.audio_matrix_path is not None)
    print(
        f"manifest: scheme {manifest.scheme_id.value}, "
        f"{len(manifest.records)} records, audio for {with_audio}"
    )
    for label in Label:
        if counts[label.value]:
            print(f"  {label.value}: {counts[label.value]}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pausebench",
        description="Pause-token speech classification pipeline.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("enrich", help="insert pause tokens into transcripts")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of transcript JSON files")
    p.add_argument("--scheme", required=True, choices=_SCHEME_FLAGS)
    p.add_argument("--disfl", action="store_true", help="force disfluency tokens on")
    p.add_argument("--out", dest="out_dir", required=True, help="output directory")
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--spec", required=True, help="cohort description JSON")
    p.add_argument("--out", dest="out_dir", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    def add_train_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--manifest", required=True)
        p.add_argument("--task", required=True, choices=sorted(_TASK_FLAGS))
        p.add_argument("--mode", required=True, choices=sorted(_MODE_FLAGS))
        p.add_argument("--seed", type=int, default=None,
                       help="default: $PAUSEBENCH_SEED or 0")

    p = sub.add_parser("train", help="train one model on the whole cohort")
    add_train_flags(p)
    p.add_argument("--out", required=True, help="model file to write (.pemm)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="cross-validated evaluation")
    add_train_flags(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--report", required=True, help="report JSON to write")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("grad-check", help="verify gradients against finite differences")
    p.add_argument("--seed", type=int, default=None,
                   help="default: $PAUSEBENCH_SEED or 7")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("inspect", help="describe a matrix, model, or manifest file")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TranscriptError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ManifestError, MatrixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except (DegenerateTrainingSet, TooFewSubjects, SingleClass) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
