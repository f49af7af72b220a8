"""Cross-validated training and evaluation of the attention classifier.

Provides the three binary screening tasks, speaker-distinct stratified
k-fold splitting, stratified batch composition, a fixed-setting training
loop with early stopping on a held-out slice of the training split, and
rank-based ROC/AUC — everything needed to turn a cohort manifest into a
reproducible report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import IO, Mapping, Optional, Sequence, Union

import numpy as np

from .neuralcore import (
    AdamState,
    BatchInput,
    HyperParams,
    Mode,
    ModelParams,
    adam_step,
    backward,
    init_adam_state,
    init_params,
    model_forward,
    predict,
    weighted_cross_entropy,
)
from .tensorio import CohortManifest, Label, MalformedManifest, read_matrix

__all__ = [
    "TooFewSubjects",
    "DegenerateTrainingSet",
    "SingleClass",
    "TaskId",
    "Task",
    "TASKS",
    "FoldPlan",
    "Sample",
    "ExperimentConfig",
    "TrainRun",
    "CvReport",
    "stratified_kfold",
    "load_samples",
    "stratified_batches",
    "make_batch",
    "train_model",
    "roc_auc",
    "roc_points",
    "run_cv",
    "report_to_json",
    "write_report",
]

EARLY_STOP_PATIENCE = 3
VALIDATION_FRACTION = 0.1


class TooFewSubjects(ValueError):
    pass


class DegenerateTrainingSet(ValueError):
    """Training data contains only one of the two classes."""


class SingleClass(ValueError):
    """AUC is undefined without both a positive and a negative."""


class TaskId(str, Enum):
    ONSET = "onset"            # NC vs MCI
    MONITORING = "monitoring"  # MCI vs AD
    EXCLUSION = "exclusion"    # NC vs AD


@dataclass(frozen=True)
class Task:
    """A binary contrast between two diagnostic groups.

    The positive class is always the more impaired group, so higher
    positive-class probability reads as higher concern.
    """

    id: TaskId
    negative_label: Label
    positive_label: Label

    def __post_init__(self) -> None:
        if self.negative_label == self.positive_label:
            raise ValueError("a task needs two distinct labels")

    @property
    def labels(self) -> tuple[Label, Label]:
        return (self.negative_label, self.positive_label)

    def y(self, label: Label) -> int:
        if label == self.positive_label:
            return 1
        if label == self.negative_label:
            return 0
        raise ValueError(f"label {label.value} is not part of task {self.id.value}")


TASKS: dict[TaskId, Task] = {
    TaskId.ONSET: Task(TaskId.ONSET, Label.NC, Label.MCI),
    TaskId.MONITORING: Task(TaskId.MONITORING, Label.MCI, Label.AD),
    TaskId.EXCLUSION: Task(TaskId.EXCLUSION, Label.NC, Label.AD),
}


@dataclass(frozen=True)
class FoldPlan:
    """Per-fold test subject sets; together they partition the cohort."""

    k: int
    test_sets: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        if self.k != len(self.test_sets):
            raise ValueError("fold count does not match the number of test sets")
        seen: set[str] = set()
        for fold in self.test_sets:
            overlap = seen & fold
            if overlap:
                raise ValueError(f"subjects in multiple test sets: {sorted(overlap)[:3]}")
            seen.update(fold)

    @property
    def subjects(self) -> frozenset[str]:
        return frozenset().union(*self.test_sets)


def stratified_kfold(
    labels_by_subject: Mapping[str, Label], k: int = 5, seed: int = 0
) -> FoldPlan:
    """Split subjects into k test sets balanced by class.

    Within each class, subjects are dealt evenly; the leftover subjects go
    to whichever folds currently hold the fewest, so total fold sizes also
    stay within one of each other.  Deterministic for a fixed seed.
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if len(labels_by_subject) < k:
        raise TooFewSubjects(
            f"{len(labels_by_subject)} subjects cannot fill {k} speaker-distinct folds"
        )
    rng = np.random.default_rng(seed)
    folds: list[list[str]] = [[] for _ in range(k)]
    by_label: dict[Label, list[str]] = {}
    for subject, label in labels_by_subject.items():
        by_label.setdefault(label, []).append(subject)
    for label in sorted(by_label, key=lambda lab: lab.value):
        ids = sorted(by_label[label])
        rng.shuffle(ids)
        base, extra = divmod(len(ids), k)
        # Folds with the fewest subjects so far absorb the remainder.
        order = sorted(range(k), key=lambda f: (len(folds[f]), f))
        counts = [base + (1 if order.index(f) < extra else 0) for f in range(k)]
        cursor = 0
        for f in range(k):
            folds[f].extend(ids[cursor:cursor + counts[f]])
            cursor += counts[f]
    return FoldPlan(k=k, test_sets=tuple(frozenset(f) for f in folds))


@dataclass(frozen=True)
class Sample:
    """One subject's data, ready for batching."""

    subject_id: str
    label: Label
    y: int
    text: np.ndarray            # (L_text, d) float64
    audio: Optional[np.ndarray]  # (L_audio, d) float64 or None


def load_samples(manifest: CohortManifest, task: Task, mode: Mode) -> list[Sample]:
    """Materialize the task's subjects from a manifest, sorted by id.

    Modes that attend over audio require an audio matrix for every
    selected record.
    """
    needs_audio = mode in (Mode.SELF_AUDIO, Mode.CROSS)
    samples: list[Sample] = []
    for rec in manifest.records:
        if rec.label not in task.labels:
            continue
        if needs_audio and rec.audio_matrix_path is None:
            raise MalformedManifest(
                f"subject {rec.subject_id} has no audio matrix but mode "
                f"{mode.value} attends over audio"
            )
        text = read_matrix(rec.text_matrix_path).data.astype(np.float64)
        audio = None
        if rec.audio_matrix_path is not None:
            audio = read_matrix(rec.audio_matrix_path).data.astype(np.float64)
        samples.append(
            Sample(
                subject_id=rec.subject_id,
                label=rec.label,
                y=task.y(rec.label),
                text=text,
                audio=audio,
            )
        )
    samples.sort(key=lambda s: s.subject_id)
    return samples


def stratified_batches(
    samples: Sequence[Sample], batch_size: int, rng: np.random.Generator
) -> list[list[Sample]]:
    """Shuffle one epoch into batches that mirror the class ratio.

    Each batch's per-class quota comes from largest-remainder rounding of
    the remaining pool, so every sample appears exactly once per epoch and
    ratios stay as close to the pool's as integers allow.
    """
    pools: dict[int, list[Sample]] = {0: [], 1: []}
    for s in samples:
        pools.setdefault(s.y, []).append(s)
    if not pools[0] or not pools[1]:
        raise DegenerateTrainingSet("stratified batches need both classes present")
    for y in sorted(pools):
        pool = pools[y]
        pool.sort(key=lambda s: s.subject_id)
        rng.shuffle(pool)

    batches: list[list[Sample]] = []
    remaining = {y: len(pools[y]) for y in pools}
    cursors = {y: 0 for y in pools}
    total = sum(remaining.values())
    while total > 0:
        size = min(batch_size, total)
        exact = {y: size * remaining[y] / total for y in pools}
        take = {y: int(exact[y]) for y in pools}
        leftover = size - sum(take.values())
        for y in sorted(pools, key=lambda y: (-(exact[y] - take[y]), y)):
            if leftover == 0:
                break
            if exact[y] > take[y]:
                take[y] += 1
                leftover -= 1
        batch: list[Sample] = []
        for y in sorted(pools):
            n = take[y]
            batch.extend(pools[y][cursors[y]:cursors[y] + n])
            cursors[y] += n
            remaining[y] -= n
        rng.shuffle(batch)
        batches.append(batch)
        total -= size
    return batches


def make_batch(samples: Sequence[Sample], mode: Mode) -> BatchInput:
    """Zero-pad a group of samples into masked query/key-value arrays."""
    if not samples:
        raise ValueError("cannot build an empty batch")

    def stack(rows: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        longest = max(r.shape[0] for r in rows)
        d = rows[0].shape[1]
        out = np.zeros((len(rows), longest, d))
        mask = np.zeros((len(rows), longest), dtype=bool)
        for i, r in enumerate(rows):
            out[i, : r.shape[0]] = r
            mask[i, : r.shape[0]] = True
        return out, mask

    labels = np.array([s.y for s in samples], dtype=np.int64)
    if mode is Mode.SELF_TEXT:
        q, qm = stack([s.text for s in samples])
        return BatchInput(query=q, query_mask=qm, kv=q, kv_mask=qm, labels=labels)
    audio_rows = []
    for s in samples:
        if s.audio is None:
            raise MalformedManifest(f"subject {s.subject_id} lacks audio for mode {mode.value}")
        audio_rows.append(s.audio)
    a, am = stack(audio_rows)
    if mode is Mode.SELF_AUDIO:
        return BatchInput(query=a, query_mask=am, kv=a, kv_mask=am, labels=labels)
    q, qm = stack([s.text for s in samples])
    return BatchInput(query=q, query_mask=qm, kv=a, kv_mask=am, labels=labels)


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskId
    mode: Mode
    seed: int = 0
    folds: int = 5
    hp: HyperParams = field(default_factory=HyperParams)
    d_model: int = 768
    hidden_dim: int = 512

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")
        if self.d_model < 1 or self.hidden_dim < 1:
            raise ValueError("model dimensions must be positive")


@dataclass(frozen=True)
class TrainRun:
    config: ExperimentConfig
    class_weights: tuple[float, float]
    loss_history: tuple[float, ...]       # mean training loss per epoch
    val_history: tuple[float, ...]        # empty when no holdout was possible
    stopping_epoch: int
    params: ModelParams

    def __post_init__(self) -> None:
        if not 1 <= self.stopping_epoch <= self.config.hp.max_epochs:
            raise ValueError("stopping epoch outside the epoch budget")


def _class_weights(ys: np.ndarray) -> tuple[float, float]:
    """Inverse-frequency weights: w_c = N_total / (2 * N_c)."""
    n = len(ys)
    n1 = int(ys.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DegenerateTrainingSet("both classes must be present to train")
    return (n / (2.0 * n0), n / (2.0 * n1))


def _validation_split(
    samples: Sequence[Sample], rng: np.random.Generator
) -> tuple[list[Sample], list[Sample]]:
    """Stratified 10% holdout; may be empty for very small classes."""
    fit: list[Sample] = []
    val: list[Sample] = []
    for y in (0, 1):
        pool = sorted((s for s in samples if s.y == y), key=lambda s: s.subject_id)
        rng.shuffle(pool)
        n_val = int(VALIDATION_FRACTION * len(pool))
        val.extend(pool[:n_val])
        fit.extend(pool[n_val:])
    fit.sort(key=lambda s: s.subject_id)
    val.sort(key=lambda s: s.subject_id)
    return fit, val


def _dataset_loss(
    params: ModelParams,
    hp: HyperParams,
    samples: Sequence[Sample],
    mode: Mode,
) -> float:
    """Sample-weighted loss over a dataset, evaluated without dropout."""
    total = 0.0
    weight = 0.0
    for start in range(0, len(samples), hp.batch_size):
        chunk = samples[start:start + hp.batch_size]
        batch = make_batch(chunk, mode)
        logits, _ = model_forward(params, hp, batch, mode, training=False)
        loss, _ = weighted_cross_entropy(logits, batch.labels, hp.class_weights)
        w = sum(hp.class_weights[s.y] for s in chunk)
        total += loss * w
        weight += w
    return total / weight


def train_model(
    config: ExperimentConfig,
    samples: Sequence[Sample],
    seed: Optional[int] = None,
) -> TrainRun:
    """Train once on the given records with the fixed setting.

    Class weights are inverse class frequencies of the full training
    split.  A stratified 10% holdout drives early stopping: training stops
    once the holdout loss has failed to improve for three consecutive
    epochs, and the best-holdout parameters are restored.  Every random
    choice derives from the seed, so reruns are bit-identical.
    """
    if seed is None:
        seed = config.seed
    samples = sorted(samples, key=lambda s: s.subject_id)
    ys = np.array([s.y for s in samples], dtype=np.int64)
    weights = _class_weights(ys)
    hp = replace(config.hp, class_weights=weights)

    rng_split = np.random.default_rng([seed, 0])
    rng_init = np.random.default_rng([seed, 1])
    rng_batch = np.random.default_rng([seed, 2])
    rng_drop = np.random.default_rng([seed, 3])

    fit, val = _validation_split(samples, rng_split)
    if not any(s.y == 0 for s in fit) or not any(s.y == 1 for s in fit):
        raise DegenerateTrainingSet("validation holdout exhausted one class")

    params = init_params(rng_init, d_model=config.d_model, hidden_dim=config.hidden_dim)
    state: AdamState = init_adam_state(params)

    best_params = params
    best_val = np.inf
    stale = 0
    loss_history: list[float] = []
    val_history: list[float] = []
    stopping_epoch = hp.max_epochs

    for epoch in range(1, hp.max_epochs + 1):
        epoch_losses: list[float] = []
        for chunk in stratified_batches(fit, hp.batch_size, rng_batch):
            batch = make_batch(chunk, config.mode)
            logits, trace = model_forward(
                params, hp, batch, config.mode, training=True, rng=rng_drop
            )
            loss, dlogits = weighted_cross_entropy(logits, batch.labels, hp.class_weights)
            grads = backward(trace, dlogits)
            params, state = adam_step(params, grads, state, hp)
            epoch_losses.append(loss)
        loss_history.append(float(np.mean(epoch_losses)))

        if val:
            val_loss = _dataset_loss(params, hp, val, config.mode)
            val_history.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_params = params
                stale = 0
            else:
                stale += 1
            if stale >= EARLY_STOP_PATIENCE:
                stopping_epoch = epoch
                break
        else:
            best_params = params
    else:
        stopping_epoch = hp.max_epochs

    return TrainRun(
        config=config,
        class_weights=weights,
        loss_history=tuple(loss_history),
        val_history=tuple(val_history),
        stopping_epoch=stopping_epoch,
        params=best_params,
    )


def _scores(
    params: ModelParams, hp: HyperParams, samples: Sequence[Sample], mode: Mode
) -> np.ndarray:
    """Positive-class softmax probability per sample, in input order."""
    out = np.empty(len(samples))
    for start in range(0, len(samples), hp.batch_size):
        chunk = samples[start:start + hp.batch_size]
        logits, _ = model_forward(params, hp, make_batch(chunk, mode), mode, training=False)
        probs, _ = predict(logits)
        out[start:start + len(chunk)] = probs[:, 1]
    return out


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outranks a random negative.

    Computed from midrank sums, which equals (concordant + 0.5 * tied)
    over all positive/negative pairs.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be matching 1-D sequences")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs at least one positive and one negative")

    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float]]:
    """(false positive rate, true positive rate) sweep from (0,0) to (1,1)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(scores):
        j = i
        threshold = scores[order[i]]
        while j < len(scores) and scores[order[j]] == threshold:
            if labels[order[j]] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    return points


@dataclass(frozen=True)
class CvReport:
    config: ExperimentConfig
    scheme_id: str
    fold_test_subjects: tuple[tuple[str, ...], ...]
    fold_aucs: tuple[float, ...]
    mean_auc: float
    roc_curves: tuple[tuple[tuple[float, float], ...], ...]
    loss_histories: tuple[tuple[float, ...], ...]
    val_histories: tuple[tuple[float, ...], ...]
    stopping_epochs: tuple[int, ...]

    def __post_init__(self) -> None:
        if not all(0.0 <= a <= 1.0 for a in self.fold_aucs):
            raise ValueError("AUC values must lie in [0, 1]")
        expected = float(np.mean(self.fold_aucs))
        if abs(expected - self.mean_auc) > 1e-12:
            raise ValueError("mean AUC does not match its folds")


def run_cv(config: ExperimentConfig, manifest: CohortManifest) -> CvReport:
    """Speaker-distinct k-fold evaluation of one task/mode configuration.

    Each fold trains a fresh model on the other folds' subjects (seeded
    per fold) and scores its own test subjects with the positive-class
    probability.
    """
    task = TASKS[config.task]
    samples = load_samples(manifest, task, config.mode)
    labels_by_subject = {s.subject_id: s.label for s in samples}
    plan = stratified_kfold(labels_by_subject, k=config.folds, seed=config.seed)

    fold_aucs: list[float] = []
    curves: list[tuple[tuple[float, float], ...]] = []
    losses: list[tuple[float, ...]] = []
    vals: list[tuple[float, ...]] = []
    stops: list[int] = []
    fold_subjects: list[tuple[str, ...]] = []

    for fold_index, test_ids in enumerate(plan.test_sets):
        train_samples = [s for s in samples if s.subject_id not in test_ids]
        test_samples = sorted(
            (s for s in samples if s.subject_id in test_ids), key=lambda s: s.subject_id
        )
        rng_seed = int(np.random.default_rng([config.seed, 100 + fold_index]).integers(2**31))
        run = train_model(config, train_samples, seed=rng_seed)
        hp = replace(config.hp, class_weights=run.class_weights)
        scores = _scores(run.params, hp, test_samples, config.mode)
        ys = [s.y for s in test_samples]
        fold_aucs.append(roc_auc(scores, ys))
        curves.append(tuple(roc_points(scores, ys)))
        losses.append(run.loss_history)
        vals.append(run.val_history)
        stops.append(run.stopping_epoch)
        fold_subjects.append(tuple(sorted(test_ids)))

    return CvReport(
        config=config,
        scheme_id=manifest.scheme_id.value,
        fold_test_subjects=tuple(fold_subjects),
        fold_aucs=tuple(fold_aucs),
        mean_auc=float(np.mean(fold_aucs)),
        roc_curves=tuple(curves),
        loss_histories=tuple(losses),
        val_histories=tuple(vals),
        stopping_epochs=tuple(stops),
    )


def report_to_json(report: CvReport) -> str:
    """Render a report with stable field order for byte-level diffing."""
    cfg = report.config
    doc = {
        "task": cfg.task.value,
        "mode": cfg.mode.value,
        "scheme": report.scheme_id,
        "seed": cfg.seed,
        "folds": cfg.folds,
        "hyperparameters": {
            "learning_rate": cfg.hp.learning_rate,
            "batch_size": cfg.hp.batch_size,
            "max_epochs": cfg.hp.max_epochs,
            "dropout_rate": cfg.hp.dropout_rate,
            "activation": cfg.hp.activation,
            "adam_beta1": cfg.hp.adam_beta1,
            "adam_beta2": cfg.hp.adam_beta2,
            "adam_eps": cfg.hp.adam_eps,
        },
        "fold_test_subjects": [list(f) for f in report.fold_test_subjects],
        "fold_aucs": list(report.fold_aucs),
        "mean_auc": report.mean_auc,
        "stopping_epochs": list(report.stopping_epochs),
        "loss_histories": [list(h) for h in report.loss_histories],
        "val_histories": [list(h) for h in report.val_histories],
        "roc_curves": [[[fpr, tpr] for fpr, tpr in curve] for curve in report.roc_curves],
    }
    return json.dumps(doc, indent=2) + "\n"


def write_report(target: Union[str, Path, IO[str]], report: CvReport) -> None:
    text = report_to_json(report)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)
