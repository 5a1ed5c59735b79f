"""Baseline prosody-transfer models: split, fit, predict, evaluate, inspect.

Three baselines: a naive identity map, a per-dimension linear regression
(optionally ridge-regularized), and evaluation of externally synthesized
audio. The split is a seeded greedy speaker assignment that guarantees the
train and test pair sets share at most one speaker, retrying with bumped
seeds when the constraint fails.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import frames, metric, midlevel
from .corpus import CorpusManifest, MatchedPair, read_track
from .errors import DataError, SplitConstraintError
from .midlevel import N_DIMS, ProsodyVector, feature_labels

logger = logging.getLogger(__name__)

DIRECTIONS = ("en-es", "es-en")
MAX_SPLIT_RETRIES = 100
MIN_TRAIN_RECOMMENDED = 101
LSTSQ_RCOND = 1e-10


@dataclass(frozen=True)
class SplitSpec:
    train: tuple  # pair_ids
    test: tuple  # pair_ids
    seed: int
    shared_speakers: frozenset


@dataclass(frozen=True)
class LinearModel:
    direction: str  # "en-es" or "es-en"
    ridge_lambda: float
    weights: np.ndarray  # (100, 101); column 100 = intercept
    feature_labels: tuple
    n_train: int
    seed: int | None = None

    @property
    def source_language(self) -> str:
        return self.direction.split("-")[0].upper()

    @property
    def target_language(self) -> str:
        return self.direction.split("-")[1].upper()


@dataclass(frozen=True)
class EvaluationReport:
    model_name: str
    direction: str
    n_test: int
    average_error: float
    per_pair: tuple  # (pair_id, error), sorted by pair_id


def _check_direction(direction: str) -> str:
    if direction not in DIRECTIONS:
        raise DataError(f"unknown direction {direction!r}; expected one of {DIRECTIONS}")
    return direction


# ---------------------------------------------------------------------------
# split


def _pair_speakers(pair: MatchedPair) -> frozenset:
    return frozenset({pair.en.speaker_id, pair.es.speaker_id})


def _try_split(pairs: list[MatchedPair], test_fraction: float, seed: int):
    speakers = sorted({s for p in pairs for s in _pair_speakers(p)})
    rng = random.Random(seed)
    rng.shuffle(speakers)

    target = test_fraction * len(pairs)
    test_spk: set = set()
    n_inside = 0
    for spk in speakers:
        if n_inside >= target:
            break
        test_spk.add(spk)
        n_inside = sum(1 for p in pairs if _pair_speakers(p) <= test_spk)

    test_ids, train_ids = [], []
    straddlers = []
    for p in pairs:
        spk = _pair_speakers(p)
        if spk <= test_spk:
            test_ids.append(p.pair_id)
        elif spk.isdisjoint(test_spk):
            train_ids.append(p.pair_id)
        else:
            straddlers.append(p)

    # a straddling pair touches both sides: put it where it creates fewer
    # newly shared speakers, preferring train on ties
    test_set, train_set = set(test_ids), set(train_ids)
    spk_in_test = {s for p in pairs if p.pair_id in test_set for s in _pair_speakers(p)}
    spk_in_train = {s for p in pairs if p.pair_id in train_set for s in _pair_speakers(p)}
    for p in sorted(straddlers, key=lambda q: q.pair_id):
        spk = _pair_speakers(p)
        cost_test = len(spk - spk_in_test)  # speakers newly dragged into test
        cost_train = len(spk - spk_in_train)
        if cost_test < cost_train:
            test_ids.append(p.pair_id)
            spk_in_test |= spk
        else:
            train_ids.append(p.pair_id)
            spk_in_train |= spk

    shared = frozenset(spk_in_test & spk_in_train)
    return sorted(train_ids), sorted(test_ids), shared


def split_pairs(
    pairs: list[MatchedPair], test_fraction: float, seed: int
) -> SplitSpec:
    """Speaker-grouped train/test split with at most one shared speaker."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    speakers = {s for p in pairs for s in _pair_speakers(p)}
    if len(speakers) < 2:
        raise SplitConstraintError(
            f"need at least 2 distinct speakers, found {len(speakers)}"
        )
    for offset in range(MAX_SPLIT_RETRIES + 1):
        train_ids, test_ids, shared = _try_split(pairs, test_fraction, seed + offset)
        if train_ids and test_ids and len(shared) <= 1:
            if offset:
                logger.warning(
                    "split constraint met after %d retries (seed offset %d)",
                    offset,
                    offset,
                )
            return SplitSpec(
                train=tuple(train_ids),
                test=tuple(test_ids),
                seed=seed,
                shared_speakers=shared,
            )
    raise SplitConstraintError(
        f"could not satisfy the shared-speaker bound within "
        f"{MAX_SPLIT_RETRIES} retries from seed {seed}"
    )


def write_split_csv(spec: SplitSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "# seed=%d train=%d test=%d shared_speakers=%d\n"
            % (spec.seed, len(spec.train), len(spec.test), len(spec.shared_speakers))
        )
        fh.write("pair_id,partition\n")
        for pid in spec.train:
            fh.write(f"{pid},train\n")
        for pid in spec.test:
            fh.write(f"{pid},test\n")


def read_split_csv(path) -> SplitSpec:
    train, test = [], []
    seed = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("seed="):
                        seed = int(token[5:])
                continue
            if line == "pair_id,partition":
                continue
            parts = line.split(",")
            if len(parts) != 2 or parts[1] not in ("train", "test"):
                raise DataError(f"{path}:{lineno}: malformed split row {line!r}")
            (train if parts[1] == "train" else test).append(parts[0])
    if not train or not test:
        raise DataError(f"split file {path} lacks train or test rows")
    overlap = set(train) & set(test)
    if overlap:
        raise DataError(f"split file {path}: pairs in both partitions: {sorted(overlap)[:5]}")
    return SplitSpec(
        train=tuple(train),
        test=tuple(test),
        seed=seed if seed is not None else -1,
        shared_speakers=frozenset(),
    )


def read_exclusion_list(path) -> frozenset:
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


# ---------------------------------------------------------------------------
# models


def naive_predict(x: ProsodyVector) -> ProsodyVector:
    """The identity baseline: target prosody predicted equal to the source."""
    return x


def fit_linear(
    X: np.ndarray,
    Y: np.ndarray,
    direction: str,
    ridge_lambda: float = 0.0,
    seed: int | None = None,
) -> LinearModel:
    """Least-squares fit of Y ~ [X, 1], one linear map for all 100 targets."""
    _check_direction(direction)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != N_DIMS or Y.shape != X.shape:
        raise DataError(f"bad training shapes: {X.shape}, {Y.shape}")
    n = X.shape[0]
    if n == 0:
        raise DataError("empty training set")
    if ridge_lambda < 0.0:
        raise DataError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    if n < MIN_TRAIN_RECOMMENDED:
        logger.warning(
            "only %d training pairs (< %d); fit may be underdetermined",
            n,
            MIN_TRAIN_RECOMMENDED,
        )
    design = np.hstack([X, np.ones((n, 1))])
    target = Y
    if ridge_lambda > 0.0:
        # sqrt-lambda row augmentation; the intercept stays unpenalized
        penalty = math.sqrt(ridge_lambda) * np.eye(N_DIMS, N_DIMS + 1)
        design = np.vstack([design, penalty])
        target = np.vstack([Y, np.zeros((N_DIMS, N_DIMS))])
    solution, _, _, _ = np.linalg.lstsq(design, target, rcond=LSTSQ_RCOND)
    weights = solution.T  # (100 targets, 101)
    if not np.all(np.isfinite(weights)):
        raise DataError("non-finite weights from least-squares solve")
    return LinearModel(
        direction=direction,
        ridge_lambda=float(ridge_lambda),
        weights=weights,
        feature_labels=feature_labels(),
        n_train=n,
        seed=seed,
    )


def predict_matrix(model: LinearModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != N_DIMS:
        raise DataError(f"expected (n, {N_DIMS}) inputs, got {X.shape}")
    return X @ model.weights[:, :N_DIMS].T + model.weights[:, N_DIMS]


def predict(model: LinearModel, x: ProsodyVector) -> ProsodyVector:
    if x.values.shape != (N_DIMS,):
        raise DataError(f"expected {N_DIMS}-dim vector, got {x.values.shape}")
    y = model.weights[:, :N_DIMS] @ x.values + model.weights[:, N_DIMS]
    return ProsodyVector(
        utterance_id=x.utterance_id, track_id=x.track_id, values=y
    )


def top_coefficients(model: LinearModel, k: int = 10) -> list[tuple]:
    """The k largest-|w| non-intercept entries as (src_label, tgt_label, w)."""
    labels = model.feature_labels
    src, tgt = model.source_language, model.target_language
    w = model.weights[:, :N_DIMS]
    entries = [
        (f"{src} {labels[j]}", f"{tgt} {labels[i]}", float(w[i, j]))
        for i in range(N_DIMS)
        for j in range(N_DIMS)
    ]
    entries.sort(key=lambda e: (-abs(e[2]), e[0], e[1]))
    return entries[: max(0, k)]


def render_coefficients(entries: list[tuple]) -> str:
    return "".join(f"{s} → {t}: {w!r}\n" for s, t, w in entries)


def save_model(model: LinearModel, path) -> None:
    payload = {
        "direction": model.direction,
        "ridge_lambda": model.ridge_lambda,
        "weights": [[float(v) for v in row] for row in model.weights],
        "feature_labels": list(model.feature_labels),
        "n_train": model.n_train,
        "seed": model.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path) -> LinearModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable model file {path}: {exc}") from None
    try:
        weights = np.array(payload["weights"], dtype=np.float64)
        model = LinearModel(
            direction=_check_direction(payload["direction"]),
            ridge_lambda=float(payload["ridge_lambda"]),
            weights=weights,
            feature_labels=tuple(payload["feature_labels"]),
            n_train=int(payload["n_train"]),
            seed=payload.get("seed"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file {path}: {exc}") from None
    if weights.shape != (N_DIMS, N_DIMS + 1) or not np.all(np.isfinite(weights)):
        raise DataError(f"model file {path}: bad weight matrix {weights.shape}")
    if model.feature_labels != feature_labels():
        raise DataError(f"model file {path}: unexpected feature labels")
    return model


# ---------------------------------------------------------------------------
# evaluation


def evaluate(
    predictions: dict,
    references: dict,
    model_name: str,
    direction: str,
) -> EvaluationReport:
    """Mean dissimilarity between prediction and reference per pair_id."""
    _check_direction(direction)
    if predictions.keys() != references.keys():
        missing = sorted(references.keys() - predictions.keys())[:5]
        extra = sorted(predictions.keys() - references.keys())[:5]
        raise DataError(
            f"pair_id mismatch between predictions and references "
            f"(missing {missing}, extra {extra})"
        )
    if not references:
        raise DataError("empty evaluation set")
    per_pair = tuple(
        (pid, metric.dissimilarity(predictions[pid], references[pid]))
        for pid in sorted(references)
    )
    average = float(np.mean([e for _, e in per_pair]))
    return EvaluationReport(
        model_name=model_name,
        direction=direction,
        n_test=len(per_pair),
        average_error=average,
        per_pair=per_pair,
    )


def render_report(report: EvaluationReport) -> str:
    return (
        f"model: {report.model_name}\n"
        f"direction: {report.direction}\n"
        f"test pairs: {report.n_test}\n"
        f"average error: {report.average_error:.6f}\n"
    )


def write_errors_csv(report: EvaluationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pair_id,error\n")
        for pid, err in report.per_pair:
            fh.write(f"{pid},{err!r}\n")


def utterance_id_for(pair_id: str, language: str, manifest: CorpusManifest = None) -> str:
    """Utterance ID of a pair's side, by manifest or the ID convention."""
    if manifest is not None:
        pair = manifest.pair(pair_id)
        if pair is None:
            raise DataError(f"pair {pair_id} not in manifest")
        return pair.en.utterance_id if language == "EN" else pair.es.utterance_id
    return f"{language}_{pair_id}"


def vectors_by_pair(
    vectors: list[ProsodyVector],
    pair_ids,
    language: str,
    manifest: CorpusManifest = None,
) -> dict:
    """Map pair_id -> that pair's ProsodyVector in the given language."""
    by_id = {v.utterance_id: v for v in vectors}
    out = {}
    for pid in pair_ids:
        uid = utterance_id_for(pid, language, manifest)
        if uid not in by_id:
            raise DataError(f"no feature vector for utterance {uid} (pair {pid})")
        out[pid] = by_id[uid]
    return out


def eval_external_audio(
    synth_dir,
    direction: str,
    references: dict,
    exclude: frozenset = frozenset(),
    manifest: CorpusManifest = None,
    model_name: str = "synthesizer",
) -> EvaluationReport:
    """Evaluate externally synthesized audio against reference vectors.

    ``synth_dir`` holds one WAV per target utterance (`<utterance_id>.wav`).
    Each file runs through the frame and mid-level stages on its own; all
    synthesized utterances are then grouped as one synthetic-voice track for
    the final z-normalization. Excluded utterance_ids are dropped from the
    evaluation; a missing non-excluded file is an error.
    """
    _check_direction(direction)
    synth_dir = Path(synth_dir)
    target_lang = direction.split("-")[1].upper()
    voice_track = f"synth/{synth_dir.name or 'voice'}/ch0"

    kept: dict[str, str] = {}  # pair_id -> target utterance_id
    for pid in sorted(references):
        uid = utterance_id_for(pid, target_lang, manifest)
        if uid in exclude:
            continue
        if not (synth_dir / f"{uid}.wav").exists():
            raise DataError(f"missing synthesized audio for {uid}")
        kept[pid] = uid
    if not kept:
        raise DataError("no pairs left to evaluate after exclusions")

    raws = []
    for pid, uid in kept.items():
        track = read_track(synth_dir / f"{uid}.wav", channel=0, track_id=voice_track)
        nfs = frames.normalize_frame_series(frames.compute_frame_series(track))
        rec_like = _WholeFileRecord(uid, track.duration_s)
        raw = midlevel.utterance_raw_vector(nfs, rec_like)
        raws.append(raw)
    normalized, _ = midlevel.znormalize_track(raws, corpus=midlevel.corpus_moments(raws))
    by_uid = {v.utterance_id: v for v in normalized}

    predictions = {pid: by_uid[uid] for pid, uid in kept.items()}
    refs = {pid: references[pid] for pid in kept}
    return evaluate(predictions, refs, model_name, direction)


class _WholeFileRecord:
    """Minimal record covering an entire synthesized file."""

    def __init__(self, utterance_id: str, duration_s: float):
        self.utterance_id = utterance_id
        self.start_s = 0.0
        self.end_s = duration_s

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s
