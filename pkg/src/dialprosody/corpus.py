"""Corpus ingestion: manifest parsing, audio reading, utterance slicing.

A manifest is a UTF-8 CSV with header::

    utterance_id,pair_id,language,speaker_id,conversation_id,audio_path,channel,start_s,end_s

Audio paths are relative to an audio root supplied by the caller. Every
utterance belongs to exactly one EN/ES matched pair, and one audio *track*
(one channel of one speaker in one conversation) is the unit all later
normalization refers to.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioError, ManifestError

logger = logging.getLogger(__name__)

MANIFEST_HEADER = (
    "utterance_id",
    "pair_id",
    "language",
    "speaker_id",
    "conversation_id",
    "audio_path",
    "channel",
    "start_s",
    "end_s",
)

LANGUAGES = ("EN", "ES")

MIN_UTTERANCE_S = 0.5
MIN_SAMPLE_RATE = 16000
MAX_SAMPLE_RATE = 48000


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    pair_id: str
    language: str
    speaker_id: str
    conversation_id: str
    audio_path: str
    channel: int
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def track_id(self) -> str:
        return track_id(self.conversation_id, self.speaker_id, self.channel)


@dataclass(frozen=True)
class MatchedPair:
    pair_id: str
    en: UtteranceRecord
    es: UtteranceRecord


@dataclass
class AudioTrack:
    track_id: str
    samples: np.ndarray  # float64 amplitudes in [-1, 1]
    sample_rate: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class CorpusManifest:
    records: list[UtteranceRecord]
    pairs: list[MatchedPair]
    stats: dict = field(default_factory=dict)

    def record(self, utterance_id: str) -> UtteranceRecord | None:
        try:
            return self._by_id.get(utterance_id)
        except AttributeError:
            self._by_id = {r.utterance_id: r for r in self.records}
            return self._by_id.get(utterance_id)

    def pair(self, pair_id: str) -> MatchedPair | None:
        try:
            return self._by_pair.get(pair_id)
        except AttributeError:
            self._by_pair = {p.pair_id: p for p in self.pairs}
            return self._by_pair.get(pair_id)


def track_id(conversation_id: str, speaker_id: str, channel: int) -> str:
    """Canonical id of one speaker's channel in one conversation."""
    return f"{conversation_id}/{speaker_id}/ch{channel}"


def _parse_row(row: dict, line_no: int) -> UtteranceRecord:
    utterance_id = row["utterance_id"].strip()
    pair_id = row["pair_id"].strip()
    language = row["language"].strip()
    if not utterance_id or not pair_id:
        raise ManifestError(f"line {line_no}: empty utterance_id or pair_id")
    if language not in LANGUAGES:
        raise ManifestError(f"line {line_no}: unknown language {language!r}")
    if not utterance_id.startswith(language):
        raise ManifestError(
            f"line {line_no}: utterance_id {utterance_id!r} does not start "
            f"with its language {language}"
        )
    try:
        channel = int(row["channel"])
        start_s = float(row["start_s"])
        end_s = float(row["end_s"])
    except (ValueError, TypeError) as exc:
        raise ManifestError(f"line {line_no}: bad numeric field: {exc}") from exc
    if channel < 0:
        raise ManifestError(f"line {line_no}: negative channel")
    if start_s < 0:
        raise ManifestError(f"line {line_no}: negative start_s")
    if end_s - start_s < MIN_UTTERANCE_S:
        raise ManifestError(
            f"line {line_no}: utterance {utterance_id} shorter than "
            f"{MIN_UTTERANCE_S} s ({end_s - start_s:.3f} s)"
        )
    return UtteranceRecord(
        utterance_id=utterance_id,
        pair_id=pair_id,
        language=language,
        speaker_id=row["speaker_id"].strip(),
        conversation_id=row["conversation_id"].strip(),
        audio_path=row["audio_path"].strip(),
        channel=channel,
        start_s=start_s,
        end_s=end_s,
    )


def load_manifest(path: str | Path, strict: bool = True) -> CorpusManifest:
    """Load and validate a manifest CSV.

    With ``strict`` (the default) any invalid row or inconsistent pair aborts
    the load; otherwise offending rows/pairs are dropped with a warning and
    the remainder is returned.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_HEADER:
            raise ManifestError(
                f"bad manifest header in {path}: expected "
                f"{','.join(MANIFEST_HEADER)}"
            )
        records: list[UtteranceRecord] = []
        seen: set[str] = set()
        for line_no, row in enumerate(reader, start=2):
            try:
                rec = _parse_row(row, line_no)
                if rec.utterance_id in seen:
                    raise ManifestError(
                        f"line {line_no}: duplicate utterance_id {rec.utterance_id}"
                    )
            except ManifestError as exc:
                if strict:
                    raise
                logger.warning("dropping manifest row: %s", exc)
                continue
            seen.add(rec.utterance_id)
            records.append(rec)

    pairs, records = _build_pairs(records, strict)
    speakers = {r.speaker_id for r in records}
    stats = {"utterances": len(records), "pairs": len(pairs), "speakers": len(speakers)}
    return CorpusManifest(records=records, pairs=pairs, stats=stats)


def _build_pairs(
    records: list[UtteranceRecord], strict: bool
) -> tuple[list[MatchedPair], list[UtteranceRecord]]:
    by_pair: dict[str, list[UtteranceRecord]] = {}
    for rec in records:
        by_pair.setdefault(rec.pair_id, []).append(rec)

    pairs: list[MatchedPair] = []
    good_pair_ids: set[str] = set()
    for pair_id, members in by_pair.items():
        langs = sorted(m.language for m in members)
        if len(members) != 2 or langs != ["EN", "ES"]:
            msg = (
                f"pair {pair_id}: expected one EN and one ES member, got "
                f"{[m.utterance_id for m in members]}"
            )
            if strict:
                raise ManifestError(msg)
            logger.warning("dropping %s", msg)
            continue
        en, es = sorted(members, key=lambda m: m.language)
        pairs.append(MatchedPair(pair_id=pair_id, en=en, es=es))
        good_pair_ids.add(pair_id)

    kept = [r for r in records if r.pair_id in good_pair_ids]
    # preserve manifest order for records and first-occurrence order for pairs
    order: dict[str, int] = {}
    for i, rec in enumerate(kept):
        order.setdefault(rec.pair_id, i)
    pairs.sort(key=lambda p: order[p.pair_id])
    return pairs, kept


def read_track(
    audio_path: str | Path, channel: int, track_id: str | None = None
) -> AudioTrack:
    """Read one channel of a PCM WAV file (16-bit int or 32-bit float)."""
    audio_path = Path(audio_path)
    if not audio_path.is_file():
        raise AudioError(f"audio file not found: {audio_path}")
    try:
        rate, data = wavfile.read(audio_path)
    except Exception as exc:
        raise AudioError(f"cannot read {audio_path}: {exc}") from exc
    if data.dtype == np.int16:
        scale = 1.0 / 32768.0
    elif data.dtype == np.float32:
        scale = 1.0
    else:
        raise AudioError(
            f"{audio_path}: unsupported encoding {data.dtype}; expected "
            "16-bit PCM or 32-bit float"
        )
    if data.ndim == 1:
        if channel != 0:
            raise AudioError(f"{audio_path}: channel {channel} out of range (mono)")
        mono = data
    else:
        if not 0 <= channel < data.shape[1]:
            raise AudioError(
                f"{audio_path}: channel {channel} out of range "
                f"({data.shape[1]} channels)"
            )
        mono = data[:, channel]
    if mono.size == 0:
        raise AudioError(f"{audio_path}: empty audio")
    if not MIN_SAMPLE_RATE <= rate <= MAX_SAMPLE_RATE:
        raise AudioError(f"{audio_path}: sample rate {rate} outside 16000-48000 Hz")
    samples = mono.astype(np.float64) * scale
    if track_id is None:
        track_id = f"{audio_path.stem}/ch{channel}"
    return AudioTrack(track_id=track_id, samples=samples, sample_rate=rate)


def slice_utterance(track: AudioTrack, rec: UtteranceRecord) -> tuple[int, int]:
    """Half-open sample interval [round(start*rate), round(end*rate))."""
    rate = track.sample_rate
    lo = int(round(rec.start_s * rate))
    hi = int(round(rec.end_s * rate))
    if hi > len(track.samples):
        raise ManifestError(
            f"{rec.utterance_id}: end {rec.end_s:.3f} s beyond track "
            f"{track.track_id} ({track.duration_s:.3f} s)"
        )
    return lo, hi
