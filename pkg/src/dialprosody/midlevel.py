"""Mid-level prosodic features: ten base features over ten proportional spans.

Each utterance becomes a 100-dimensional RawProsodyVector indexed by
``feature * 10 + span``. Base-feature order: intensity, lengthening,
creakiness, speaking rate, pitch highness, pitch lowness, pitch wideness,
pitch narrowness, peak disalignment, CPPS. After all utterances of a track
are computed, each dimension is z-normalized across that track's utterances.

Frames are assigned to spans by rank: frame i of an utterance's n frames
maps to the span containing the fraction (i + 0.5) / n. This matches the
proportional-span intent while guaranteeing every span is non-empty for any
utterance meeting the 0.5 s minimum (a literal frame-center-time rule can
leave the last span empty when an utterance ends flush with its track, since
the frame grid stops one analysis window short of the track end).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .corpus import UtteranceRecord
from .errors import FeatureError
from .frames import FRAME_PERIOD_S, NormalizedFrameSeries

logger = logging.getLogger(__name__)

SPAN_GRID = (
    (0.00, 0.05),
    (0.05, 0.10),
    (0.10, 0.20),
    (0.20, 0.30),
    (0.30, 0.50),
    (0.50, 0.70),
    (0.70, 0.80),
    (0.80, 0.90),
    (0.90, 0.95),
    (0.95, 1.00),
)
N_SPANS = len(SPAN_GRID)

FEATURE_NAMES = (
    "intensity",
    "lengthening",
    "creakiness",
    "speaking_rate",
    "pitch_highness",
    "pitch_lowness",
    "pitch_wideness",
    "pitch_narrowness",
    "peak_disalignment",
    "cpps",
)
N_FEATURES = len(FEATURE_NAMES)
N_DIMS = N_FEATURES * N_SPANS

MIN_DURATION_S = 0.5

CREAK_LOW_F0_FACTOR = 0.6
CREAK_JITTER_THRESHOLD = 0.05
CREAK_VOICING_BAND = (0.25, 0.45)

PITCH_WINDOW_FRAMES = 30  # 300 ms
PITCH_WINDOW_HOP = 10  # 100 ms
PITCH_WINDOW_MIN_VOICED = 15  # 50% of the window

DISALIGN_SEARCH_FRAMES = 20  # +/- 200 ms
DISALIGN_NORM_S = 0.2

FEATURE_CSV_PREFIX = ("utterance_id", "track_id")


def feature_label(index: int) -> str:
    """Canonical label for dimension ``index``, e.g. 0 -> "intensity_p0_5"."""
    if not 0 <= index < N_DIMS:
        raise IndexError(f"feature index out of range: {index}")
    lo, hi = SPAN_GRID[index % N_SPANS]
    return "%s_p%d_%d" % (
        FEATURE_NAMES[index // N_SPANS],
        round(lo * 100),
        round(hi * 100),
    )


def feature_labels() -> tuple:
    return tuple(feature_label(i) for i in range(N_DIMS))


def span_boundaries(duration_s: float) -> list[tuple[float, float]]:
    """The ten span intervals in seconds for an utterance of this duration."""
    if duration_s < MIN_DURATION_S:
        raise FeatureError(
            f"utterance duration {duration_s:.3f}s below minimum {MIN_DURATION_S}s"
        )
    return [(lo * duration_s, hi * duration_s) for lo, hi in SPAN_GRID]


def span_of_fractions(fracs: np.ndarray) -> np.ndarray:
    """Span index for each fraction; half-open bins, the last closed at 1."""
    edges = np.array([hi for _, hi in SPAN_GRID[:-1]])
    return np.searchsorted(edges, fracs, side="right")


@dataclass(frozen=True)
class RawProsodyVector:
    utterance_id: str
    track_id: str
    values: np.ndarray  # shape (100,)


@dataclass(frozen=True)
class ProsodyVector:
    utterance_id: str
    track_id: str
    values: np.ndarray  # shape (100,), per-track z-normalized


@dataclass(frozen=True)
class TrackContext:
    """Track-level reference statistics shared by all utterances of a track."""

    median_f0_hz: float  # NaN if the track has no voiced frames
    flux_ref: float  # median flux over speech frames; NaN if none
    r_ref: float  # median qualified-window pitch range; NaN if none
    window_center_frame: np.ndarray  # float centers of qualified windows
    window_range: np.ndarray  # pitch_z range per qualified window
    pitch_max_frames: np.ndarray  # frame indices of pitch_z local maxima
    creak_score: np.ndarray  # per-frame creak score in [0, 1]
    lengthening_score: np.ndarray  # per-frame max(0, 1 - flux/flux_ref)


def track_context(nfs: NormalizedFrameSeries) -> TrackContext:
    n = nfs.n_frames
    voiced = nfs.voiced
    speech = nfs.speech_mask

    median_f0 = float(np.median(nfs.f0_hz[voiced])) if voiced.any() else math.nan

    flux_speech = nfs.spectral_flux[speech]
    flux_ref = float(np.median(flux_speech)) if len(flux_speech) else math.nan
    lengthening = np.zeros(n)
    if flux_ref > 0.0:  # NaN-safe: comparisons with NaN are False
        lengthening = np.maximum(0.0, 1.0 - nfs.spectral_flux / flux_ref)

    # sliding 300 ms windows at a 100 ms hop, full windows only
    centers = []
    ranges = []
    for start in range(0, n - PITCH_WINDOW_FRAMES + 1, PITCH_WINDOW_HOP):
        seg = nfs.pitch_z[start : start + PITCH_WINDOW_FRAMES]
        ok = ~np.isnan(seg)
        if ok.sum() >= PITCH_WINDOW_MIN_VOICED:
            centers.append(start + PITCH_WINDOW_FRAMES / 2.0)
            vals = seg[ok]
            ranges.append(float(vals.max() - vals.min()))
    window_center = np.array(centers)
    window_range = np.array(ranges)
    r_ref = float(np.median(window_range)) if len(window_range) else math.nan

    # pitch_z local maxima: interior voiced triples only
    pz = nfs.pitch_z
    if n >= 3:
        fin = ~np.isnan(pz)
        mask = (
            fin[1:-1]
            & fin[:-2]
            & fin[2:]
            & (pz[:-2] < pz[1:-1])
            & (pz[1:-1] >= pz[2:])
        )
        pitch_max = np.nonzero(mask)[0] + 1
    else:
        pitch_max = np.array([], dtype=np.int64)

    # creak score, clamped sum of three binary cues
    score = np.zeros(n)
    if not math.isnan(median_f0):
        score += 0.4 * (voiced & (nfs.f0_hz < CREAK_LOW_F0_FACTOR * median_f0))
    lo, hi = CREAK_VOICING_BAND
    score += 0.3 * ((nfs.voicing >= lo) & (nfs.voicing < hi))
    jitter = np.zeros(n, dtype=bool)
    if n >= 2:
        both = voiced[1:] & voiced[:-1]
        with np.errstate(invalid="ignore"):
            rel = np.abs(nfs.f0_hz[1:] - nfs.f0_hz[:-1]) / nfs.f0_hz[1:]
        jitter[1:] = both & (rel > CREAK_JITTER_THRESHOLD)
    score += 0.3 * jitter
    creak = np.clip(score, 0.0, 1.0)

    return TrackContext(
        median_f0_hz=median_f0,
        flux_ref=flux_ref,
        r_ref=r_ref,
        window_center_frame=window_center,
        window_range=window_range,
        pitch_max_frames=pitch_max,
        creak_score=creak,
        lengthening_score=lengthening,
    )


def utterance_frame_range(nfs: NormalizedFrameSeries, rec: UtteranceRecord) -> tuple:
    """Half-open frame-index interval of the utterance within its track."""
    t_lo = max(0, int(math.floor(rec.start_s * 100 + 0.5)))
    t_hi = min(nfs.n_frames, int(math.floor(rec.end_s * 100 + 0.5)))
    if t_hi <= t_lo:
        raise FeatureError(
            f"utterance {rec.utterance_id} has no frames within its track"
        )
    return t_lo, t_hi


def _disalignment(peak_frame: int, pitch_max: np.ndarray) -> float:
    """max(0, delay)/0.2 for the pitch maximum nearest the envelope peak.

    Ties between an earlier and a later maximum prefer the earlier one."""
    if len(pitch_max) == 0:
        return 0.0
    j = int(np.searchsorted(pitch_max, peak_frame))
    best = None
    if j > 0:
        best = pitch_max[j - 1]
    if j < len(pitch_max):
        cand = pitch_max[j]
        if best is None or abs(cand - peak_frame) < abs(best - peak_frame):
            best = cand
    if abs(best - peak_frame) > DISALIGN_SEARCH_FRAMES:
        return 0.0
    delay_s = (best - peak_frame) * FRAME_PERIOD_S
    return max(0.0, delay_s) / DISALIGN_NORM_S


def utterance_raw_vector(
    nfs: NormalizedFrameSeries, rec: UtteranceRecord, ctx: TrackContext = None
) -> RawProsodyVector:
    """The 100-dimensional raw prosody vector of one utterance."""
    if ctx is None:
        ctx = track_context(nfs)
    t_lo, t_hi = utterance_frame_range(nfs, rec)
    n = t_hi - t_lo
    spans = span_of_fractions((np.arange(n) + 0.5) / n)

    values = np.zeros(N_DIMS)
    sl = slice(t_lo, t_hi)
    energy = nfs.energy_z[sl]
    cpps = nfs.cpps_z[sl]
    rate = nfs.rate_z[sl]
    speech = nfs.speech_mask[sl]
    pitch = nfs.pitch_z[sl]
    lengthening = ctx.lengthening_score[sl]
    creak = ctx.creak_score[sl]
    peaks = nfs.env_peak[sl]
    pitch_pos = np.where(np.isnan(pitch), 0.0, np.maximum(0.0, pitch))
    pitch_neg = np.where(np.isnan(pitch), 0.0, np.maximum(0.0, -pitch))

    for s in range(N_SPANS):
        in_span = spans == s
        if not in_span.any():
            raise FeatureError(
                f"utterance {rec.utterance_id}: span {s} contains no frames"
            )
        sp = in_span & speech
        values[0 * N_SPANS + s] = energy[in_span].mean()
        values[1 * N_SPANS + s] = lengthening[sp].mean() if sp.any() else 0.0
        values[2 * N_SPANS + s] = creak[in_span].mean()
        values[3 * N_SPANS + s] = rate[in_span].mean()
        values[4 * N_SPANS + s] = pitch_pos[in_span].mean()
        values[5 * N_SPANS + s] = pitch_neg[in_span].mean()
        values[9 * N_SPANS + s] = cpps[sp].mean() if sp.any() else 0.0

        peak_frames = np.nonzero(in_span & peaks)[0] + t_lo
        if len(peak_frames):
            values[8 * N_SPANS + s] = float(
                np.mean(
                    [_disalignment(p, ctx.pitch_max_frames) for p in peak_frames]
                )
            )

    # wideness / narrowness from track-wide windows whose centers fall in
    # the utterance, mapped to spans by center time
    if len(ctx.window_center_frame) and ctx.r_ref > 0.0:
        center_s = ctx.window_center_frame * FRAME_PERIOD_S
        inside = (center_s >= rec.start_s) & (center_s < rec.end_s)
        if inside.any():
            frac = (center_s[inside] - rec.start_s) / rec.duration_s
            wspans = span_of_fractions(frac)
            wide = np.maximum(0.0, ctx.window_range[inside] - ctx.r_ref) / ctx.r_ref
            narrow = np.maximum(0.0, ctx.r_ref - ctx.window_range[inside]) / ctx.r_ref
            for s in range(N_SPANS):
                m = wspans == s
                if m.any():
                    values[6 * N_SPANS + s] = wide[m].mean()
                    values[7 * N_SPANS + s] = narrow[m].mean()

    if not np.all(np.isfinite(values)):
        raise FeatureError(
            f"utterance {rec.utterance_id}: non-finite feature values"
        )
    return RawProsodyVector(
        utterance_id=rec.utterance_id, track_id=nfs.track_id, values=values
    )


def corpus_moments(raws: list[RawProsodyVector]) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension (mean, population std) across all raw vectors."""
    mat = np.stack([r.values for r in raws])
    return mat.mean(axis=0), mat.std(axis=0)


def znormalize_track(
    raws: list[RawProsodyVector], corpus: tuple = None
) -> tuple[list[ProsodyVector], dict]:
    """z-normalize each dimension across one track's utterances.

    Zero-variance dimensions map to 0. A single-utterance track falls back
    to the supplied corpus-level moments. Returns (vectors, flags) where
    flags records the degenerate dimensions and whether the fallback fired.
    """
    if not raws:
        raise FeatureError("znormalize_track requires at least one vector")
    track_ids = {r.track_id for r in raws}
    if len(track_ids) > 1:
        raise FeatureError(f"vectors from multiple tracks: {sorted(track_ids)}")

    mat = np.stack([r.values for r in raws])
    flags = {"corpus_fallback": False, "zero_variance_dims": ()}
    if len(raws) == 1:
        if corpus is None:
            raise FeatureError(
                "single-utterance track requires corpus-level moments"
            )
        mean, std = corpus
        flags["corpus_fallback"] = True
    else:
        mean = mat.mean(axis=0)
        std = mat.std(axis=0)

    # relative floor: a constant dimension can show std ~1e-16 from the mean
    # rounding alone and must still count as zero-variance
    degenerate = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    safe = np.where(degenerate, 1.0, std)
    z = (mat - mean) / safe
    z[:, degenerate] = 0.0
    if degenerate.any():
        flags["zero_variance_dims"] = tuple(int(i) for i in np.nonzero(degenerate)[0])
        logger.warning(
            "track %s: %d zero-variance dimension(s) normalized to 0",
            raws[0].track_id,
            int(degenerate.sum()),
        )
    vectors = [
        ProsodyVector(utterance_id=r.utterance_id, track_id=r.track_id, values=z[i])
        for i, r in enumerate(raws)
    ]
    return vectors, flags


def znormalize_corpus(raws: list[RawProsodyVector]) -> tuple[list[ProsodyVector], dict]:
    """Group raw vectors by track and z-normalize each track.

    Output preserves the input order. Returns (vectors, flags_by_track)."""
    by_track: dict[str, list[RawProsodyVector]] = {}
    for r in raws:
        by_track.setdefault(r.track_id, []).append(r)
    moments = corpus_moments(raws)
    out: dict[str, ProsodyVector] = {}
    flags_by_track = {}
    for tid, group in by_track.items():
        vectors, flags = znormalize_track(group, corpus=moments)
        flags_by_track[tid] = flags
        for v in vectors:
            out[v.utterance_id] = v
    return [out[r.utterance_id] for r in raws], flags_by_track


def write_features_csv(vectors, path) -> None:
    """Feature CSV: utterance_id, track_id, then the 100 labeled dimensions."""
    header = ",".join(FEATURE_CSV_PREFIX + feature_labels())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for v in vectors:
            row = [v.utterance_id, v.track_id]
            row.extend(repr(float(x)) for x in v.values)
            fh.write(",".join(row) + "\n")


def read_features_csv(path) -> list[ProsodyVector]:
    expected = FEATURE_CSV_PREFIX + feature_labels()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if tuple(header.split(",")) != expected:
            raise FeatureError(f"unexpected feature CSV header in {path}")
        vectors = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(expected):
                raise FeatureError(f"{path}:{lineno}: expected {len(expected)} fields")
            try:
                values = np.array([float(x) for x in parts[2:]])
            except ValueError as exc:
                raise FeatureError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(values)):
                raise FeatureError(f"{path}:{lineno}: non-finite feature value")
            vectors.append(
                ProsodyVector(
                    utterance_id=parts[0], track_id=parts[1], values=values
                )
            )
    return vectors
