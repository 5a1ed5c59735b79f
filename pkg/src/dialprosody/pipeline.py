"""Extraction pipeline: manifest + audio in, ProsodyVector features out.

Each track is read once; its utterances share one NormalizedFrameSeries and
TrackContext. Tracks may be processed in parallel (``jobs``); results are
assembled in manifest order and z-normalized per track afterwards, so the
output is byte-identical at any parallelism level.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import frames, midlevel
from .corpus import CorpusManifest, read_track, slice_utterance
from .errors import ManifestError

logger = logging.getLogger(__name__)


def _track_jobs(manifest: CorpusManifest, audio_root, dump_dir):
    """Group manifest records by track; validate path/channel consistency."""
    jobs = {}
    for rec in manifest.records:
        key = rec.track_id
        if key in jobs:
            job = jobs[key]
            if job["rel_path"] != rec.audio_path or job["channel"] != rec.channel:
                raise ManifestError(
                    f"track {key} maps to conflicting audio sources "
                    f"({job['rel_path']}:{job['channel']} vs "
                    f"{rec.audio_path}:{rec.channel})"
                )
            job["records"].append(rec)
        else:
            jobs[key] = {
                "track_id": key,
                "rel_path": rec.audio_path,
                "audio_path": str(Path(audio_root) / rec.audio_path),
                "channel": rec.channel,
                "records": [rec],
                "dump_path": (
                    str(Path(dump_dir) / (key.replace("/", "__") + ".csv"))
                    if dump_dir is not None
                    else None
                ),
            }
    return list(jobs.values())


def _extract_track(job: dict):
    """Raw vectors for every utterance of one track. Runs in workers."""
    track = read_track(job["audio_path"], job["channel"], track_id=job["track_id"])
    for rec in job["records"]:
        slice_utterance(track, rec)  # bounds validation only
    nfs = frames.normalize_frame_series(frames.compute_frame_series(track))
    if job["dump_path"] is not None:
        frames.dump_frames_csv(nfs, job["dump_path"])
    ctx = midlevel.track_context(nfs)
    raws = [midlevel.utterance_raw_vector(nfs, rec, ctx) for rec in job["records"]]
    return job["track_id"], raws, nfs.degenerate


def extract_features(
    manifest: CorpusManifest, audio_root, jobs: int = 1, dump_dir=None
):
    """ProsodyVectors for every manifest record, in manifest order.

    Returns (vectors, flags_by_track) where flags carry the z-normalization
    degeneracies per track."""
    if dump_dir is not None:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
    track_jobs = _track_jobs(manifest, audio_root, dump_dir)

    if jobs > 1 and len(track_jobs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_track, track_jobs))
    else:
        results = [_extract_track(j) for j in track_jobs]

    raw_by_uid = {}
    for track_id, raws, degenerate in results:
        if degenerate:
            logger.warning(
                "track %s: degenerate frame channel(s): %s",
                track_id,
                ", ".join(degenerate),
            )
        for raw in raws:
            raw_by_uid[raw.utterance_id] = raw
    ordered = [raw_by_uid[rec.utterance_id] for rec in manifest.records]
    return midlevel.znormalize_corpus(ordered)
