"""Shared fixtures: synthetic signals, planted frame series, a tiny corpus."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.io import wavfile
from scipy.signal import lfilter

from dialprosody.corpus import AudioTrack, load_manifest
from dialprosody.frames import NormalizedFrameSeries

SR = 16000

MANIFEST_HEADER = (
    "utterance_id,pair_id,language,speaker_id,conversation_id,"
    "audio_path,channel,start_s,end_s"
)


# ---------------------------------------------------------------------------
# signal builders


def harmonic(dur, f0, sr=SR, vibrato=0.0, vibrato_hz=1.0, noise=0.0,
             amp=0.2, seed=0, n_harmonics=3, am_hz=0.0):
    """Synthetic voiced signal with optional vibrato, AM, and noise floor."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(dur * sr)) / sr
    track = f0 * (1.0 + vibrato * np.sin(2 * np.pi * vibrato_hz * t))
    phase = 2 * np.pi * np.cumsum(track) / sr
    x = np.zeros_like(t)
    for h in range(1, n_harmonics + 1):
        x += np.sin(h * phase) / h
    if am_hz > 0.0:
        x *= 0.35 + 0.65 * np.abs(np.sin(np.pi * am_hz * t)) ** 2
    x = amp * x / np.max(np.abs(x))
    if noise > 0.0:
        x = x + noise * rng.standard_normal(len(t))
    return x


def am_tone(dur, carrier, rate, sr=SR, amp=0.3):
    t = np.arange(int(dur * sr)) / sr
    return amp * (0.55 + 0.45 * np.sin(2 * np.pi * rate * t)) * np.sin(
        2 * np.pi * carrier * t
    )


def pulse_train(dur, f0, sr=SR, rms=0.1):
    n = int(dur * sr)
    x = np.zeros(n)
    x[:: round(sr / f0)] = 1.0
    x = lfilter([1.0], [1.0, -1.6, 0.72], x)  # crude glottal shaping
    return rms * x / np.sqrt(np.mean(x * x))


def white_noise(dur, sr=SR, rms=0.1, seed=1):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(int(dur * sr))
    return rms * x / np.sqrt(np.mean(x * x))


def make_track(samples, sr=SR, track_id="conv/spk/ch0"):
    return AudioTrack(track_id=track_id, samples=np.asarray(samples, dtype=np.float64),
                      sample_rate=sr)


# ---------------------------------------------------------------------------
# planted frame series


def planted_nfs(n, track_id="conv/spk/ch0", **overrides):
    """A NormalizedFrameSeries with quiet defaults, overridable per field."""
    fields = dict(
        track_id=track_id,
        sample_rate=SR,
        frame_period_s=0.010,
        f0_hz=np.full(n, np.nan),
        voicing=np.zeros(n),
        log_energy=np.zeros(n),
        spectral_flux=np.zeros(n),
        cpps_raw=np.zeros(n),
        envelope_rate=np.zeros(n),
        env_peak=np.zeros(n, dtype=bool),
        pitch_z=np.full(n, np.nan),
        energy_z=np.zeros(n),
        cpps_z=np.zeros(n),
        rate_z=np.zeros(n),
        speech_mask=np.ones(n, dtype=bool),
        degenerate=(),
    )
    fields.update(overrides)
    return NormalizedFrameSeries(**fields)


# ---------------------------------------------------------------------------
# tiny corpus on disk


SPEAKER_F0 = {"alice": 210.0, "bob": 120.0, "carol": 180.0, "dan": 105.0}
CONVERSATIONS = {"c1": ("alice", "bob"), "c2": ("carol", "dan")}
PAIRS_PER_SPEAKER = 3
TRACK_SECONDS = 16


def build_corpus(root, seed=42, sr=SR):
    """Write WAVs + manifest for a small two-conversation bilingual corpus.

    Layout mirrors the real data: per conversation and language one stereo
    file, one speaker per channel, each re-enacting the same numbered pairs
    in both languages."""
    rng = np.random.default_rng(seed)
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for conv, speakers in CONVERSATIONS.items():
        for lang in ("EN", "ES"):
            audio = np.zeros((TRACK_SECONDS * sr, 2))
            for ch, spk in enumerate(speakers):
                t0 = 0.5 + 0.25 * ch
                for k in range(PAIRS_PER_SPEAKER):
                    pair_id = f"{conv}_{ch * PAIRS_PER_SPEAKER + k + 1}"
                    dur = 0.8 + 0.37 * ((ch + k) % 4)
                    f0 = SPEAKER_F0[spk] + (12.0 if lang == "ES" else 0.0)
                    seg = harmonic(
                        dur,
                        f0 * (1.0 + 0.05 * k),
                        sr=sr,
                        vibrato=0.06,
                        vibrato_hz=0.8 + 0.4 * k,
                        noise=0.004,
                        amp=0.2 + 0.03 * k,
                        seed=int(rng.integers(1 << 31)),
                        am_hz=3.5 + 0.8 * k,
                    )
                    a = round(t0 * sr)
                    audio[a : a + len(seg), ch] = seg
                    uid = f"{lang}_{pair_id}"
                    rows.append(
                        f"{uid},{pair_id},{lang},{spk},{lang}_{conv},"
                        f"audio/{lang}_{conv}.wav,{ch},{t0:.3f},{t0 + dur:.3f}"
                    )
                    t0 += dur + 0.9
                assert t0 <= TRACK_SECONDS
            wavfile.write(
                audio_dir / f"{lang}_{conv}.wav",
                sr,
                np.clip(audio * 32767, -32768, 32767).astype(np.int16),
            )
    manifest_path = root / "manifest.csv"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write(MANIFEST_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    return manifest_path


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    build_corpus(root)
    return root


@pytest.fixture(scope="session")
def corpus_manifest(corpus_dir):
    return load_manifest(corpus_dir / "manifest.csv")


@pytest.fixture(scope="session")
def corpus_vectors(corpus_dir, corpus_manifest):
    from dialprosody.pipeline import extract_features

    vectors, flags = extract_features(corpus_manifest, corpus_dir)
    return vectors
