"""Frame-level feature extraction and per-track normalization.

All features share one frame grid: a frame every 10 ms, each covering the
audio from its start time up to the analysis window length (40 ms for pitch
and cepstral analysis, 32 ms for energy, flux, and the syllable envelope).
The grid length is ``floor((duration - 0.040) / 0.010) + 1`` so the longest
window always fits inside the track.

Pitch is a normalized-autocorrelation tracker (60-400 Hz search, voicing
threshold 0.45, running-median octave suppression). CPPS follows the usual
smoothed cepstral-peak-prominence recipe: log power spectrum, real cepstrum,
10-frame x 10-bin smoothing, peak height above a regression line fitted over
1-16.7 ms quefrency. The syllable-rate envelope counts band-energy peaks that
clear 1.5x the local median.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, rfft

from . import _kernels
from .corpus import AudioTrack
from .errors import FeatureError

logger = logging.getLogger(__name__)

FRAME_PERIOD_S = 0.010
PITCH_WINDOW_S = 0.040  # the longest analysis window; defines the frame grid
ENERGY_WINDOW_S = 0.032

F0_MIN_HZ = 60.0
F0_MAX_HZ = 400.0
VOICING_THRESHOLD = 0.45
OCTAVE_MEDIAN_FACTOR = 1.6
OCTAVE_PENALTY = 0.2
FREQ_PREFERENCE = 0.01  # tiny bias toward the higher-frequency of equal peaks
PITCH_HISTORY = 20  # voiced frames feeding the running median

LOG_ENERGY_EPS = 1e-8
ENVELOPE_BAND_HZ = (300.0, 2500.0)
ENVELOPE_SMOOTH_FRAMES = 5  # 50 ms moving average
ENVELOPE_LOCAL_HALF = 50  # +/- 500 ms for the local median and peak count
ENVELOPE_PEAK_FACTOR = 1.5

CPPS_TIME_SMOOTH = 10  # frames
CPPS_QUEF_SMOOTH = 10  # cepstral bins
CPPS_REGRESSION_QUEF_S = (0.001, 1.0 / F0_MIN_HZ)
CPPS_PEAK_QUEF_S = (1.0 / F0_MAX_HZ, 1.0 / F0_MIN_HZ)

SPEECH_ENERGY_PERCENTILE = 25.0

_CHUNK = 2048  # frames processed per FFT batch

FRAME_DUMP_HEADER = (
    "frame_idx,t_s,f0_hz,voicing,log_energy,spectral_flux,cpps_raw,envelope_rate"
)


@dataclass
class FrameSeries:
    """Per-frame low-level features for one track, on the shared 10 ms grid."""

    track_id: str
    sample_rate: int
    frame_period_s: float
    f0_hz: np.ndarray  # NaN where unvoiced
    voicing: np.ndarray
    log_energy: np.ndarray
    spectral_flux: np.ndarray
    cpps_raw: np.ndarray
    envelope_rate: np.ndarray
    env_peak: np.ndarray  # bool; qualified syllable-envelope peaks

    @property
    def n_frames(self) -> int:
        return len(self.log_energy)

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0_hz)

    def frame_center_s(self) -> np.ndarray:
        """Times the frames represent: window midpoints on the shared grid."""
        return np.arange(self.n_frames) * self.frame_period_s + PITCH_WINDOW_S / 2.0


@dataclass
class NormalizedFrameSeries(FrameSeries):
    pitch_z: np.ndarray = None  # z of log2(f0) over the track's voiced frames
    energy_z: np.ndarray = None
    cpps_z: np.ndarray = None
    rate_z: np.ndarray = None
    speech_mask: np.ndarray = None
    degenerate: tuple = ()  # channels whose reference set had no variance


def window_samples(duration_s: float, sample_rate: int) -> int:
    return int(round(duration_s * sample_rate))


def frame_count(n_samples: int, sample_rate: int) -> int:
    w = window_samples(PITCH_WINDOW_S, sample_rate)
    if n_samples < w:
        raise FeatureError(
            f"track too short for analysis: {n_samples} samples at {sample_rate} Hz"
        )
    return int((n_samples - w) * 100 // sample_rate + 1)


def frame_starts(n_frames: int, sample_rate: int) -> np.ndarray:
    """Start sample of each frame: round(t * 0.010 * rate), integer exact."""
    t = np.arange(n_frames, dtype=np.int64)
    return (t * sample_rate + 50) // 100


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def _gather(samples: np.ndarray, starts: np.ndarray, width: int) -> np.ndarray:
    return samples[starts[:, None] + np.arange(width)]


def _mean_filter(x: np.ndarray, before: int, after: int, axis: int = 0) -> np.ndarray:
    """Mean over a window [i-before, i+after], truncated and renormalized at
    the edges. Operates along ``axis``."""
    x = np.moveaxis(x, axis, 0)
    n = x.shape[0]
    cs = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)], axis=0)
    idx = np.arange(n)
    lo = np.maximum(idx - before, 0)
    hi = np.minimum(idx + after + 1, n)
    out = (cs[hi] - cs[lo]) / (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return np.moveaxis(out, 0, axis)


def _window_sum(x: np.ndarray, half: int) -> np.ndarray:
    """Sum over [i-half, i+half], truncated at the edges."""
    n = len(x)
    cs = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return cs[hi] - cs[lo]


# ---------------------------------------------------------------------------
# pitch


def track_pitch(track: AudioTrack) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (f0_hz, voicing). f0 is NaN on unvoiced frames."""
    sr = track.sample_rate
    samples = track.samples
    w = window_samples(PITCH_WINDOW_S, sr)
    n = frame_count(len(samples), sr)
    starts = frame_starts(n, sr)

    lag_lo = max(2, int(math.ceil(sr / F0_MAX_HZ)))
    lag_hi = min(w - 2, int(math.floor(sr / F0_MIN_HZ)))
    nfft = _next_pow2(w + lag_hi + 2)
    taus = np.arange(lag_lo - 1, lag_hi + 2)

    f0 = np.empty(n)
    voicing = np.empty(n)
    hist = np.zeros(PITCH_HISTORY)
    state = np.zeros(2, dtype=np.int64)

    for a in range(0, n, _CHUNK):
        b = min(n, a + _CHUNK)
        frames = _gather(samples, starts[a:b], w)
        frames -= frames.mean(axis=1, keepdims=True)
        spec = rfft(frames, nfft, axis=1)
        acf = irfft(spec * np.conj(spec), nfft, axis=1)[:, taus]
        csum = np.cumsum(frames * frames, axis=1)
        total = csum[:, -1]
        e_head = csum[:, w - 1 - taus]  # energy of x[0 : w - tau]
        e_tail = total[:, None] - csum[:, taus - 1]  # energy of x[tau : w]
        denom = np.sqrt(e_head * e_tail)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(denom > 0.0, acf / denom, 0.0)
        r = np.ascontiguousarray(r)
        f0[a:b], voicing[a:b] = _kernels.pitch_pick(
            r,
            lag_lo,
            float(sr),
            F0_MIN_HZ,
            F0_MAX_HZ,
            VOICING_THRESHOLD,
            FREQ_PREFERENCE,
            OCTAVE_PENALTY,
            OCTAVE_MEDIAN_FACTOR,
            hist,
            state,
        )
    return f0, voicing


# ---------------------------------------------------------------------------
# energy, spectral flux, syllable envelope


def _short_spectra_features(
    samples: np.ndarray, sr: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(log_energy, spectral_flux, band_energy) from 32 ms windows."""
    w = window_samples(ENERGY_WINDOW_S, sr)
    n = frame_count(len(samples), sr)
    starts = frame_starts(n, sr)
    nfft = _next_pow2(w)
    hann = np.hanning(w)
    k_lo = int(math.ceil(ENVELOPE_BAND_HZ[0] * nfft / sr))
    k_hi = int(math.floor(ENVELOPE_BAND_HZ[1] * nfft / sr))

    log_energy = np.empty(n)
    flux = np.empty(n)
    band = np.empty(n)
    prev_spec = None
    for a in range(0, n, _CHUNK):
        b = min(n, a + _CHUNK)
        frames = _gather(samples, starts[a:b], w)
        rms = np.sqrt(np.mean(frames * frames, axis=1))
        log_energy[a:b] = np.log(rms + LOG_ENERGY_EPS)
        mag = np.abs(rfft(frames * hann, nfft, axis=1))
        l1 = np.sum(mag, axis=1)
        norm = mag / np.maximum(l1, 1e-12)[:, None]
        if prev_spec is None:
            flux[a] = 0.0
            d = norm[1:] - norm[:-1]
            flux[a + 1 : b] = np.sqrt(np.sum(d * d, axis=1))
        else:
            d = norm - np.vstack([prev_spec, norm[:-1]])
            flux[a:b] = np.sqrt(np.sum(d * d, axis=1))
        prev_spec = norm[-1]
        band[a:b] = np.sum(mag[:, k_lo : k_hi + 1] ** 2, axis=1)
    return log_energy, flux, band


def _envelope_analysis(
    band_energy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(envelope_rate, qualified_peak_mask, smoothed_envelope)."""
    half_smooth = ENVELOPE_SMOOTH_FRAMES // 2
    env = _mean_filter(
        band_energy, half_smooth, ENVELOPE_SMOOTH_FRAMES - 1 - half_smooth
    )
    n = len(env)
    peaks = np.zeros(n, dtype=bool)
    if n >= 3:
        peaks[1:-1] = (env[:-2] < env[1:-1]) & (env[1:-1] >= env[2:])
    med = _kernels.sliding_median(env, ENVELOPE_LOCAL_HALF)
    qualified = peaks & (env > ENVELOPE_PEAK_FACTOR * med)
    rate = _window_sum(qualified.astype(np.float64), ENVELOPE_LOCAL_HALF) / 1.0
    return rate, qualified, env


def frame_energy_flux(track: AudioTrack) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (log_energy, spectral_flux)."""
    log_energy, flux, _ = _short_spectra_features(track.samples, track.sample_rate)
    return log_energy, flux


def envelope_rate(track: AudioTrack) -> np.ndarray:
    """Per-frame estimated syllable-nucleus rate (peaks per second)."""
    _, _, band = _short_spectra_features(track.samples, track.sample_rate)
    rate, _, _ = _envelope_analysis(band)
    return rate


# ---------------------------------------------------------------------------
# CPPS


def frame_cpps(track: AudioTrack) -> np.ndarray:
    """Per-frame smoothed cepstral peak prominence (dB-like, unnormalized)."""
    sr = track.sample_rate
    samples = track.samples
    w = window_samples(PITCH_WINDOW_S, sr)
    n = frame_count(len(samples), sr)
    starts = frame_starts(n, sr)
    nfft = _next_pow2(w)
    hann = np.hanning(w)

    q_reg_lo = int(round(CPPS_REGRESSION_QUEF_S[0] * sr))
    q_reg_hi = min(int(round(CPPS_REGRESSION_QUEF_S[1] * sr)), nfft // 2)
    q_pk_lo = int(round(CPPS_PEAK_QUEF_S[0] * sr))
    q_pk_hi = min(int(round(CPPS_PEAK_QUEF_S[1] * sr)), nfft // 2)
    q_smooth_before = CPPS_QUEF_SMOOTH // 2 - 1  # [q-4, q+5]
    q_smooth_after = CPPS_QUEF_SMOOTH - 1 - q_smooth_before
    t_before = CPPS_TIME_SMOOTH // 2 - 1  # [t-4, t+5]
    t_after = CPPS_TIME_SMOOTH - 1 - t_before
    q_keep = q_reg_hi + q_smooth_after + 1

    # quefrency regression over fixed bins: precompute the line-fit weights
    xq = np.arange(q_reg_lo, q_reg_hi + 1, dtype=np.float64)
    nx = len(xq)
    sx = xq.sum()
    sxx = (xq * xq).sum()
    det = nx * sxx - sx * sx

    cpps = np.empty(n)
    for a in range(0, n, _CHUNK):
        b = min(n, a + _CHUNK)
        ext_a = max(0, a - t_before)
        ext_b = min(n, b + t_after)
        frames = _gather(samples, starts[ext_a:ext_b], w) * hann
        power = np.abs(rfft(frames, nfft, axis=1)) ** 2
        peak_power = power.max(axis=1)
        floor = peak_power * 1e-12
        with np.errstate(divide="ignore"):
            logp = np.log(power + floor[:, None])
        logp[peak_power == 0.0] = 0.0
        ceps = irfft(logp, nfft, axis=1)[:, :q_keep]
        # time smoothing: window [t-4, t+5] truncated at the track edges;
        # the chunk halo covers exactly the frames those windows can reach.
        # Fixed-width window means (not a running sum) keep the result
        # independent of the chunking.
        smooth_t = np.empty((b - a, q_keep))
        i_lo = max(a, t_before)  # first frame with a full window
        i_hi = min(b, n - t_after)  # one past the last such frame
        if i_lo < i_hi:
            full = np.lib.stride_tricks.sliding_window_view(
                ceps, CPPS_TIME_SMOOTH, axis=0
            ).mean(axis=-1)
            smooth_t[i_lo - a : i_hi - a] = full[i_lo - t_before - ext_a :
                                                 i_hi - t_before - ext_a]
        for i in (*range(a, min(b, i_lo)), *range(max(a, i_hi), b)):
            lo = max(i - t_before, 0)
            hi = min(i + t_after + 1, n)
            smooth_t[i - a] = ceps[lo - ext_a : hi - ext_a].mean(axis=0)
        smooth = _mean_filter(smooth_t, q_smooth_before, q_smooth_after, axis=1)
        # line fit across the regression quefrencies, evaluated at the peak
        y = smooth[:, q_reg_lo : q_reg_hi + 1]
        sy = y.sum(axis=1)
        sxy = y @ xq
        slope = (nx * sxy - sx * sy) / det
        intercept = (sy - slope * sx) / nx
        pk = np.argmax(smooth[:, q_pk_lo : q_pk_hi + 1], axis=1) + q_pk_lo
        peak_val = smooth[np.arange(b - a), pk]
        cpps[a:b] = peak_val - (intercept + slope * pk)
    return cpps


# ---------------------------------------------------------------------------
# composition and normalization


def compute_frame_series(track: AudioTrack) -> FrameSeries:
    """All low-level features on the shared frame grid, one FFT pass each."""
    f0, voicing = track_pitch(track)
    log_energy, flux, band = _short_spectra_features(track.samples, track.sample_rate)
    rate, peaks, _ = _envelope_analysis(band)
    cpps = frame_cpps(track)
    return FrameSeries(
        track_id=track.track_id,
        sample_rate=track.sample_rate,
        frame_period_s=FRAME_PERIOD_S,
        f0_hz=f0,
        voicing=voicing,
        log_energy=log_energy,
        spectral_flux=flux,
        cpps_raw=cpps,
        envelope_rate=rate,
        env_peak=peaks,
    )


def _zscore(
    values: np.ndarray, reference: np.ndarray, name: str, degenerate: list
) -> np.ndarray:
    """z-score ``values`` with population moments of ``reference``."""
    if len(reference) < 2:
        degenerate.append(name)
        return np.zeros_like(values)
    mu = float(np.mean(reference))
    sigma = float(np.std(reference))
    # relative floor: a constant channel can show std ~1e-16 from the mean
    # rounding alone and must still count as degenerate
    if not math.isfinite(sigma) or sigma <= 1e-12 * max(1.0, abs(mu)):
        degenerate.append(name)
        return np.zeros_like(values)
    return (values - mu) / sigma


def normalize_frame_series(fs: FrameSeries) -> NormalizedFrameSeries:
    """Per-track z-normalization of pitch, energy, CPPS, and rate.

    The speech mask (energy above the track's 25th log-energy percentile, or
    voiced) defines the reference frames for all channels except pitch, which
    normalizes over voiced frames only. Channels without variance come back
    as zeros and are listed in ``degenerate``.
    """
    voiced = fs.voiced
    threshold = np.percentile(fs.log_energy, SPEECH_ENERGY_PERCENTILE)
    speech = (fs.log_energy > threshold) | voiced

    degenerate: list[str] = []
    pitch_z = np.full(fs.n_frames, np.nan)
    if voiced.any():
        logf = np.log2(fs.f0_hz[voiced])
        pitch_z[voiced] = _zscore(logf, logf, "pitch", degenerate)
    else:
        degenerate.append("pitch")

    energy_z = _zscore(fs.log_energy, fs.log_energy[speech], "energy", degenerate)
    cpps_z = _zscore(fs.cpps_raw, fs.cpps_raw[speech], "cpps", degenerate)
    rate_z = _zscore(fs.envelope_rate, fs.envelope_rate[speech], "rate", degenerate)
    if degenerate:
        logger.warning(
            "track %s: zero-variance channel(s) normalized to 0: %s",
            fs.track_id,
            ", ".join(degenerate),
        )
    return NormalizedFrameSeries(
        **{k: getattr(fs, k) for k in fs.__dataclass_fields__},
        pitch_z=pitch_z,
        energy_z=energy_z,
        cpps_z=cpps_z,
        rate_z=rate_z,
        speech_mask=speech,
        degenerate=tuple(degenerate),
    )


def dump_frames_csv(fs: FrameSeries, path) -> None:
    """Write the optional per-frame dump (one row per frame)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FRAME_DUMP_HEADER + "\n")
        for i in range(fs.n_frames):
            f0 = fs.f0_hz[i]
            fields = (
                str(i),
                repr(round(i * fs.frame_period_s, 6)),
                "" if math.isnan(f0) else repr(float(f0)),
                repr(float(fs.voicing[i])),
                repr(float(fs.log_energy[i])),
                repr(float(fs.spectral_flux[i])),
                repr(float(fs.cpps_raw[i])),
                repr(float(fs.envelope_rate[i])),
            )
            fh.write(",".join(fields) + "\n")
