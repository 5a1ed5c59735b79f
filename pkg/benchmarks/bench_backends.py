#!/usr/bin/env python3
"""Compare the compiled kernel backend against the pure-numpy fallback.

Runs two levels of comparison:

* microbenchmarks of the two kernels (``pitch_pick``, ``sliding_median``)
  on identical inputs, checking that both backends return bitwise-identical
  results, and
* an end-to-end ``dialprosody extract`` over a small synthetic corpus in
  subprocesses, once per backend (the fallback is forced with
  ``DIALPROSODY_PURE=1``), checking that the feature CSVs are byte-identical.

Usage: python3 benchmarks/bench_backends.py
"""

import math
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from dialprosody import frames
from dialprosody._kernels import _ref

try:
    from dialprosody._kernels import _speedups
except ImportError:  # pragma: no cover - built by the normal install
    _speedups = None

SR = 16000
REPEATS = 3

# subprocess output lands on the terminal unbuffered; keep ours in step
sys.stdout.reconfigure(line_buffering=True)


def best_of(fn, repeats=REPEATS):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def synthetic_acf(n_frames, lag_lo, lag_hi, seed=0):
    """Normalized-ACF-like matrix: noise plus one drifting periodicity peak."""
    rng = np.random.default_rng(seed)
    width = lag_hi - lag_lo + 3
    lags = np.arange(lag_lo - 1, lag_hi + 2, dtype=float)
    t = np.arange(n_frames)
    centers = 120.0 + 40.0 * np.sin(2.0 * np.pi * t / 500.0)
    r = rng.uniform(0.0, 0.15, (n_frames, width))
    r += 0.85 * np.exp(-((lags[None, :] - centers[:, None]) ** 2) / 18.0)
    return np.ascontiguousarray(r)


def run_pitch_pick(impl, r, lag_lo):
    hist = np.zeros(frames.PITCH_HISTORY)
    state = np.zeros(2, dtype=np.int64)
    return impl.pitch_pick(
        r,
        lag_lo,
        float(SR),
        frames.F0_MIN_HZ,
        frames.F0_MAX_HZ,
        frames.VOICING_THRESHOLD,
        frames.FREQ_PREFERENCE,
        frames.OCTAVE_PENALTY,
        frames.OCTAVE_MEDIAN_FACTOR,
        hist,
        state,
    )


def micro_pitch_pick():
    lag_lo = max(2, int(math.ceil(SR / frames.F0_MAX_HZ)))
    lag_hi = min(
        frames.window_samples(frames.PITCH_WINDOW_S, SR) - 2,
        int(math.floor(SR / frames.F0_MIN_HZ)),
    )
    r = synthetic_acf(6000, lag_lo, lag_hi)  # one minute of frames

    t_ref, (f0_ref, v_ref) = best_of(lambda: run_pitch_pick(_ref, r, lag_lo))
    print(f"pitch_pick      python   {t_ref * 1e3:8.1f} ms")
    if _speedups is None:
        print("pitch_pick      cython   (extension not built)")
        return
    t_cy, (f0_cy, v_cy) = best_of(lambda: run_pitch_pick(_speedups, r, lag_lo))
    same = np.array_equal(f0_ref, f0_cy, equal_nan=True) and np.array_equal(
        v_ref, v_cy
    )
    print(
        f"pitch_pick      cython   {t_cy * 1e3:8.1f} ms"
        f"   speedup x{t_ref / t_cy:5.1f}   identical={same}"
    )


def micro_sliding_median():
    rng = np.random.default_rng(1)
    x = np.abs(np.cumsum(rng.normal(0, 0.1, 360_000)))  # one hour of frames
    half = frames.ENVELOPE_LOCAL_HALF

    t_ref, m_ref = best_of(lambda: _ref.sliding_median(x, half))
    print(f"sliding_median  python   {t_ref * 1e3:8.1f} ms")
    if _speedups is None:
        print("sliding_median  cython   (extension not built)")
        return
    t_cy, m_cy = best_of(lambda: _speedups.sliding_median(x, half))
    same = np.array_equal(m_ref, m_cy)
    print(
        f"sliding_median  cython   {t_cy * 1e3:8.1f} ms"
        f"   speedup x{t_ref / t_cy:5.1f}   identical={same}"
    )


def build_corpus(root):
    """One matched pair: two 60 s mono tracks, four utterances each."""
    audio_dir = root / "audio"
    audio_dir.mkdir()
    rows = [
        "utterance_id,pair_id,language,speaker_id,conversation_id,"
        "audio_path,channel,start_s,end_s"
    ]
    t = np.arange(60 * SR) / SR
    rng = np.random.default_rng(7)
    for lang, f0 in (("EN", 120.0), ("ES", 180.0)):
        phase = 2.0 * np.pi * np.cumsum(
            np.full(t.size, f0) * (1.0 + 0.05 * np.sin(2.0 * np.pi * 0.4 * t))
        ) / SR
        audio = 0.2 * (np.sin(phase) + 0.5 * np.sin(2 * phase))
        audio *= 0.6 + 0.4 * np.sin(2.0 * np.pi * 3.5 * t)
        audio += 0.005 * rng.standard_normal(t.size)
        wavfile.write(
            audio_dir / f"{lang}.wav",
            SR,
            np.clip(audio * 32767, -32768, 32767).astype(np.int16),
        )
        for u, (a, b) in enumerate([(2, 4), (15, 17.5), (30, 31.5), (50, 52)]):
            rows.append(
                f"{lang}_p{u},p{u},{lang},spk_{lang.lower()},{lang}_conv,"
                f"audio/{lang}.wav,0,{a},{b}"
            )
    (root / "manifest.csv").write_text("\n".join(rows) + "\n")


def end_to_end():
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        build_corpus(root)
        outputs = {}
        for backend, pure in (("cython", "0"), ("python", "1")):
            out = root / f"features_{backend}.csv"
            env = dict(os.environ, DIALPROSODY_PURE=pure)
            start = time.perf_counter()
            subprocess.run(
                [
                    sys.executable,
                    "-m",
                    "dialprosody.cli",
                    "extract",
                    "--manifest",
                    str(root / "manifest.csv"),
                    "--audio-root",
                    str(root),
                    "--out",
                    str(out),
                ],
                env=env,
                check=True,
            )
            elapsed = time.perf_counter() - start
            outputs[backend] = out.read_bytes()
            print(f"extract (2 min corpus)  {backend:6s}  {elapsed:6.2f} s")
        same = outputs["cython"] == outputs["python"]
        print(f"extract outputs byte-identical: {same}")


def main():
    print("kernel microbenchmarks (best of %d)" % REPEATS)
    micro_pitch_pick()
    micro_sliding_median()
    print()
    print("end-to-end extraction (subprocess per backend)")
    end_to_end()


if __name__ == "__main__":
    main()
