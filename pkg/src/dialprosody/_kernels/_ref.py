"""Pure-numpy fallbacks for the compiled kernels.

Kept semantically identical to ``_speedups.pyx``: same candidate rules, same
arithmetic expressions, same median definition, so both backends produce the
same numbers on the same inputs.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def pitch_pick(
    r: np.ndarray,
    lag_lo: int,
    sr: float,
    f_lo: float,
    f_hi: float,
    voicing_threshold: float,
    freq_pref: float,
    octave_penalty: float,
    octave_factor: float,
    hist: np.ndarray,
    state: np.ndarray,
):
    """Select one pitch candidate per frame from a normalized ACF matrix.

    ``r`` has one column per lag ``lag_lo - 1 .. lag_hi + 1``; candidates are
    interior local maxima, refined by parabolic interpolation, scored by peak
    height plus a small high-frequency preference, and penalized when they
    exceed ``octave_factor`` times the running median of recent voiced frames
    (``hist`` is a ring buffer carried across calls via ``state``).

    Returns ``(f0, voicing)``; ``f0`` is NaN where voicing falls below the
    threshold or no candidate exists.
    """
    n, width = r.shape
    f0 = np.full(n, np.nan)
    voic = np.zeros(n)
    cnt = int(state[0])
    pos = int(state[1])
    cap = len(hist)

    inner = r[:, 1:-1]
    cand_mask = (r[:, :-2] < inner) & (inner >= r[:, 2:])
    rows, cols = np.nonzero(cand_mask)

    i = 0
    m = len(rows)
    while i < m:
        frame = rows[i]
        j = i
        while j < m and rows[j] == frame:
            j += 1
        if cnt > 0:
            med = _median(np.sort(hist[:cnt] if cnt < cap else hist))
        else:
            med = 0.0
        best_score = -math.inf
        best_f = math.nan
        best_h = 0.0
        for k in range(i, j):
            c = cols[k] + 1
            rm = float(r[frame, c - 1])
            rc = float(r[frame, c])
            rp = float(r[frame, c + 1])
            denom = rm - 2.0 * rc + rp
            if denom < 0.0:
                delta = 0.5 * (rm - rp) / denom
                if delta > 0.5:
                    delta = 0.5
                elif delta < -0.5:
                    delta = -0.5
            else:
                delta = 0.0
            h = rc - 0.25 * (rm - rp) * delta
            tau = (lag_lo - 1 + c) + delta
            f = sr / tau
            if f < f_lo:
                f = f_lo
            elif f > f_hi:
                f = f_hi
            score = h + freq_pref * math.log2(f / f_hi)
            if cnt > 0 and f > octave_factor * med:
                score -= octave_penalty
            if score > best_score:
                best_score = score
                best_f = f
                best_h = h
        if best_score > -math.inf:
            v = best_h
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            voic[frame] = v
            if v >= voicing_threshold:
                f0[frame] = best_f
                hist[pos] = best_f
                pos = (pos + 1) % cap
                if cnt < cap:
                    cnt += 1
        i = j

    state[0] = cnt
    state[1] = pos
    return f0, voic


def _median(sorted_vals: np.ndarray) -> float:
    k = len(sorted_vals)
    if k % 2:
        return float(sorted_vals[k // 2])
    return (float(sorted_vals[k // 2 - 1]) + float(sorted_vals[k // 2])) / 2.0


def sliding_median(x: np.ndarray, half: int) -> np.ndarray:
    """Median of ``x`` over a window of ``half`` elements to each side,
    truncated at the array edges."""
    n = len(x)
    width = 2 * half + 1
    out = np.empty(n)
    if n >= width:
        out[half : n - half] = np.median(sliding_window_view(x, width), axis=1)
        for t in range(half):
            out[t] = np.median(x[: t + half + 1])
        for t in range(n - half, n):
            out[t] = np.median(x[t - half :])
    else:
        for t in range(n):
            out[t] = np.median(x[max(0, t - half) : t + half + 1])
    return out
