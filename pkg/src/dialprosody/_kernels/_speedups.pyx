# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: pitch-candidate selection and sliding median.

Mirrors ``_ref.py`` operation for operation; any change here must be made
there as well (the test suite compares both backends).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, NAN, log2
from libc.string cimport memmove

cnp.import_array()


cdef double _median_sorted(double* buf, Py_ssize_t k) noexcept nogil:
    if k % 2:
        return buf[k // 2]
    return (buf[k // 2 - 1] + buf[k // 2]) / 2.0


cdef void _insertion_sort(double* buf, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(1, k):
        v = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > v:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = v


def pitch_pick(double[:, ::1] r, Py_ssize_t lag_lo, double sr,
               double f_lo, double f_hi, double voicing_threshold,
               double freq_pref, double octave_penalty, double octave_factor,
               double[::1] hist, long long[::1] state):
    """See ``_ref.pitch_pick``."""
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t width = r.shape[1]
    cdef Py_ssize_t cap = hist.shape[0]
    cdef Py_ssize_t cnt = state[0]
    cdef Py_ssize_t pos = state[1]

    f0_arr = np.full(n, np.nan)
    voic_arr = np.zeros(n)
    cdef double[::1] f0 = f0_arr
    cdef double[::1] voic = voic_arr

    cdef double scratch[64]
    cdef Py_ssize_t i, c, k
    cdef double med, best_score, best_f, best_h
    cdef double rm, rc, rp, denom, delta, h, tau, f, score, v
    cdef bint found

    if cap > 64:
        raise ValueError("pitch history capacity limited to 64")

    with nogil:
        for i in range(n):
            med = 0.0
            if cnt > 0:
                for k in range(cnt):
                    scratch[k] = hist[k]
                _insertion_sort(scratch, cnt)
                med = _median_sorted(scratch, cnt)
            best_score = -INFINITY
            best_f = NAN
            best_h = 0.0
            found = False
            for c in range(1, width - 1):
                rm = r[i, c - 1]
                rc = r[i, c]
                rp = r[i, c + 1]
                if rm < rc and rc >= rp:
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
                    score = h + freq_pref * log2(f / f_hi)
                    if cnt > 0 and f > octave_factor * med:
                        score -= octave_penalty
                    if score > best_score:
                        best_score = score
                        best_f = f
                        best_h = h
                        found = True
            if found:
                v = best_h
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                voic[i] = v
                if v >= voicing_threshold:
                    f0[i] = best_f
                    hist[pos] = best_f
                    pos = (pos + 1) % cap
                    if cnt < cap:
                        cnt += 1

    state[0] = cnt
    state[1] = pos
    return f0_arr, voic_arr


def sliding_median(double[::1] x, Py_ssize_t half):
    """See ``_ref.sliding_median``."""
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n)
    win_arr = np.empty(2 * half + 1)
    cdef double[::1] out = out_arr
    cdef double[::1] win = win_arr
    cdef Py_ssize_t m = 0          # current window size
    cdef Py_ssize_t lo = 0, hi = -1  # inclusive source bounds of the window
    cdef Py_ssize_t t, new_lo, new_hi, p, q
    cdef double val

    with nogil:
        for t in range(n):
            new_lo = t - half if t - half > 0 else 0
            new_hi = t + half if t + half < n - 1 else n - 1
            # evict before inserting so the window never exceeds capacity
            while lo < new_lo:
                val = x[lo]
                lo += 1
                q = _lower_bound(&win[0], m, val)
                # val is guaranteed present at q
                if q < m - 1:
                    memmove(&win[q], &win[q + 1], (m - 1 - q) * sizeof(double))
                m -= 1
            while hi < new_hi:
                hi += 1
                val = x[hi]
                p = _lower_bound(&win[0], m, val)
                if p < m:
                    memmove(&win[p + 1], &win[p], (m - p) * sizeof(double))
                win[p] = val
                m += 1
            out[t] = _median_sorted(&win[0], m)
    return out_arr


cdef Py_ssize_t _lower_bound(double* buf, Py_ssize_t m, double val) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = m, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if buf[mid] < val:
            lo = mid + 1
        else:
            hi = mid
    return lo
