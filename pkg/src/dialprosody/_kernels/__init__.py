"""Kernel backend selection.

Imports the compiled extension when available, otherwise the numpy fallback.
Set ``DIALPROSODY_PURE=1`` to force the fallback (useful for benchmarking and
for debugging the compiled path).
"""

import os

if os.environ.get("DIALPROSODY_PURE", "") not in ("", "0"):
    from . import _ref as _impl

    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _ref as _impl

        BACKEND = "python"

pitch_pick = _impl.pitch_pick
sliding_median = _impl.sliding_median

__all__ = ["BACKEND", "pitch_pick", "sliding_median"]
