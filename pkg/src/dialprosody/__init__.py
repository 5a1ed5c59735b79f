"""dialprosody: prosodic representations and dissimilarity for dialog speech.

Computes 100-dimensional prosodic feature vectors (ten base features over
ten proportional spans) from dialog utterances, measures prosodic
dissimilarity between utterances, correlates prosody across matched
bilingual utterance pairs, and provides baseline prosody-transfer models.
"""

__version__ = "0.1.0"

from .errors import (
    AudioError,
    DataError,
    FeatureError,
    ManifestError,
    SplitConstraintError,
)

__all__ = [
    "AudioError",
    "DataError",
    "FeatureError",
    "ManifestError",
    "SplitConstraintError",
    "__version__",
]
