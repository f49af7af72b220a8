"""The special-token registry shared with the classifier pipeline.

These fourteen literals are the complete vocabulary of inserted tokens: one
token per pause bin across the four binning schemes, plus the disfluency
marker. The classifier side maintains the same table; the two packages
exchange only files, so the registry is duplicated here by design and pinned
by a string-set equality test.
"""

from __future__ import annotations

PAUSE_TOKENS: tuple[str, ...] = (
    "[P1.1]", "[P1.2]", "[P1.3]",
    "[P2.1]", "[P2.2]", "[P2.3]", "[P2.4]", "[P2.5]", "[P2.6]",
    "[P3.1]", "[P3.2]", "[P3.3]",
    "[P]",
)

DISFLUENCY_TOKEN = "[*]"

SPECIAL_TOKENS: tuple[str, ...] = PAUSE_TOKENS + (DISFLUENCY_TOKEN,)

__all__ = ["PAUSE_TOKENS", "DISFLUENCY_TOKEN", "SPECIAL_TOKENS"]
