"""Pause-token speech classification benchmark.

Turns word-timed transcripts into pause-annotated token streams, stores
embedding matrices in a small binary format, and trains an attention
classifier over them with stratified cross-validation — plus a synthetic
cohort generator so the whole pipeline is testable without clinical data.
"""

__version__ = "0.1.0"
