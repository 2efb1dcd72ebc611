"""Reference adapter between a DiT-style model and the layout pipeline.

File-based exchange only: ``capture`` writes ATNB attention bundles from a
truncated pre-generation pass; ``regenerate`` reads an NGDF guidance field
and applies it inside the model's cross-attention.
"""

from .adapter import (
    HookConfig,
    apply_field_to_scores,
    capture,
    generate,
    regenerate,
)
from .model import ToyVideoDiT, tokenize

__version__ = "0.1.0"

__all__ = [
    "HookConfig",
    "ToyVideoDiT",
    "apply_field_to_scores",
    "capture",
    "generate",
    "regenerate",
    "tokenize",
]
