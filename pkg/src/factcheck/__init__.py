"""Two-stage claim checking over a knowledge base of verified explanations.

Stage A retrieves candidate explanations for a claim by cosine similarity
over cached sentence embeddings; stage B scores the claim by averaging
per-candidate alignment probabilities from a verifier model.
"""

from factcheck.errors import (
    CheckpointError,
    ConfigError,
    CorpusError,
    EncoderError,
    FactCheckError,
    IndexFileError,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "ConfigError",
    "CorpusError",
    "EncoderError",
    "FactCheckError",
    "IndexFileError",
    "__version__",
]
