"""Motion-capture sequence learning toolkit.

Parses C3D marker files, normalizes and windows motion sequences, trains
recurrent encoder / multi-decoder classifiers (semi-supervised via
reconstruction losses), generates key-pose-constrained transitions with
an adversarial recurrent generator, and clusters sequence embeddings.
"""

__version__ = "0.1.0"
