"""Visual concept networks for out-of-distribution detection.

Object detections become vocabulary-indexed weighted graphs, graphs become
fixed-length embeddings, and embeddings are scored by supervised,
one-class and Mahalanobis detectors.
"""

__version__ = "0.1.0"
