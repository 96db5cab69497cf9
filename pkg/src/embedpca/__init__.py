"""PCA compression of sentence embeddings and its retrieval trade-offs."""

__version__ = "0.1.0"
