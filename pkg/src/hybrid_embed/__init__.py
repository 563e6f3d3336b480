"""Multi-task hybrid contrastive training for text embeddings at desk scale."""

__version__ = "0.1.0"
