"""HTTP service for the pipeline's neural components plus reader training."""

__version__ = "0.1.0"
