"""Embedding-based OOD detection and selective generation for conditional language models."""

from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
