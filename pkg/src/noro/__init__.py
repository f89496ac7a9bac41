"""Noise-robust UPDRS prediction with contrastive feature augmentation."""

from noro.errors import NoroError, ParseError, ShapeError

__version__ = "0.1.0"

__all__ = ["NoroError", "ParseError", "ShapeError", "__version__"]
