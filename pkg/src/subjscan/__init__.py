"""Multilingual subjectivity detection pipeline."""

from .corpus import Corpus, Label, LabeledSentence
from .errors import ConfigError, DataError, SubjscanError, TransportError

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Label",
    "LabeledSentence",
    "SubjscanError",
    "ConfigError",
    "DataError",
    "TransportError",
    "__version__",
]
