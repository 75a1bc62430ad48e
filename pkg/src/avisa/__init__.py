"""Instance space analysis of simulation-based test cases for self-driving cars.

Static road-geometry features and dynamic telemetry features are filtered,
clustered and selected, projected into a 2-D instance space with PILOT, and
compared through five classifier kinds.
"""
from .dataset import Corpus, Outcome, TestCase, load_corpus, save_corpus
from .errors import ArgumentError, AvisaError, ConvergenceError, DataError
from .features import FeatureMatrix, dynamic_matrix, static_matrix

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "AvisaError", "ConvergenceError", "Corpus", "DataError", "FeatureMatrix", "Outcome",
    "TestCase", "dynamic_matrix", "load_corpus", "save_corpus", "static_matrix",
]
