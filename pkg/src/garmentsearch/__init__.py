"""Text-query person retrieval with one-class color models."""

from .colorstats import HsvPixel, HsvDelta, HsvMoments, rgb_to_hsv, hsv_distance, \
    circular_moments, mahalanobis
from .query import parse, QueryAst, Leaf, And, Or, ParseError
from .gmm import FilterConfig, EmConfig, ColorModel, filter_outliers, train, \
    pixel_loglik, region_score, combine
from .svm import SvmConfig, SvmModel, train_svm, svm_region_score

__all__ = [
    "HsvPixel", "HsvDelta", "HsvMoments", "rgb_to_hsv", "hsv_distance",
    "circular_moments", "mahalanobis",
    "parse", "QueryAst", "Leaf", "And", "Or", "ParseError",
    "FilterConfig", "EmConfig", "ColorModel", "filter_outliers", "train",
    "pixel_loglik", "region_score", "combine",
    "SvmConfig", "SvmModel", "train_svm", "svm_region_score",
]

__version__ = "0.1.0"
