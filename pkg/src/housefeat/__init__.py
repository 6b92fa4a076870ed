"""Visual features and boosted-tree models for listing price and days-on-market."""

from .records import MISSING, FeatureTable, ImageAsset, ListingRecord

__version__ = "0.1.0"

__all__ = ["MISSING", "FeatureTable", "ImageAsset", "ListingRecord", "__version__"]
