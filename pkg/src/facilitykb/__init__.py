"""Knowledge base of clinical trial facilities aligned from open sources."""

from .align import KnowledgeBase, MergeConfig, MergedEntity, build_kb
from .core import Alias, GeoPoint, LocationRef, SemanticType, SourceId, SourceTag
from .ingest import SourceRecord

__version__ = "0.1.0"

__all__ = [
    "Alias",
    "GeoPoint",
    "KnowledgeBase",
    "LocationRef",
    "MergeConfig",
    "MergedEntity",
    "SemanticType",
    "SourceId",
    "SourceRecord",
    "SourceTag",
    "build_kb",
]
