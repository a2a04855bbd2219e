"""Item matching over short descriptions with an exact flat L2 index."""

from .errors import TieMatchError
from .index import FlatIndex, Neighbor, build, knn_search, load, range_search, save
from .matcher import MatchParams, MatchReport, MatchResult, Status, match_batch, match_item, summarize
from .store import Catalog, ItemRecord, ingest
from .text_embed import EmbedderConfig, HashEmbedder, RemoteEmbedder, embed_batch, embed_hash, normalize_text

__all__ = [
    "Catalog",
    "EmbedderConfig",
    "FlatIndex",
    "HashEmbedder",
    "ItemRecord",
    "MatchParams",
    "MatchReport",
    "MatchResult",
    "Neighbor",
    "RemoteEmbedder",
    "Status",
    "TieMatchError",
    "build",
    "embed_batch",
    "embed_hash",
    "ingest",
    "knn_search",
    "load",
    "match_batch",
    "match_item",
    "normalize_text",
    "range_search",
    "save",
    "summarize",
]
