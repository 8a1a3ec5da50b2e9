"""Containment similarity search with KMV, G-KMV and GB-KMV sketches."""

from .dataset import Dataset, DatasetStats, compute_stats, from_records, generate_zipf, ingest
from .errors import GbkmvError
from .gbkmv import (
    GbkmvIndex,
    build_gbkmv_index,
    compute_tau,
    estimate_containment_gbkmv,
    estimate_intersection_gkmv,
    estimate_overlap_gbkmv,
    sketch_query,
)
from .hashing import HashSource
from .index_io import load_index, save_index
from .kmv import KmvSketch, build_kmv, build_threshold_sketch, estimate_intersection_kmv
from .lshe import LsheIndex, lshe_query
from .search import SizePartitionIndex, exact_search, query
from .tuner import CostModelInputs, choose_buffer_size

__all__ = [
    "CostModelInputs", "Dataset", "DatasetStats", "GbkmvError", "GbkmvIndex", "HashSource",
    "KmvSketch", "LsheIndex", "SizePartitionIndex", "build_gbkmv_index", "build_kmv",
    "build_threshold_sketch", "choose_buffer_size", "compute_stats", "compute_tau",
    "estimate_containment_gbkmv", "estimate_intersection_gkmv", "estimate_intersection_kmv",
    "estimate_overlap_gbkmv", "exact_search", "from_records", "generate_zipf", "ingest",
    "load_index", "lshe_query", "query", "save_index", "sketch_query",
]
