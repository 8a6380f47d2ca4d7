"""Path summaries, path-partitioned storage and tree-pattern evaluation for XML."""

from .execution import build_plan, execute, explain, run_query
from .ingest import StructuralId, parse_document, read_events
from .pattern import QueryPattern, parse_pattern, parse_xpath
from .reconstruct import reconstruct, sorted_outer_union, xmlize
from .relpaths import compute_relevant_paths, enumerate_tuples
from .store import PathStore, build_store, open_store, persist
from .summary import PathSummary, build_summary

__all__ = [
    "PathStore", "PathSummary", "QueryPattern", "StructuralId", "build_plan", "build_store",
    "build_summary", "compute_relevant_paths", "enumerate_tuples", "execute", "explain",
    "open_store", "parse_document", "parse_pattern", "parse_xpath", "persist", "read_events",
    "reconstruct", "run_query", "sorted_outer_union", "xmlize",
]
__version__ = "0.1.0"
