"""Audit the persistence of web resources cited by scholarly documents.

Cited URLs are extracted and normalized, probed for liveness, looked up in
Memento TimeMaps, and summarized into availability classes and archival
delay statistics. ``archive_sim`` provides a scripted web and archive to
test against.
"""

from .analysis import AuditOutcome, AvailabilityClass, build_outcome, classify, closest_memento
from .corpus import CitationRecord, DocumentSource, PaperMetadata
from .liveness import PolitenessPolicy, ProbeResult
from .memento import FetchError, Memento, MementoConfig, TimeMap, parse_timemap, serialize_timemap
from .normalize import DiscardKind, DiscardReason, NormalizedUrl, Normalizer, normalize

__version__ = "0.1.0"

__all__ = [
    "AuditOutcome", "AvailabilityClass", "CitationRecord", "DiscardKind", "DiscardReason", "DocumentSource",
    "FetchError", "Memento", "MementoConfig", "NormalizedUrl", "Normalizer", "PaperMetadata",
    "PolitenessPolicy", "ProbeResult", "TimeMap", "build_outcome", "classify", "closest_memento",
    "normalize", "parse_timemap", "serialize_timemap",
]
