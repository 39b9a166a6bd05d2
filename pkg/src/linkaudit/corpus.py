"""Corpus ingestion: converted documents plus metadata to citation records."""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .normalize import DiscardReason, NormalizedUrl

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PaperMetadata:
    publication_date: dt.date | None
    subjects: tuple[str, ...] = ()
    # "day" or "month"; month-only dates are pinned to the 1st
    date_precision: str = "day"


@dataclass(frozen=True)
class DocumentSource:
    paper_id: str
    body_markup: str
    body_text: str
    metadata: PaperMetadata


@dataclass(frozen=True)
class CitationRecord:
    url: str
    paper_id: str
    publication_date: dt.date
    subjects: tuple[str, ...] = ()
    date_precision: str = "day"

    def to_json(self) -> dict:
        d = {
            "url": self.url,
            "paper_id": self.paper_id,
            "publication_date": self.publication_date.isoformat(),
            "subjects": list(self.subjects),
        }
        if self.date_precision != "day":
            d["date_precision"] = self.date_precision
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "CitationRecord":
        return cls(
            url=d["url"],
            paper_id=d["paper_id"],
            publication_date=dt.date.fromisoformat(d["publication_date"]),
            subjects=tuple(d.get("subjects") or ()),
            date_precision=d.get("date_precision", "day"),
        )


def parse_publication_date(value) -> tuple[dt.date, str] | None:
    """Parse ``YYYY-MM-DD`` or ``YYYY-MM``; returns ``(date, precision)`` or None."""
    if isinstance(value, dt.date):
        return value, "day"
    if not isinstance(value, str):
        return None
    value = value.strip()
    try:
        if re.fullmatch(r"\d{4}-\d{2}-\d{2}", value):
            return dt.date.fromisoformat(value), "day"
        if re.fullmatch(r"\d{4}-\d{2}", value):
            return dt.date.fromisoformat(value + "-01"), "month"
    except ValueError:
        return None
    return None


# -- markup links -------------------------------------------------------------


class _AnchorCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag != "a":
            return
        for name, value in attrs:
            if name == "href" and value is not None:
                self.hrefs.append(value.strip())

    handle_startendtag = handle_starttag


def extract_markup_links(doc: DocumentSource | str) -> list[str]:
    """Return every anchor ``href`` in document order, duplicates kept.

    Parsing is tolerant; if the markup still cannot be read, an empty list is
    returned and a warning is logged.
    """
    markup = doc.body_markup if isinstance(doc, DocumentSource) else doc
    parser = _AnchorCollector()
    try:
        parser.feed(markup)
        parser.close()
    except Exception as exc:  # HTMLParser can raise on pathological input
        paper = doc.paper_id if isinstance(doc, DocumentSource) else "<markup>"
        logger.warning("unparseable markup in %s: %s", paper, exc)
        return []
    return parser.hrefs


# -- text links ---------------------------------------------------------------

# Bare domains are accepted only with a generic TLD, or with any two-letter
# country TLD when a path follows; everything else needs a scheme or "www".
_GENERIC_TLDS = "com|org|net|edu|gov|mil|int|info|biz|name|museum|aero|coop|pro|mobi|jobs|travel"
_URL_CHARS = r"[^\s<>\"'{}|\\^`\[\]]"
TEXT_URL_RE = re.compile(
    r"(?<![\w@.\-/])(?:"
    rf"https?://{_URL_CHARS}+"
    rf"|www\d{{0,3}}\.{_URL_CHARS}+"
    rf"|(?:[a-z0-9](?:[a-z0-9\-]*[a-z0-9])?\.)+(?:{_GENERIC_TLDS})\b(?:[:/]{_URL_CHARS}*)?"
    rf"|(?:[a-z0-9](?:[a-z0-9\-]*[a-z0-9])?\.)+[a-z]{{2}}/{_URL_CHARS}*"
    r")",
    re.IGNORECASE,
)
_EMBEDDED_SCHEME_RE = re.compile(r"(?<=[^/=])(?=https?://)", re.IGNORECASE)
_TRAILING = ".,;:!?)]\"'>"


def _strip_trailing(candidate: str) -> str:
    while candidate and candidate[-1] in _TRAILING:
        if candidate[-1] == ")" and candidate.count("(") >= candidate.count(")"):
            break
        candidate = candidate[:-1]
    return candidate


def extract_text_links(text: str) -> list[str]:
    """Find web URLs in plain text.

    Recognizes ``http(s)://`` URLs, ``www.`` hosts and bare domains. URLs
    run together without whitespace (``http://a.orghttp://b.org``) are split
    apart; trailing sentence punctuation is dropped, keeping a closing
    parenthesis only when it balances one inside the URL.
    """
    found = []
    for match in TEXT_URL_RE.finditer(text):
        for piece in _EMBEDDED_SCHEME_RE.split(match.group(0)):
            piece = _strip_trailing(piece)
            if piece and "." in piece:
                found.append(piece)
    return found


# -- subjects -----------------------------------------------------------------

DEFAULT_SUBJECT_LABELS = {
    "astro-ph": "Astrophysics",
    "cond-mat": "Condensed Matter",
    "cs": "Computer Science",
    "gr-qc": "General Relativity and Quantum Cosmology",
    "hep-ex": "High Energy Physics - Experiment",
    "hep-lat": "High Energy Physics - Lattice",
    "hep-ph": "High Energy Physics - Phenomenology",
    "hep-th": "High Energy Physics - Theory",
    "math": "Mathematics",
    "math-ph": "Mathematical Physics",
    "nlin": "Nonlinear Sciences",
    "nucl-ex": "Nuclear Experiment",
    "nucl-th": "Nuclear Theory",
    "physics": "Physics",
    "q-bio": "Quantitative Biology",
    "q-fin": "Quantitative Finance",
    "quant-ph": "Quantum Physics",
    "stat": "Statistics",
}


def collapse_subject(subject: str) -> str:
    """Reduce a hierarchical subject code to its top level: ``cs.dl`` -> ``cs``."""
    return subject.split(".", 1)[0]


def subject_label(code: str, labels: Mapping[str, str] = DEFAULT_SUBJECT_LABELS) -> str:
    return labels.get(code, code)


# -- records ------------------------------------------------------------------


def build_records(doc: DocumentSource, normalized_urls: Sequence[NormalizedUrl | str]) -> list[CitationRecord]:
    """One record per unique URL of ``doc``, with subjects collapsed."""
    meta = doc.metadata
    if meta.publication_date is None:
        if normalized_urls:
            logger.warning("skipping %d links of %s: missing or unparseable publication date",
                           len(normalized_urls), doc.paper_id)
        return []
    subjects = tuple(dict.fromkeys(collapse_subject(s) for s in meta.subjects if s))
    out = []
    for url in dict.fromkeys(str(u) for u in normalized_urls):
        out.append(CitationRecord(url, doc.paper_id, meta.publication_date, subjects, meta.date_precision))
    return out


@dataclass
class DedupeResult:
    records: list[CitationRecord]
    distinct_urls: int


def dedupe_corpus(records: Iterable[CitationRecord]) -> DedupeResult:
    """Drop repeated ``(url, paper_id)`` pairs, keeping the first occurrence."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for rec in records:
        key = (rec.url, rec.paper_id)
        if key not in seen:
            seen.add(key)
            kept.append(rec)
    return DedupeResult(kept, len({r.url for r in kept}))


@dataclass
class DocumentResult:
    paper_id: str
    raw_links: int
    records: list[CitationRecord]
    discarded: list[tuple[str, DiscardReason]] = field(default_factory=list)


def process_document(doc: DocumentSource, normalizer: Callable[[str], NormalizedUrl | DiscardReason]) -> DocumentResult:
    """Extract, normalize, deduplicate and turn one document into records."""
    raw = extract_markup_links(doc) + extract_text_links(doc.body_text)
    kept: list[NormalizedUrl] = []
    discarded = []
    for link in raw:
        result = normalizer(link)
        if isinstance(result, DiscardReason):
            discarded.append((link, result))
        else:
            kept.append(result)
    unique = list(dict.fromkeys(kept))
    return DocumentResult(doc.paper_id, len(raw), build_records(doc, unique), discarded)


def process_corpus(docs: Iterable[DocumentSource], normalizer, workers: int = 1) -> list[DocumentResult]:
    """Process documents, optionally in parallel; output follows input order."""
    docs = list(docs)
    ids = [d.paper_id for d in docs]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"duplicate paper_id {dup!r} in corpus")
    if workers <= 1:
        return [process_document(d, normalizer) for d in docs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda d: process_document(d, normalizer), docs))


# -- files --------------------------------------------------------------------


def _doc_file(corpus_dir: Path, entry: Mapping, key: str, suffixes: Sequence[str]) -> str:
    if entry.get(key):
        path = Path(entry[key])
        if not path.is_absolute():
            path = corpus_dir / path
        return path.read_text(encoding="utf-8", errors="replace")
    stem = entry["paper_id"].replace("/", "_")
    for suffix in suffixes:
        path = corpus_dir / (stem + suffix)
        if path.exists():
            return path.read_text(encoding="utf-8", errors="replace")
    return ""


def load_corpus(corpus_dir: str | Path, meta_path: str | Path) -> Iterator[DocumentSource]:
    """Read documents listed in a line-delimited metadata file.

    Each metadata line is a JSON object with ``paper_id``,
    ``publication_date`` (``YYYY-MM-DD`` or ``YYYY-MM``) and ``subjects``.
    Markup and text default to ``<paper_id>.xml``/``.html`` and
    ``<paper_id>.txt`` inside ``corpus_dir`` (``/`` in ids becomes ``_``);
    the optional ``markup`` and ``text`` keys override those paths.
    """
    corpus_dir = Path(corpus_dir)
    with open(meta_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{meta_path}:{lineno}: invalid JSON: {exc}") from exc
            if not entry.get("paper_id"):
                raise ValueError(f"{meta_path}:{lineno}: missing paper_id")
            parsed = parse_publication_date(entry.get("publication_date"))
            if parsed is None:
                logger.warning("%s:%d: unparseable publication date %r for %s",
                               meta_path, lineno, entry.get("publication_date"), entry["paper_id"])
                date, precision = None, "day"
            else:
                date, precision = parsed
            subjects = entry.get("subjects") or []
            if isinstance(subjects, str):
                subjects = [subjects]
            yield DocumentSource(
                paper_id=str(entry["paper_id"]),
                body_markup=_doc_file(corpus_dir, entry, "markup", (".xml", ".html")),
                body_text=_doc_file(corpus_dir, entry, "text", (".txt",)),
                metadata=PaperMetadata(date, tuple(subjects), precision),
            )


def write_records(records: Iterable[CitationRecord], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            n += 1
    return n


def read_records(path: str | Path) -> list[CitationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(CitationRecord.from_json(json.loads(line)))
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad citation record: {exc}") from exc
    return out
