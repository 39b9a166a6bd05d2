"""Crawler seed export: an Atom feed of per-paper URL lists, or a flat seed list."""

from __future__ import annotations

import datetime as dt
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Callable, Iterable

from .corpus import CitationRecord

ATOM_NS = "http://www.w3.org/2005/Atom"


@dataclass
class FeedMeta:
    title: str = "Cited web resources"
    feed_id: str = "tag:linkaudit.invalid,2011:seeds"
    author: str = "linkaudit"
    link: str | None = None
    # authority and date of the tag: URIs minted for entry ids
    tag_authority: str = "linkaudit.invalid"
    tag_date: str = "2011"


@dataclass(frozen=True)
class SeedEntry:
    paper_id: str
    publication_date: dt.date
    urls: tuple[str, ...]
    updated_at: dt.datetime


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc).replace(microsecond=0)


def _stamp(when: dt.datetime) -> str:
    return when.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def entry_id(paper_id: str, meta: FeedMeta) -> str:
    specific = re.sub(r"[^A-Za-z0-9\-._~:/?@!$&'()*+,;=]", lambda m: "%%%02X" % ord(m.group()), paper_id)
    return f"tag:{meta.tag_authority},{meta.tag_date}:paper/{specific}"


def seed_entries(records: Iterable[CitationRecord], updated_at: dt.datetime) -> list[SeedEntry]:
    by_paper: dict[str, tuple[dt.date, set[str]]] = {}
    for r in records:
        date, urls = by_paper.setdefault(r.paper_id, (r.publication_date, set()))
        urls.add(r.url)
    return [SeedEntry(pid, date, tuple(sorted(urls)), updated_at)
            for pid, (date, urls) in sorted(by_paper.items())]


def export_feed(records: Iterable[CitationRecord], feed_meta: FeedMeta | None = None,
                clock: Callable[[], dt.datetime] = _utcnow) -> str:
    """Atom feed with one entry per paper, each URL as a ``related`` link.

    Entries are ordered by paper id and links by URL, so output only changes
    with the records or with ``clock()``.
    """
    meta = feed_meta or FeedMeta()
    now = clock()
    updated = _stamp(now)
    ET.register_namespace("", ATOM_NS)

    def sub(parent, tag, text=None, **attrs):
        el = ET.SubElement(parent, f"{{{ATOM_NS}}}{tag}", attrs)
        if text is not None:
            el.text = text
        return el

    feed = ET.Element(f"{{{ATOM_NS}}}feed")
    sub(feed, "id", meta.feed_id)
    sub(feed, "title", meta.title)
    sub(feed, "updated", updated)
    author = sub(feed, "author")
    sub(author, "name", meta.author)
    if meta.link:
        sub(feed, "link", href=meta.link, rel="self")
    for entry in seed_entries(records, now):
        el = sub(feed, "entry")
        sub(el, "id", entry_id(entry.paper_id, meta))
        sub(el, "title", f"URLs cited by {entry.paper_id}")
        sub(el, "updated", updated)
        sub(el, "published", entry.publication_date.isoformat() + "T00:00:00Z")
        for url in entry.urls:
            sub(el, "link", href=url, rel="related", type="text/html")
    ET.indent(feed, space="  ")
    return '<?xml version="1.0" encoding="utf-8"?>\n' + ET.tostring(feed, encoding="unicode") + "\n"


def export_plain_seeds(records: Iterable[CitationRecord]) -> str:
    urls = sorted({r.url for r in records})
    return "".join(u + "\n" for u in urls)
