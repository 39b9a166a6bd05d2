"""
Publishing cited URLs as crawler seeds
======================================

A repository can hand its cited URLs to web archives as an Atom feed, one
entry per paper, or as a flat list.
"""

import datetime as dt

from linkaudit.corpus import CitationRecord
from linkaudit.seeds import FeedMeta, export_feed, export_plain_seeds

records = [
    CitationRecord("http://www.cs.odu.edu/~mln/", "0901.0001", dt.date(2009, 1, 5)),
    CitationRecord("http://data.lanl.gov/set1", "0901.0001", dt.date(2009, 1, 5)),
    CitationRecord("http://www.cs.odu.edu/~mln/", "math/0501001", dt.date(2005, 1, 1)),
]

meta = FeedMeta(title="Web resources cited by our papers", tag_authority="repository.example.edu", tag_date="2011")
# a fixed clock makes the feed reproducible
print(export_feed(records, meta, clock=lambda: dt.datetime(2011, 6, 1, tzinfo=dt.timezone.utc)))
print(export_plain_seeds(records))
