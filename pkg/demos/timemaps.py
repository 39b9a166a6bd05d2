"""
Reading and writing TimeMaps
============================

A TimeMap lists every archived copy (memento) of one original URL in
link-format. Here we parse one, pick the copy closest to a publication date
and write the map back out.
"""

import datetime as dt

from linkaudit.analysis import closest_memento
from linkaudit.memento import parse_timemap, serialize_timemap

body = """<http://www.cs.odu.edu/~mln/>; rel="original",
<http://archive.example/timegate/http://www.cs.odu.edu/~mln/>; rel="timegate",
<http://archive.example/web/20050101000000/http://www.cs.odu.edu/~mln/>; rel="first memento"; datetime="Sat, 01 Jan 2005 00:00:00 GMT",
<http://archive.example/web/20050411000000/http://www.cs.odu.edu/~mln/>; rel="memento"; datetime="Mon, 11 Apr 2005 00:00:00 GMT",
<http://archive.example/web/20090601000000/http://www.cs.odu.edu/~mln/>; rel="last memento"; datetime="Mon, 01 Jun 2009 00:00:00 GMT"
"""

tm = parse_timemap(body)
print(tm.original_uri, "has", len(tm.mementos), "mementos")

# 2005-02-20 sits exactly 50 days from two copies; the earlier one wins
for published in (dt.date(2005, 2, 1), dt.date(2005, 2, 20), dt.date(2012, 1, 1)):
    m, delta = closest_memento(tm, published)
    print(published, "->", m.archived_at.date(), f"{delta:+d} days")

# serializing and parsing again gives the same map
text = serialize_timemap(tm)
print(text)
print("round trip:", parse_timemap(text) == tm)
