"""
Cleaning up URLs pulled out of papers
=====================================

Links scraped from converted PDFs come in every spelling. Normalizing them
gives one canonical string per resource, or a reason it was thrown away.
"""

from linkaudit import Normalizer
from linkaudit.normalize import NormalizedUrl

normalize = Normalizer()  # bundled TLD snapshot and blacklist

raw = [
    "www.lanl.gov/∼user",                  # tilde lookalike from PDF conversion
    "HTTP://CS.ODU.EDU:80/~mln/#top",      # case, default port, fragment
    "https://example.edu:8443/data?id=7",  # non-default port survives
    "http://résumé.example/",              # non-ASCII host
    "http://host.notatld/",
    "http://a.org:8o80/",
    "http://dx.doi.org/10.1000/182",       # identifier resolver, not a web resource
]

for r in raw:
    result = normalize(r)
    if isinstance(result, NormalizedUrl):
        print(f"{r!r:42} -> {result}")
    else:
        print(f"{r!r:42} x  {result.kind.value} ({result.detail})")

# normalizing twice changes nothing
once = normalize("WWW.Lanl.GOV/Research")
print(once, normalize(str(once)) == once)
