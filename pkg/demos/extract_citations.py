"""
From a folder of papers to citation records
===========================================

Each paper contributes the links found in its markup and in its plain text.
After normalization there is one record per (URL, paper).
"""

import json
import tempfile
from pathlib import Path

from linkaudit.corpus import dedupe_corpus, load_corpus, process_corpus
from linkaudit.normalize import Normalizer

work = Path(tempfile.mkdtemp())
(work / "0901.0001.xml").write_text('<page><a href="http://www.cs.odu.edu/~mln/">site</a></page>')
(work / "0901.0001.txt").write_text("Code at www.cs.odu.edu/~mln/ and data at http://data.lanl.gov/set1.")
(work / "math_0501001.txt").write_text("See http://WWW.CS.ODU.EDU/~mln/ (mirror) and http://arxiv.org/abs/1.")

meta = work / "meta.jsonl"
meta.write_text("\n".join(json.dumps(m) for m in [
    {"paper_id": "0901.0001", "publication_date": "2009-01-05", "subjects": ["cs.DL", "cs.IR"]},
    {"paper_id": "math/0501001", "publication_date": "2005-01", "subjects": ["math.ST"]},
]))

docs = list(load_corpus(work, meta))
results = process_corpus(docs, Normalizer())

for res in results:
    print(res.paper_id, "raw links:", res.raw_links)
    for rec in res.records:
        print("   keep", rec.url, rec.subjects)
    for raw, reason in res.discarded:
        print("   drop", raw, reason.kind.value)

# the same URL cited by two papers is two records but one resource
corpus = dedupe_corpus(r for res in results for r in res.records)
print(len(corpus.records), "records,", corpus.distinct_urls, "distinct URLs")
