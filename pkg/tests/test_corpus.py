import datetime as dt
import json
import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linkaudit.corpus import (
    CitationRecord,
    DocumentSource,
    PaperMetadata,
    build_records,
    collapse_subject,
    dedupe_corpus,
    extract_markup_links,
    extract_text_links,
    load_corpus,
    parse_publication_date,
    process_corpus,
    process_document,
    read_records,
    subject_label,
    write_records,
)
from linkaudit.normalize import Blacklist, Normalizer

D = dt.date(2009, 3, 1)


def doc(paper_id="p1", markup="", text="", subjects=("cs.dl",), date=D):
    return DocumentSource(paper_id, markup, text, PaperMetadata(date, tuple(subjects)))


class TestMarkupLinks:
    def test_single_anchor(self):
        assert extract_markup_links(doc(markup='<a href="http://a.example/x">x</a>')) == ["http://a.example/x"]

    def test_no_anchors(self):
        assert extract_markup_links(doc(markup="<page><text>plain</text></page>")) == []

    def test_duplicates_kept_in_order(self):
        m = '<a href="http://b.org/">1</a><p><A HREF="http://a.org/">2</A><a href="http://b.org/">3</a>'
        assert extract_markup_links(doc(markup=m)) == ["http://b.org/", "http://a.org/", "http://b.org/"]

    def test_pdftohtml_style_xml_and_entities(self):
        m = ('<?xml version="1.0"?><pdf2xml><page number="1"><text top="1">'
             '<a href="http://x.org/q?a=1&amp;b=2">link</a></text><a name="anchor-only"/></page>')
        assert extract_markup_links(m) == ["http://x.org/q?a=1&b=2"]

    def test_messy_markup_is_tolerated(self):
        m = '<a href="http://ok.org/">fine<b><a href=http://unquoted.org/x>broken <<< </a'
        assert extract_markup_links(m) == ["http://ok.org/", "http://unquoted.org/x"]


class TestTextLinks:
    @pytest.mark.parametrize("text, expected", [
        ("see http://www.lanl.gov/memento.", ["http://www.lanl.gov/memento"]),
        ("visit www.example.org today", ["www.example.org"]),
        ("no links here", []),
        ("(at http://a.org/x), and http://b.org/y;", ["http://a.org/x", "http://b.org/y"]),
        ('"http://a.org/q"', ["http://a.org/q"]),
        ("http://en.wikipedia.org/wiki/Foo_(bar).", ["http://en.wikipedia.org/wiki/Foo_(bar)"]),
        ("data at nature.com/articles/123 and arxiv.org", ["nature.com/articles/123", "arxiv.org"]),
        ("ask foo@bar.com or e.g. Fig. 2.3", []),
        ("http://a.orghttp://b.org/y", ["http://a.org", "http://b.org/y"]),
        ("http://web.archive.org/web/2005/http://a.org/", ["http://web.archive.org/web/2005/http://a.org/"]),
        ("HTTPS://Secure.Example.NET/Path]", ["HTTPS://Secure.Example.NET/Path"]),
    ])
    def test_examples(self, text, expected):
        assert extract_text_links(text) == expected

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(list("htp:/w.aorgcm x(),;\"'-1") + ["http://", "www.", ".org"]),
                    max_size=40).map("".join))
    def test_matches_are_substrings(self, text):
        for link in extract_text_links(text):
            assert link in text
            assert link[-1] not in ".,;]\"'"


class TestSubjects:
    @pytest.mark.parametrize("subject, top", [("cs.dl", "cs"), ("math", "math"), ("astro-ph.CO", "astro-ph")])
    def test_collapse(self, subject, top):
        assert collapse_subject(subject) == top

    def test_label_table(self):
        assert subject_label(collapse_subject("cs.dl")) == "Computer Science"
        assert subject_label("Information Science") == "Information Science"
        assert subject_label("cs", {"cs": "CompSci"}) == "CompSci"

    @given(st.text(min_size=1))
    def test_idempotent(self, s):
        assert collapse_subject(collapse_subject(s)) == collapse_subject(s)


class TestBuildRecords:
    def test_one_record_per_url(self):
        recs = build_records(doc(subjects=["Biology"]), ["http://a.org/", "http://b.org/"])
        assert [r.url for r in recs] == ["http://a.org/", "http://b.org/"]
        assert all(r.subjects == ("Biology",) and r.publication_date == D for r in recs)

    def test_no_urls(self):
        assert build_records(doc(), []) == []

    def test_multi_subject(self):
        recs = build_records(doc(subjects=["cs.dl", "math.ST", "cs.IR"]), ["http://a.org/"])
        assert recs[0].subjects == ("cs", "math")
        recs = build_records(doc(subjects=["hep-th", "math.ST", "cs.IR"]), ["http://a.org/"])
        assert recs[0].subjects == ("hep-th", "math", "cs")

    def test_missing_date_skips(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert build_records(doc(date=None), ["http://a.org/"]) == []
        assert "publication date" in caplog.text


class TestDedupe:
    def rec(self, url, paper):
        return CitationRecord(url, paper, D)

    def test_example(self):
        u1 = "http://u1.org/"
        res = dedupe_corpus([self.rec(u1, "p1"), self.rec(u1, "p1"), self.rec(u1, "p2")])
        assert res.records == [self.rec(u1, "p1"), self.rec(u1, "p2")]
        assert res.distinct_urls == 1

    def test_empty(self):
        res = dedupe_corpus([])
        assert res.records == [] and res.distinct_urls == 0

    def test_synthetic_corpus_shape(self):
        # 42 URLs; 8 of them are cited by a second paper -> 50 pairs
        urls = [f"http://site{i}.org/" for i in range(42)]
        pairs = [(u, f"paper{i % 7}") for i, u in enumerate(urls)]
        pairs += [(urls[i], f"paper{(i + 1) % 7}") for i in range(8)]
        records = [self.rec(u, p) for u, p in pairs]
        res = dedupe_corpus(records + records[:10])
        assert len(res.records) == 50
        assert res.distinct_urls == 42
        assert len({(r.url, r.paper_id) for r in res.records}) == 50

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 3))))
    def test_idempotent_and_order_preserving(self, pairs):
        records = [self.rec(f"http://h{u}.org/", f"p{p}") for u, p in pairs]
        once = dedupe_corpus(records).records
        assert dedupe_corpus(once).records == once
        assert once == list(dict.fromkeys(records))


def test_process_document_dedupes_after_normalization():
    normalizer = Normalizer(blacklist=Blacklist(frozenset({"localhost"})))
    d = doc(markup='<a href="http://A.org:80/x">a</a><a href="http://localhost/">l</a>',
            text="again at a.org/x and http://a.org/x#frag, plus http://bad.zzzz/")
    res = process_document(d, normalizer)
    assert res.raw_links == 5
    assert [r.url for r in res.records] == ["http://a.org/x"]
    assert sorted(r.kind.value for _, r in res.discarded) == ["Blacklisted", "UnknownTld"]


def test_process_corpus_parallel_matches_serial():
    normalizer = Normalizer()
    docs = [doc(f"p{i}", text=f"http://site{i % 5}.org/{i} http://common.org/") for i in range(30)]
    assert process_corpus(docs, normalizer, workers=4) == process_corpus(docs, normalizer)
    with pytest.raises(ValueError, match="duplicate paper_id"):
        process_corpus(docs + docs[:1], normalizer)


def test_parse_publication_date():
    assert parse_publication_date("2005-06-15") == (dt.date(2005, 6, 15), "day")
    assert parse_publication_date("1999-05") == (dt.date(1999, 5, 1), "month")
    assert parse_publication_date("2005-13-01") is None
    assert parse_publication_date("June 2005") is None
    assert parse_publication_date(None) is None


def test_load_corpus_and_record_file_roundtrip(tmp_path):
    (tmp_path / "p1.xml").write_text('<a href="http://a.org/">a</a>')
    (tmp_path / "p1.txt").write_text("see www.b.org")
    (tmp_path / "math_0501001.txt").write_text("http://c.org/")
    (tmp_path / "custom.html").write_text('<a href="http://d.org/">d</a>')
    meta = tmp_path / "meta.jsonl"
    meta.write_text("\n".join(json.dumps(m) for m in [
        {"paper_id": "p1", "publication_date": "2005-06-15", "subjects": ["Biology"]},
        {"paper_id": "math/0501001", "publication_date": "2005-01", "subjects": ["math.ST", "stat.TH"]},
        {"paper_id": "p3", "publication_date": "2006-02-02", "subjects": [], "markup": "custom.html"},
        {"paper_id": "p4", "publication_date": "someday", "subjects": []},
    ]) + "\n")
    docs = list(load_corpus(tmp_path, meta))
    assert [d.paper_id for d in docs] == ["p1", "math/0501001", "p3", "p4"]
    assert docs[1].metadata == PaperMetadata(dt.date(2005, 1, 1), ("math.ST", "stat.TH"), "month")
    assert docs[3].metadata.publication_date is None

    results = process_corpus(docs, Normalizer())
    records = [r for res in results for r in res.records]
    assert [(r.paper_id, r.url) for r in records] == [
        ("p1", "http://a.org/"), ("p1", "http://www.b.org/"),
        ("math/0501001", "http://c.org/"), ("p3", "http://d.org/"),
    ]
    assert records[2].date_precision == "month"

    out = tmp_path / "records.jsonl"
    write_records(records, out)
    assert read_records(out) == records
    first = json.loads(out.read_text().splitlines()[0])
    assert first == {"url": "http://a.org/", "paper_id": "p1", "publication_date": "2005-06-15",
                     "subjects": ["Biology"]}
