import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linkaudit.normalize import (
    Blacklist,
    DiscardKind,
    DiscardReason,
    NormalizedUrl,
    is_blacklisted,
    load_blacklist,
    load_tld_set,
    normalize,
)

TLDS = load_tld_set()
EMPTY = Blacklist()
DEFAULT_BL = load_blacklist()


def norm(raw, blacklist=EMPTY):
    return normalize(raw, TLDS, blacklist)


@pytest.mark.parametrize("raw, expected", [
    ("www.lanl.gov/∼user", "http://www.lanl.gov/~user"),
    ("WWW.Example.ORG", "http://www.example.org/"),
    ("http://example.com:80/page", "http://example.com/page"),
    ("https://example.com:443", "https://example.com/"),
    ("https://example.com:8443/x", "https://example.com:8443/x"),
    ("HTTP://Foo.Bar.edu/Path/Keeps/Case", "http://foo.bar.edu/Path/Keeps/Case"),
    ("http://a.org?b=2&a=1", "http://a.org/?b=2&a=1"),
    ("http://a.org/page#section-2", "http://a.org/page"),
    ("a.org.", "http://a.org/"),
    ("http://93.184.216.34/x", "http://93.184.216.34/x"),
])
def test_normalize_examples(raw, expected):
    result = norm(raw)
    assert isinstance(result, NormalizedUrl)
    assert str(result) == expected


@pytest.mark.parametrize("raw, kind", [
    ("http://host.invalidtld/", DiscardKind.UNKNOWN_TLD),
    ("http://example.com:8o80/", DiscardKind.NON_NUMERIC_PORT),
    ("http://résumé.example/", DiscardKind.NON_ASCII_IRREDUCIBLE),
    ("ftp://files.example.org/", DiscardKind.MALFORMED),
    ("http://user@a.org/", DiscardKind.MALFORMED),
    ("http:///nohost", DiscardKind.MALFORMED),
    ("http://a b.org/", DiscardKind.MALFORMED),
    ("http://a.org:99999/", DiscardKind.MALFORMED),
])
def test_normalize_discards(raw, kind):
    result = norm(raw)
    assert isinstance(result, DiscardReason)
    assert result.kind is kind


def test_localhost_is_blacklisted_not_unknown_tld():
    result = normalize("http://localhost/x", TLDS, DEFAULT_BL)
    assert result == DiscardReason(DiscardKind.BLACKLISTED, "host:localhost")
    assert normalize("http://127.0.0.1:8080/", TLDS, DEFAULT_BL).kind is DiscardKind.BLACKLISTED


def test_first_failing_rule_wins():
    # non-ASCII (1) beats unknown TLD (4) and bad port (5)
    assert norm("http://é.badtld:x/").kind is DiscardKind.NON_ASCII_IRREDUCIBLE
    # unknown TLD (4) beats bad port (5)
    assert norm("http://a.badtld:x/").kind is DiscardKind.UNKNOWN_TLD
    # bad port (5) beats blacklist (7)
    assert normalize("http://localhost:x/", TLDS, DEFAULT_BL).kind is DiscardKind.NON_NUMERIC_PORT


def test_is_blacklisted():
    dx = NormalizedUrl("http", "dx.doi.org", None, "/10.1000/1")
    assert is_blacklisted(dx, DEFAULT_BL) == (True, "host:dx.doi.org")
    assert is_blacklisted(NormalizedUrl("http", "example.com", None, "/"), EMPTY) == (False, None)
    mirror = NormalizedUrl("http", "mirror.lanl.arxiv.org", None, "/abs/1")
    assert is_blacklisted(mirror, Blacklist(frozenset({"arxiv.org"}))) == (True, "host:arxiv.org")
    # suffix matching is on label boundaries
    assert is_blacklisted(NormalizedUrl("http", "notarxiv.org", None, "/"), Blacklist(frozenset({"arxiv.org"})))[0] is False


def test_blacklist_url_prefix():
    bl = Blacklist.from_lines(["# proxies", "url:http://www.google.com/url?", "host:Proxy.Lib.edu"])
    assert bl.hosts == {"proxy.lib.edu"}
    hit = norm("http://www.google.com/url?q=http://a.org/", bl)
    assert hit == DiscardReason(DiscardKind.BLACKLISTED, "url:http://www.google.com/url?")
    assert isinstance(norm("http://www.google.com/search?q=x", bl), NormalizedUrl)


def test_blacklist_rejects_unprefixed_lines():
    with pytest.raises(ValueError, match="line 2"):
        Blacklist.from_lines(["host:a.org", "b.org"])


def test_load_tld_set(tmp_path, caplog):
    f = tmp_path / "tlds.txt"
    f.write_text("com\norg\n")
    assert load_tld_set(f) == {"com", "org"}
    f.write_text("# comment\nnet\n")
    assert load_tld_set(f) == {"net"}
    f.write_text("")
    with caplog.at_level(logging.WARNING):
        empty = load_tld_set(f)
    assert empty == set()
    assert "empty" in caplog.text
    assert normalize("http://a.org/", empty, EMPTY).kind is DiscardKind.UNKNOWN_TLD


def test_load_tld_set_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_tld_set(tmp_path / "nope.txt")


def test_bundled_tld_snapshot():
    assert {"com", "org", "edu", "gov", "uk", "de", "museum", "localhost"} <= TLDS
    assert len(TLDS) > 1000
    assert all(t == t.lower() and t.isascii() for t in TLDS)


# -- properties ---------------------------------------------------------------

label = st.from_regex(r"[A-Za-z0-9]([A-Za-z0-9\-]{0,8}[A-Za-z0-9])?", fullmatch=True)
tld = st.sampled_from(["com", "ORG", "edu", "uk", "De", "badtld", "localhost", "x1"])
url_like = st.builds(
    lambda scheme, labels, t, port, path, query, frag: (
        f"{scheme}{'.'.join(labels)}.{t}{port}{path}{query}{frag}"
    ),
    st.sampled_from(["", "http://", "https://", "HTTP://", "HtTpS://", "ftp://"]),
    st.lists(label, min_size=0, max_size=3),
    tld,
    st.sampled_from(["", ":80", ":443", ":8080", ":0080", ":8o80", ":", ":99999"]),
    st.from_regex(r"(/[A-Za-z0-9~._\-%]{0,6}){0,3}", fullmatch=True),
    st.sampled_from(["", "?", "?a=1", "?b=2&a=1"]),
    st.sampled_from(["", "#", "#frag"]),
)
fuzz_input = st.one_of(url_like, st.text(max_size=40), url_like.map(lambda s: s.replace("o", "∼")),
                       url_like.map(lambda s: s + "é"))


def check_invariants(raw, result):
    if isinstance(result, DiscardReason):
        return
    text = str(result)
    assert text.isascii()
    assert result.host == result.host.lower()
    assert result.scheme in ("http", "https")
    assert result.port is None or result.port != {"http": 80, "https": 443}[result.scheme]
    assert result.path.startswith("/")
    again = norm(text)
    assert again == result, f"not idempotent: {raw!r} -> {text!r} -> {again!r}"


@settings(max_examples=500, deadline=None)
@given(fuzz_input)
def test_normalize_properties(raw):
    check_invariants(raw, norm(raw))


@settings(max_examples=300, deadline=None)
@given(url_like)
def test_blacklist_soundness(raw):
    result = normalize(raw, TLDS, DEFAULT_BL)
    if isinstance(result, NormalizedUrl):
        assert is_blacklisted(result, DEFAULT_BL) == (False, None)
