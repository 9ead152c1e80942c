"""Lexicon loading, phrase matching, ranking, and the curation loop."""

import io

import pytest

from urbansent import sentiment
from urbansent.ontology import (
    Lexicon,
    LexiconError,
    NonInteractiveError,
    bundled_lexicon_path,
    bundled_stopwords,
    curate_session,
    filter_reviews,
    load_lexicon,
    mark_density_sentences,
    match_terms,
    match_tokens,
    term_frequency_ranking,
)
from urbansent.textprep import segment_sentences, tokenize


class FakeReview:
    def __init__(self, review_id, text):
        self.review_id = review_id
        self.text = text


# ---------------------------------------------------------------------------
# Lexicon container


def test_lexicon_deduplicates_preserving_order():
    lex = Lexicon(entries=["Parking", "traffic", "parking "])
    assert lex.entries == ["parking", "traffic"]
    assert len(lex) == 2


def test_lexicon_contains_is_case_insensitive():
    lex = Lexicon(entries=["parking"])
    assert "PARKING" in lex
    assert " parking " in lex
    assert "traffic" not in lex


def test_lexicon_add_tracks_provenance():
    lex = Lexicon(entries=["parking"])
    assert lex.add("street festival", "bottom_up")
    assert lex.provenance["street festival"] == "bottom_up"
    assert lex.provenance["parking"] == "seed"
    assert not lex.add("parking")  # already present


def test_lexicon_add_rejects_unknown_provenance():
    lex = Lexicon()
    with pytest.raises(LexiconError):
        lex.add("parking", "guessed")


def test_lexicon_rejects_empty_entry():
    with pytest.raises(LexiconError):
        Lexicon(entries=["  "])


# ---------------------------------------------------------------------------
# Lexicon files


def test_load_lexicon_parses_comments_and_blank_lines(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("# comment\nparking\n\ntraffic  # inline comment\n")
    lex = load_lexicon(path)
    assert lex.entries == ["parking", "traffic"]


def test_load_lexicon_warns_and_dedups(tmp_path, capsys):
    path = tmp_path / "lex.txt"
    path.write_text("parking\nParking\n")
    lex = load_lexicon(path)
    assert lex.entries == ["parking"]
    assert "duplicate lexicon entry" in capsys.readouterr().err


def test_load_lexicon_rejects_five_token_phrase(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("one two three four five\n")
    with pytest.raises(LexiconError):
        load_lexicon(path)


def test_load_lexicon_rejects_empty_file(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("# only a comment\n")
    with pytest.raises(LexiconError):
        load_lexicon(path)


def test_load_lexicon_provenance_argument(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("parking\n")
    lex = load_lexicon(path, provenance="top_down")
    assert lex.provenance["parking"] == "top_down"


def test_bundled_lexicon_has_44_seed_entries():
    lex = load_lexicon(bundled_lexicon_path())
    assert len(lex) == 44
    assert all(1 <= len(tokenize(e)) <= 4 for e in lex.entries)


def test_bundled_expanded_lexicon_is_a_superset():
    base = load_lexicon(bundled_lexicon_path())
    expanded = load_lexicon(bundled_lexicon_path(expanded=True))
    assert set(base.entries) <= set(expanded.entries)
    assert len(expanded) > len(base)


def test_default_lexicon_disjoint_from_sentiment_word_lists():
    # the default filter terms must stay neutral under the fallback sentiment
    # scorer, otherwise every flagged sentence would lean one way by
    # construction; the expanded variant is exempt because bottom-up mining
    # legitimately surfaces affect-laden terms such as "congested"
    lex = load_lexicon(bundled_lexicon_path())
    lists = sentiment.bundled_word_lists()
    single_word = {e for e in lex.entries if len(tokenize(e)) == 1}
    assert not single_word & lists.positive
    assert not single_word & lists.negative
    assert not single_word & lists.negations
    assert not lists.positive & lists.negative


def test_bundled_stopwords_nonempty_lowercase():
    stops = bundled_stopwords()
    assert "the" in stops
    assert all(w == w.lower() for w in stops)


# ---------------------------------------------------------------------------
# Matching


def test_match_tokens_single_word():
    lex = Lexicon(entries=["parking"])
    got = match_tokens(tokenize("Parking was parking."), lex, review_id="r")
    assert [(m.entry, m.token_offset) for m in got] == [("parking", 0), ("parking", 2)]
    assert all(m.review_id == "r" for m in got)


def test_match_tokens_multiword_phrase():
    lex = Lexicon(entries=["close to"])
    got = match_tokens(tokenize("It is close to the station"), lex)
    assert [(m.entry, m.token_offset) for m in got] == [("close to", 2)]


def test_match_tokens_no_substring_false_positive():
    lex = Lexicon(entries=["near"])
    assert match_tokens(tokenize("nearly nowhere"), lex) == []
    assert len(match_tokens(tokenize("near here"), lex)) == 1


def test_match_tokens_phrase_must_be_contiguous():
    lex = Lexicon(entries=["close to"])
    assert match_tokens(tokenize("close enough to walk"), lex) == []


def test_match_tokens_overlapping_entries_all_reported():
    lex = Lexicon(entries=["walking distance", "walking"])
    got = match_tokens(tokenize("within walking distance"), lex)
    assert {(m.entry, m.token_offset) for m in got} == {("walking", 1), ("walking distance", 1)}


def test_match_tokens_sorted_by_offset_then_entry():
    lex = Lexicon(entries=["traffic", "parking"])
    got = match_tokens(tokenize("traffic and parking and traffic"), lex)
    assert [(m.token_offset, m.entry) for m in got] == [(0, "traffic"), (2, "parking"), (4, "traffic")]


def test_match_tokens_longer_phrase_than_text():
    lex = Lexicon(entries=["close to the station"])
    assert match_tokens(["close"], lex) == []


def test_match_terms_uses_review_fields():
    lex = Lexicon(entries=["parking"])
    got = match_terms(FakeReview("r9", "Parking everywhere"), lex)
    assert got[0].review_id == "r9"


def test_filter_reviews_keeps_only_matching():
    lex = Lexicon(entries=["parking"])
    reviews = [FakeReview("a", "parking is bad"), FakeReview("b", "lovely food")]
    flagged = filter_reviews(reviews, lex)
    assert [r.review_id for r, _ in flagged] == ["a"]
    assert flagged[0][1][0].entry == "parking"


def test_mark_density_sentences():
    lex = Lexicon(entries=["parking"])
    sentences = segment_sentences("Parking is a pain. Food was great.", review_id="r")
    marked = mark_density_sentences(sentences, lex)
    assert [s.density_related for s in marked] == [True, False]
    # originals untouched
    assert [s.density_related for s in sentences] == [False, False]


# ---------------------------------------------------------------------------
# Ranking


def test_term_frequency_ranking_orders_and_breaks_ties():
    reviews = ["b b a", "a c", "c"]
    got = term_frequency_ranking(reviews, top_k=10, stopwords=frozenset())
    assert got == [("a", 2), ("b", 2), ("c", 2)]


def test_term_frequency_ranking_respects_stopwords_and_top_k():
    reviews = ["the the the parking", "the parking lot"]
    got = term_frequency_ranking(reviews, top_k=1)
    assert got == [("parking", 2)]


def test_term_frequency_ranking_rejects_bad_top_k():
    with pytest.raises(ValueError):
        term_frequency_ranking(["a"], top_k=0)


# ---------------------------------------------------------------------------
# Curation


def make_corpus():
    return [
        FakeReview("r1", "congestion congestion everywhere"),
        FakeReview("r2", "congestion and parking"),
        FakeReview("r3", "parking again"),
    ]


def test_curate_session_scripted_accept():
    lex = Lexicon(entries=["parking"])
    commands = io.StringIO("y\nq\n")
    out = io.StringIO()
    revised = curate_session(
        make_corpus(), lex, page_size=5, input_stream=commands, output_stream=out, stopwords=frozenset()
    )
    assert "congestion" in revised.entries
    assert revised.provenance["congestion"] == "bottom_up"
    assert "parking" in revised.entries
    assert len(lex) == 1  # input untouched


def test_curate_session_reject_and_custom_add():
    lex = Lexicon(entries=["parking"])
    commands = io.StringIO("a street festival\nn\nq\n")
    out = io.StringIO()
    revised = curate_session(
        make_corpus(), lex, input_stream=commands, output_stream=out, stopwords=frozenset()
    )
    assert "street festival" in revised.entries
    assert "congestion" not in revised.entries


def test_curate_session_filter_command_reports_count():
    lex = Lexicon(entries=["parking"])
    commands = io.StringIO("f\nq\n")
    out = io.StringIO()
    curate_session(make_corpus(), lex, input_stream=commands, output_stream=out, stopwords=frozenset())
    text = out.getvalue()
    assert "flags 2 reviews" in text


def test_curate_session_eof_ends_cleanly():
    lex = Lexicon(entries=["parking"])
    revised = curate_session(
        make_corpus(), lex, input_stream=io.StringIO(""), output_stream=io.StringIO(), stopwords=frozenset()
    )
    assert revised.entries == ["parking"]


def test_curate_session_writes_log(tmp_path):
    lex = Lexicon(entries=["parking"])
    log = tmp_path / "session.log"
    curate_session(
        make_corpus(),
        lex,
        input_stream=io.StringIO("y\nq\n"),
        output_stream=io.StringIO(),
        log_path=log,
        stopwords=frozenset(),
    )
    text = log.read_text()
    assert "curation session" in text
    assert "-> y" in text


def test_curate_session_requires_tty_without_stream(monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(""))  # StringIO has isatty() -> False
    with pytest.raises(NonInteractiveError):
        curate_session(make_corpus(), Lexicon(entries=["parking"]))
