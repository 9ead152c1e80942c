"""Urban-density lexicon: loading, matching, filtering, and curation.

Matching is phrase matching on token boundaries, never raw substring search,
so "near" does not fire inside "nearly". The bundled default lexicon lives in
``data/lexicon.txt``; an expanded variant with verb stems spelled out is in
``data/lexicon_expanded.txt``.
"""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .textprep import tokenize

PROVENANCES = ("seed", "top_down", "bottom_up")


class LexiconError(ValueError):
    pass


@dataclass
class Lexicon:
    """Ordered set of lowercase 1..4-token entries with per-entry provenance."""

    entries: list[str] = field(default_factory=list)
    provenance: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        cleaned = []
        seen = set()
        for entry in self.entries:
            e = entry.strip().lower()
            if not e:
                raise LexiconError("empty lexicon entry")
            if e in seen:
                continue
            seen.add(e)
            cleaned.append(e)
        self.entries = cleaned
        for e in self.entries:
            self.provenance.setdefault(e, "seed")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entry: str) -> bool:
        return entry.strip().lower() in set(self.entries)

    def add(self, entry: str, provenance: str = "bottom_up") -> bool:
        """Add one entry; returns False when it was already present."""
        if provenance not in PROVENANCES:
            raise LexiconError(f"unknown provenance {provenance!r}")
        e = entry.strip().lower()
        if not e:
            raise LexiconError("empty lexicon entry")
        if e in set(self.entries):
            return False
        self.entries.append(e)
        self.provenance[e] = provenance
        return True

    def token_entries(self) -> list[tuple[str, tuple[str, ...]]]:
        """Entries paired with their token sequences (1..4 tokens each)."""
        return [(e, tuple(tokenize(e))) for e in self.entries]


@dataclass(frozen=True)
class TermMatch:
    """One lexicon phrase found in a review's token stream."""

    review_id: str
    entry: str
    token_offset: int


def bundled_lexicon_path(expanded: bool = False) -> Path:
    name = "lexicon_expanded.txt" if expanded else "lexicon.txt"
    return Path(str(resources.files("urbansent").joinpath("data", name)))


def bundled_stopwords() -> frozenset[str]:
    path = resources.files("urbansent").joinpath("data", "stopwords.txt")
    words = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line.lower())
    return frozenset(words)


def load_lexicon(path, provenance: str = "seed") -> Lexicon:
    """Load a lexicon file: one lowercase entry per line, '#' comments allowed.

    Duplicate lines (after case folding) are deduplicated with a warning to
    stderr; an empty file is an error.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    entries = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip().lower()
        if not text:
            continue
        if text in seen:
            print(f"warning: duplicate lexicon entry {text!r} at line {lineno}", file=sys.stderr)
            continue
        if len(tokenize(text)) not in (1, 2, 3, 4):
            raise LexiconError(f"entry {text!r} is not a 1..4-token phrase (line {lineno})")
        seen.add(text)
        entries.append(text)
    if not entries:
        raise LexiconError(f"lexicon file {path} contains no entries")
    lex = Lexicon(entries=entries)
    for e in lex.entries:
        lex.provenance[e] = provenance
    return lex


def match_tokens(tokens: list[str], lexicon: Lexicon, review_id: str = "") -> list[TermMatch]:
    """All lexicon phrases appearing contiguously on token boundaries."""
    matches = []
    n = len(tokens)
    for entry, phrase in lexicon.token_entries():
        k = len(phrase)
        if k == 0 or k > n:
            continue
        for i in range(n - k + 1):
            if tuple(tokens[i : i + k]) == phrase:
                matches.append(TermMatch(review_id=review_id, entry=entry, token_offset=i))
    matches.sort(key=lambda m: (m.token_offset, m.entry))
    return matches


def match_terms(review, lexicon: Lexicon) -> list[TermMatch]:
    """Lexicon matches for one review (``review`` has .review_id and .text)."""
    return match_tokens(tokenize(review.text), lexicon, review_id=review.review_id)


def filter_reviews(reviews, lexicon: Lexicon) -> list[tuple[object, list[TermMatch]]]:
    """Retain reviews with at least one lexicon match, paired with their matches."""
    flagged = []
    for review in reviews:
        matches = match_terms(review, lexicon)
        if matches:
            flagged.append((review, matches))
    return flagged


def mark_density_sentences(sentences, lexicon: Lexicon):
    """Copy sentences with density_related set from lexicon matching."""
    from dataclasses import replace

    marked = []
    for sent in sentences:
        hit = bool(match_tokens(tokenize(sent.text), lexicon, review_id=sent.review_id))
        marked.append(replace(sent, density_related=hit))
    return marked


def term_frequency_ranking(reviews, top_k: int, stopwords=None) -> list[tuple[str, int]]:
    """Tokens ranked by descending corpus frequency, ties lexicographic.

    ``reviews`` may be review objects (with .text) or plain strings.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    stopwords = bundled_stopwords() if stopwords is None else frozenset(stopwords)
    counts: Counter[str] = Counter()
    for review in reviews:
        text = review if isinstance(review, str) else review.text
        for tok in tokenize(text):
            if tok not in stopwords:
                counts[tok] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]


class NonInteractiveError(RuntimeError):
    pass


def curate_session(
    reviews,
    lexicon: Lexicon,
    page_size: int = 10,
    max_candidates: int = 200,
    input_stream=None,
    output_stream=None,
    log_path=None,
    stopwords=None,
) -> Lexicon:
    """Interactive bottom-up curation loop over ranked candidate tokens.

    Presents the most frequent corpus tokens not already in the lexicon (and
    not stopwords) page by page. Commands per candidate: ``y`` accept, ``n``
    reject, ``a <phrase>`` add a custom phrase, ``f`` re-run the filter with
    the revised lexicon and report the flagged count, ``q`` end the session.
    Accepted terms carry provenance ``bottom_up``. The transcript is appended
    to ``log_path`` when given.
    """
    if input_stream is None:
        if not sys.stdin.isatty():
            raise NonInteractiveError(
                "curation needs an interactive terminal; rerun from a TTY or "
                "pass an explicit input stream"
            )
        input_stream = sys.stdin
    out = output_stream if output_stream is not None else sys.stdout
    log_lines: list[str] = []

    def say(msg: str) -> None:
        print(msg, file=out)
        log_lines.append(msg)

    revised = Lexicon(entries=list(lexicon.entries), provenance=dict(lexicon.provenance))
    current = set(revised.entries)
    ranked = term_frequency_ranking(reviews, top_k=max_candidates + len(current), stopwords=stopwords)
    candidates = [(tok, cnt) for tok, cnt in ranked if tok not in current][:max_candidates]

    say(f"curation session: {len(candidates)} candidate tokens, page size {page_size}")
    done = False
    for start in range(0, len(candidates), page_size):
        if done:
            break
        page = candidates[start : start + page_size]
        say(f"-- page {start // page_size + 1} --")
        for tok, cnt in page:
            if done:
                break
            while True:
                print(f"  {tok} (count {cnt}) [y/n/a <phrase>/f/q]: ", end="", file=out)
                line = input_stream.readline()
                if not line:
                    done = True
                    break
                cmd = line.strip()
                log_lines.append(f"  {tok} (count {cnt}) -> {cmd}")
                if cmd == "y":
                    if revised.add(tok, "bottom_up"):
                        say(f"  accepted {tok!r}")
                    break
                if cmd in ("n", ""):
                    break
                if cmd.startswith("a "):
                    phrase = cmd[2:].strip()
                    if phrase and revised.add(phrase, "bottom_up"):
                        say(f"  added {phrase!r}")
                    continue
                if cmd == "f":
                    flagged = filter_reviews(reviews, revised)
                    say(f"  filter with revised lexicon flags {len(flagged)} reviews")
                    continue
                if cmd == "q":
                    done = True
                    break
                say("  unrecognized command")
    flagged = filter_reviews(reviews, revised)
    say(
        f"session over: lexicon {len(lexicon)} -> {len(revised)} entries; "
        f"revised filter flags {len(flagged)} reviews"
    )
    if log_path is not None:
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write("\n".join(log_lines) + "\n")
    return revised
