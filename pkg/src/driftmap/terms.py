"""Per-concept trending-term extraction: cleaning, n-grams, and tf-idf.

Each concept's posts are concatenated into one document, so idf contrasts
concepts against each other rather than posts against posts; that is what
makes the top terms characterize a theme. Smoothed idf keeps terms present in
every concept from zeroing out entirely.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

# Deliberately small; enough to keep function words out of the term tables.
STOPWORDS = frozenset(
    """a about above after again all am an and any are as at be because been
    before being below between both but by cannot could did do does doing down
    during each few for from further had has have having he her here hers him
    his how i if in into is it its itself just me more most my myself no nor
    not of off on once only or other our ours out over own same she should so
    some such than that the their theirs them then there these they this those
    through to too under until up very was we were what when where which while
    who whom why will with you your yours""".split()
)

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_KEEP_RE = re.compile(r"[^a-z0-9']+")


@dataclass(frozen=True)
class CleanText:
    id: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class TermScore:
    term: str
    n: int
    concept: int
    tfidf: float


def preprocess(text: str, post_id: str = "", link_titles: Mapping[str, str] | None = None) -> CleanText:
    """Lowercase, swap links for their page titles (or drop them), strip specials, tokenize.

    Post-cleaning tokens contain only [a-z0-9'] characters; empty output is fine.
    """

    def _link(match: re.Match) -> str:
        if link_titles:
            return " " + link_titles.get(match.group(0), "") + " "
        return " "

    text = _URL_RE.sub(_link, text)
    text = text.lower()
    text = _KEEP_RE.sub(" ", text)
    tokens = tuple(tok for tok in text.split() if tok)
    return CleanText(id=post_id, tokens=tokens)


def ngrams(tokens: Sequence[str], n: int) -> list[str]:
    """Contiguous n-token windows joined by single spaces.

    Stopword unigrams are dropped; longer grams are dropped only when every
    word in them is a stopword.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2, or 3; got {n}")
    out = []
    for i in range(len(tokens) - n + 1):
        window = tokens[i : i + n]
        if all(w in STOPWORDS for w in window):
            continue
        out.append(" ".join(window))
    return out


def tfidf_by_concept(posts_by_concept: Mapping[int, Iterable[CleanText]]) -> list[TermScore]:
    """Score every (term, concept) pair: tf within the concept's pooled posts, idf across concepts.

    N-grams never cross post boundaries (so scores are invariant to post order
    within a concept); tf normalizes per n-gram size; idf = ln((1+K)/(1+df)) + 1
    with df counting concepts that contain the term at all.
    """
    docs: dict[int, list[tuple[str, ...]]] = {}
    for concept, posts in posts_by_concept.items():
        docs[int(concept)] = [tuple(post.tokens) for post in posts]
    if not docs or all(all(len(t) == 0 for t in posts) for posts in docs.values()):
        raise ValueError("empty corpus: no concept has any tokens")

    n_concepts = len(docs)
    scores: list[TermScore] = []
    for n in (1, 2, 3):
        counts: dict[int, dict[str, int]] = {}
        for concept, posts in docs.items():
            bag: dict[str, int] = {}
            for tokens in posts:
                for g in ngrams(tokens, n):
                    bag[g] = bag.get(g, 0) + 1
            counts[concept] = bag
        df: dict[str, int] = {}
        for bag in counts.values():
            for term in bag:
                df[term] = df.get(term, 0) + 1
        for concept, bag in counts.items():
            total = sum(bag.values())
            if total == 0:
                continue
            for term, count in bag.items():
                idf = math.log((1 + n_concepts) / (1 + df[term])) + 1.0
                scores.append(TermScore(term=term, n=n, concept=concept, tfidf=(count / total) * idf))
    return scores


def top_terms(
    scores: Sequence[TermScore],
    concept: int,
    per_size: int,
    concepts: set[int] | None = None,
) -> dict[int, list[TermScore]]:
    """Top-N terms of one concept for each n-gram size; ties break lexicographically.

    `concepts` widens the known universe so a concept whose posts produced no
    terms yields empty rows instead of an unknown-concept error.
    """
    if per_size < 1:
        raise ValueError("per_size must be >= 1")
    known = {s.concept for s in scores} | (concepts or set())
    if concept not in known:
        raise ValueError(f"unknown concept id {concept}")
    out: dict[int, list[TermScore]] = {}
    for n in (1, 2, 3):
        pool = [s for s in scores if s.concept == concept and s.n == n]
        pool.sort(key=lambda s: (-s.tfidf, s.term))
        out[n] = pool[:per_size]
    return out
