"""Hybrid TF.IDF informativeness ranking.

A term's weight in a review is its in-review frequency times the natural log
of N over its document frequency; a review's score is the mean weight over
its distinct terms. Terms present in every document therefore carry zero
signal, and empty bags score zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import ReviewCorpus, TokenBag

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TfIdfModel:
    """Document frequencies over a fixed corpus of token bags."""

    doc_count: int
    doc_freq: Mapping[str, int]

    def __post_init__(self):
        if self.doc_count < 1:
            raise ValueError("doc_count must be >= 1")
        for term, df in self.doc_freq.items():
            if not 1 <= df <= self.doc_count:
                raise ValueError(f"df({term!r}) = {df} out of range 1..{self.doc_count}")


@dataclass(frozen=True)
class ScoredReview:
    review_id: str
    score: float


def fit(bags: Sequence[TokenBag]) -> TfIdfModel:
    """Count, per term, the number of bags containing it at least once."""
    if not bags:
        raise ValueError("cannot fit a model on zero bags")
    doc_freq: dict[str, int] = {}
    for bag in bags:
        for term in bag.tokens:
            doc_freq[term] = doc_freq.get(term, 0) + 1
    return TfIdfModel(doc_count=len(bags), doc_freq=doc_freq)


def term_weight(model: TfIdfModel, term: str, bag: TokenBag) -> float:
    """f(term in bag) * ln(N / df(term)); zero when the term is absent.

    A term carried by the bag but unseen at fit time is treated as maximally
    rare (df = 1) and logged loudly, since it signals a model/corpus mismatch.
    """
    frequency = bag.tokens.get(term, 0)
    if frequency == 0:
        return 0.0
    df = model.doc_freq.get(term)
    if df is None:
        log.warning(
            "term %r in review %s was never seen by the model; assuming df=1",
            term,
            bag.review_id,
        )
        df = 1
    return frequency * math.log(model.doc_count / df)


def score_review(model: TfIdfModel, bag: TokenBag) -> ScoredReview:
    """Mean term weight over the bag's distinct terms (empty bag scores 0)."""
    if not bag.tokens:
        return ScoredReview(review_id=bag.review_id, score=0.0)
    total = sum(term_weight(model, term, bag) for term in bag.tokens)
    return ScoredReview(review_id=bag.review_id, score=total / len(bag.tokens))


def rank(
    corpus: ReviewCorpus,
    model: TfIdfModel,
    bags: Mapping[str, TokenBag],
) -> list[ScoredReview]:
    """Score every review and sort descending.

    Ties break deterministically: more recent posted_at first, then id
    ascending. Raises if any review lacks a bag.
    """
    missing = [r.id for r in corpus.reviews if r.id not in bags]
    if missing:
        raise ValueError(f"bags missing for reviews: {missing[:5]}")
    by_id = {r.id: r for r in corpus.reviews}
    scored = [score_review(model, bags[r.id]) for r in corpus.reviews]
    scored.sort(key=lambda s: (-s.score, -by_id[s.review_id].posted_at.toordinal(), s.review_id))
    return scored


def save_model(model: TfIdfModel, path: str | Path) -> None:
    """Dump as a text file: header "N=<count>", then "term<TAB>df" lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"N={model.doc_count}\n")
        for term in sorted(model.doc_freq):
            fh.write(f"{term}\t{model.doc_freq[term]}\n")


def load_model(path: str | Path) -> TfIdfModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("N="):
        raise ValueError(f"{path}: expected a first line of the form N=<count>")
    doc_count = int(lines[0][2:])
    doc_freq: dict[str, int] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        term, df = line.split("\t", 1)
        doc_freq[term] = int(df)
    return TfIdfModel(doc_count=doc_count, doc_freq=doc_freq)


def rank_by_rating(
    corpus: ReviewCorpus,
    model: TfIdfModel,
    bags: Mapping[str, TokenBag],
) -> dict[int, list[ScoredReview]]:
    """Per-star-rating descending rankings (the sampling module's input)."""
    order = {s.review_id: i for i, s in enumerate(rank(corpus, model, bags))}
    groups: dict[int, list[ScoredReview]] = {r: [] for r in range(1, 6)}
    scores = {s.review_id: s for s in (score_review(model, bags[r.id]) for r in corpus.reviews)}
    for review in sorted(corpus.reviews, key=lambda r: order[r.id]):
        groups[review.rating].append(scores[review.id])
    return groups
