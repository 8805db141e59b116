"""Frequency-based extractive summarization with redundancy control.

Review sentences are scored by their mean term weight (same rule as review
ranking), embedded as the unweighted mean of their word vectors, and selected
greedily by descending score. A candidate joins the summary only if its
cosine similarity to every already-selected sentence stays below the
threshold and the running whitespace word count stays within budget; the
top-scored sentence is always taken, even when it alone exceeds the budget.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import _TAG_RE, _URL_RE, Review, ReviewCorpus, TokenBag
from .ranking import TfIdfModel, fit, score_review

log = logging.getLogger(__name__)

_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_ABBREVIATIONS = frozenset(
    {"e.g.", "i.e.", "etc.", "vs.", "mr.", "mrs.", "ms.", "dr.", "st.", "no.", "approx.", "u.s."}
)
MIN_SENTENCE_WORDS = 3


@dataclass
class SentenceUnit:
    """One review sentence with its score and embedding."""

    review_id: str
    index: int
    text: str
    tokens: list[str] = field(default_factory=list)
    score: float = 0.0
    embedding: np.ndarray | None = None

    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: Mapping[str, np.ndarray]

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dimension must be positive")


@dataclass(frozen=True)
class ExtractiveConfig:
    similarity_threshold: float = 0.1
    word_budget: int = 120

    def __post_init__(self):
        if not 0 < self.similarity_threshold <= 1:
            raise ValueError("similarity_threshold must be in (0, 1]")
        if self.word_budget <= 0:
            raise ValueError("word_budget must be positive")


def split_sentences(review: Review, include_title: bool = False) -> list[SentenceUnit]:
    """Split on ., !, ? followed by whitespace (or end), keeping order.

    URLs and HTML tags are stripped first so excerpts stay quotable and URL
    dots never split. A short abbreviation list prevents false splits;
    fragments under three words are discarded. A body with no terminator is
    one sentence.
    """
    text = review.body
    if include_title and review.title:
        text = f"{review.title}. {text}"
    text = _TAG_RE.sub(" ", _URL_RE.sub(" ", text))
    pieces: list[str] = []
    for chunk in _SPLIT_RE.split(text):
        chunk = " ".join(chunk.split())
        if not chunk:
            continue
        # A split right after an abbreviation was spurious; glue it back.
        if pieces and pieces[-1].split()[-1].lower() in _ABBREVIATIONS:
            pieces[-1] = f"{pieces[-1]} {chunk}"
        else:
            pieces.append(chunk)
    units = []
    for position, piece in enumerate(pieces):
        if len(piece.split()) >= MIN_SENTENCE_WORDS:
            units.append(SentenceUnit(review_id=review.id, index=position, text=piece))
    return units


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read "token v1 v2 ... vd" lines; the first line fixes the dimension."""
    vectors: dict[str, np.ndarray] = {}
    dim = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim == 0:
                dim = len(values)
                if dim == 0:
                    raise ValueError(f"{path}:{lineno}: no vector components")
            if len(values) != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} components, found {len(values)}"
                )
            vectors[token] = np.asarray([float(v) for v in values], dtype=np.float64)
    if not vectors:
        raise ValueError(f"{path}: empty embedding file")
    return EmbeddingTable(dim=dim, vectors=vectors)


def embed_sentence(table: EmbeddingTable, tokens: Sequence[str]) -> np.ndarray:
    """Unweighted mean of in-vocabulary token vectors (zero vector if none)."""
    hits = [table.vectors[t] for t in tokens if t in table.vectors]
    if not hits:
        log.debug("sentence has no in-vocabulary tokens: %s", tokens[:8])
        return np.zeros(table.dim, dtype=np.float64)
    return np.mean(hits, axis=0)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, defined as 0 when either vector is all-zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _ordered(sentences: Sequence[SentenceUnit]) -> list[SentenceUnit]:
    return sorted(sentences, key=lambda s: (-s.score, s.review_id, s.index))


def summarize_extractive(
    sentences: Sequence[SentenceUnit],
    config: ExtractiveConfig = ExtractiveConfig(),
) -> list[SentenceUnit]:
    """Greedy selection under the redundancy threshold and word budget.

    Candidates are visited in descending score order (ties: review id, then
    sentence index). A candidate is skipped if it is too similar to any
    selected sentence or if adding it would exceed the budget; skipping never
    ends the scan, so later, smaller sentences can still fit.
    """
    selected: list[SentenceUnit] = []
    words_used = 0
    for unit in _ordered(sentences):
        if unit.embedding is None:
            raise ValueError(f"sentence {unit.review_id}:{unit.index} has no embedding")
        if selected:
            similarity = max(cosine(unit.embedding, kept.embedding) for kept in selected)
            if similarity >= config.similarity_threshold:
                continue
            if words_used + unit.word_count() > config.word_budget:
                continue
        selected.append(unit)
        words_used += unit.word_count()
    return selected


def prepare_sentences(
    corpus: ReviewCorpus,
    table: EmbeddingTable,
    tokenizer: Callable[[Review], TokenBag],
    include_title: bool = False,
) -> tuple[list[SentenceUnit], TfIdfModel]:
    """Split, tokenize, score, and embed every sentence of a corpus.

    Sentences are the scoring documents: the term-weight model is fitted over
    the per-sentence token bags.
    """
    units: list[SentenceUnit] = []
    bags: list[TokenBag] = []
    for review in corpus.reviews:
        for unit in split_sentences(review, include_title=include_title):
            sentence_review = Review(
                id=review.id,
                app_id=review.app_id,
                rating=review.rating,
                body=unit.text,
                posted_at=review.posted_at,
            )
            bag = tokenizer(sentence_review)
            unit.tokens = sorted(bag.tokens.elements())
            units.append(unit)
            bags.append(bag)
    if not units:
        raise ValueError(f"corpus {corpus.app_id} produced no sentences")
    model = fit(bags)
    for unit, bag in zip(units, bags):
        unit.score = score_review(model, bag).score
        unit.embedding = embed_sentence(table, unit.tokens)
    return units, model


def summary_text(selected: Sequence[SentenceUnit]) -> str:
    return " ".join(unit.text for unit in selected)


def summary_provenance(selected: Sequence[SentenceUnit]) -> list[dict]:
    return [
        {
            "review_id": unit.review_id,
            "sentence_index": unit.index,
            "score": unit.score,
            "text": unit.text,
        }
        for unit in selected
    ]


def write_extractive_summary(
    selected: Sequence[SentenceUnit], text_path: str | Path, json_path: str | Path
) -> None:
    Path(text_path).write_text(summary_text(selected) + "\n", encoding="utf-8")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary_provenance(selected), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
