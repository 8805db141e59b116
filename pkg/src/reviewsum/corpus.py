"""Review ingestion, English filtering, and bag-of-words normalization.

A corpus is one app's exported reviews (CSV or JSONL). Ingestion validates
records and counts rejects instead of failing on noisy exports. Tokenization
lowercases, strips URLs/HTML/digits/punctuation/emoji, removes stopwords,
and reduces surface forms to lemmas via a bundled table plus suffix rules.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .language import LanguageDetector, default_detector

log = logging.getLogger(__name__)

CSV_COLUMNS = ("id", "app_id", "rating", "title", "body", "posted_at", "likes", "language")


class IngestError(ValueError):
    """Raised when a file yields no valid review records."""


@dataclass(frozen=True)
class Review:
    """One user review with its 1-5 star rating."""

    id: str
    app_id: str
    rating: int
    body: str
    posted_at: date
    title: str | None = None
    likes: int | None = None
    language: str | None = None

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4, 5):
            raise ValueError(f"rating must be 1..5, got {self.rating!r}")
        if not self.body or not self.body.strip():
            raise ValueError("review body must be non-empty")
        if self.likes is not None and self.likes < 0:
            raise ValueError("likes must be non-negative")


@dataclass(frozen=True)
class ReviewCorpus:
    """An app's reviews in stable ingestion order."""

    app_id: str
    reviews: tuple[Review, ...]

    def __post_init__(self):
        seen = set()
        for review in self.reviews:
            if review.app_id != self.app_id:
                raise ValueError(
                    f"review {review.id!r} belongs to {review.app_id!r}, not {self.app_id!r}"
                )
            if review.id in seen:
                raise ValueError(f"duplicate review id {review.id!r}")
            seen.add(review.id)

    def __len__(self) -> int:
        return len(self.reviews)

    def by_rating(self) -> dict[int, list[Review]]:
        groups: dict[int, list[Review]] = {r: [] for r in range(1, 6)}
        for review in self.reviews:
            groups[review.rating].append(review)
        return groups


@dataclass(frozen=True)
class TokenBag:
    """Multiset of normalized, lemmatized terms for one review."""

    review_id: str
    tokens: Counter
    raw_word_count: int

    def __post_init__(self):
        if self.raw_word_count < 0:
            raise ValueError("raw_word_count must be non-negative")
        if len(self.tokens) > self.raw_word_count:
            raise ValueError("more distinct tokens than raw words")


@dataclass
class IngestReport:
    total_records: int = 0
    accepted: int = 0
    duplicates: int = 0
    rejected: Counter = field(default_factory=Counter)

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())


@dataclass
class FilterReport:
    kept: int = 0
    removed: int = 0
    removed_languages: Counter = field(default_factory=Counter)


# --- ingestion ----------------------------------------------------------


def _parse_date(value) -> date:
    if isinstance(value, date):
        return value
    text = str(value).strip()
    # Tolerate full timestamps; only the calendar date is kept.
    return date.fromisoformat(text[:10])


def _coerce_record(raw: Mapping) -> Review:
    def required(key):
        value = raw.get(key)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise ValueError(f"missing {key}")
        return value

    try:
        rating = int(str(required("rating")).strip())
    except ValueError as exc:
        if "missing" in str(exc):
            raise
        raise ValueError("unparseable rating") from exc
    likes_raw = raw.get("likes")
    likes = None
    if likes_raw not in (None, ""):
        try:
            likes = max(0, int(str(likes_raw).strip()))
        except ValueError:
            likes = None
    language = raw.get("language") or None
    if language is not None:
        language = str(language).strip().lower() or None
    title = raw.get("title") or None
    if title is not None:
        title = str(title)
    return Review(
        id=str(required("id")),
        app_id=str(required("app_id")),
        rating=rating,
        body=str(required("body")),
        posted_at=_parse_date(required("posted_at")),
        title=title,
        likes=likes,
        language=language,
    )


def _iter_records(path: Path, fmt: str) -> Iterable[tuple[Mapping | None, str]]:
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    yield None, "unparseable"
                    continue
                if not isinstance(obj, dict):
                    yield None, "unparseable"
                    continue
                yield obj, ""
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                yield row, ""
    else:
        raise ValueError(f"unknown format {fmt!r} (expected csv or jsonl)")


def ingest(path: str | Path, fmt: str | None = None) -> tuple[ReviewCorpus, IngestReport]:
    """Read an exported review file into a corpus.

    Malformed records are skipped and tallied in the report; duplicate ids
    keep the first occurrence. Raises IngestError when nothing valid remains.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    report = IngestReport()
    reviews: list[Review] = []
    seen_ids: set[str] = set()
    app_id: str | None = None
    for raw, problem in _iter_records(path, fmt):
        report.total_records += 1
        if raw is None:
            report.rejected[problem] += 1
            continue
        try:
            review = _coerce_record(raw)
        except (ValueError, TypeError) as exc:
            reason = str(exc)
            if "missing body" in reason or "non-empty" in reason:
                report.rejected["empty_body"] += 1
            elif "rating" in reason:
                report.rejected["bad_rating"] += 1
            elif "missing" in reason:
                report.rejected["missing_field"] += 1
            else:
                report.rejected["malformed"] += 1
            continue
        if app_id is None:
            app_id = review.app_id
        if review.app_id != app_id:
            report.rejected["app_id_mismatch"] += 1
            continue
        if review.id in seen_ids:
            report.duplicates += 1
            continue
        seen_ids.add(review.id)
        reviews.append(review)
        report.accepted += 1
    if not reviews:
        raise IngestError(f"no valid review records in {path}")
    if report.rejected_total or report.duplicates:
        log.info(
            "ingest %s: accepted %d, rejected %d, duplicates %d",
            path.name,
            report.accepted,
            report.rejected_total,
            report.duplicates,
        )
    return ReviewCorpus(app_id=app_id, reviews=tuple(reviews)), report


def review_to_record(review: Review) -> dict:
    return {
        "id": review.id,
        "app_id": review.app_id,
        "rating": review.rating,
        "title": review.title,
        "body": review.body,
        "posted_at": review.posted_at.isoformat(),
        "likes": review.likes,
        "language": review.language,
    }


def save_corpus(corpus: ReviewCorpus, path: str | Path, fmt: str | None = None) -> None:
    """Write a corpus back out in the ingestion schema (round-trip safe)."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for review in corpus.reviews:
                fh.write(json.dumps(review_to_record(review), ensure_ascii=False) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for review in corpus.reviews:
                record = review_to_record(review)
                writer.writerow({k: ("" if record[k] is None else record[k]) for k in CSV_COLUMNS})
    else:
        raise ValueError(f"unknown format {fmt!r}")


# --- language filtering -------------------------------------------------


def filter_english(
    corpus: ReviewCorpus,
    detector: LanguageDetector | None = None,
    trust_language_field: bool = False,
) -> tuple[ReviewCorpus, FilterReport]:
    """Keep only reviews detected as English.

    With ``trust_language_field`` a review's own ``language`` field decides
    when present; otherwise every body goes through the detector.
    """
    detector = detector if detector is not None else default_detector()
    report = FilterReport()
    kept: list[Review] = []
    for review in corpus.reviews:
        if trust_language_field and review.language:
            lang = review.language
        else:
            lang, _ = detector.detect(review.body)
        if lang == "en":
            kept.append(review)
            report.kept += 1
        else:
            report.removed += 1
            report.removed_languages[lang] += 1
    if not kept:
        log.warning("filter_english: no English reviews left for app %s", corpus.app_id)
    return ReviewCorpus(app_id=corpus.app_id, reviews=tuple(kept)), report


# --- normalization and tokenization -------------------------------------

_URL_RE = re.compile(r"https?://\S+|www\.\S+")
_TAG_RE = re.compile(r"<[^>]*>")


def normalize(text: str) -> str:
    """Lowercase and reduce to letters: URLs and HTML tags are cut out,
    then digits, punctuation, and symbols are stripped in place (so one raw
    word never becomes several); whitespace collapses to single spaces."""
    lowered = text.lower()
    lowered = _URL_RE.sub(" ", lowered)
    lowered = _TAG_RE.sub(" ", lowered)
    letters = "".join(ch for ch in lowered if ch.isalpha() or ch.isspace())
    return " ".join(letters.split())


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load a one-word-per-line stopword file (bundled list by default)."""
    if path is None:
        text = resources.files("reviewsum").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(word.strip() for word in text.splitlines() if word.strip())


class Lemmatizer:
    """Dictionary lookup with suffix-stripping fallback.

    Fallback rules: -ies -> -y, -es, -s, -ed, -ing (with doubled-consonant
    cleanup); anything else - including short stems - passes through, so the
    function is total.
    """

    _SIBILANT_ES = ("sses", "shes", "ches", "xes", "zes")
    _VOWELS = set("aeiou")

    def __init__(self, table: Mapping[str, str]):
        self.table = dict(table)

    @classmethod
    def from_file(cls, path: str | Path | None = None) -> "Lemmatizer":
        """Load "surface<TAB>lemma" lines (bundled table by default)."""
        if path is None:
            text = resources.files("reviewsum").joinpath("data/lemmas.tsv").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        table = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or "\t" not in line:
                continue
            surface, lemma = line.split("\t", 1)
            table[surface.strip()] = lemma.strip()
        return cls(table)

    def _undouble(self, stem: str) -> str:
        if (
            len(stem) >= 3
            and stem[-1] == stem[-2]
            and stem[-1] not in self._VOWELS
            and stem[-1] not in "ls"
        ):
            return stem[:-1]
        return stem

    def __call__(self, word: str) -> str:
        hit = self.table.get(word)
        if hit is not None:
            return hit
        if len(word) > 4 and word.endswith("ies"):
            return word[:-3] + "y"
        if len(word) > 4 and word.endswith(self._SIBILANT_ES):
            return word[:-2]
        if len(word) > 3 and word.endswith("s") and not word.endswith(("ss", "us", "is")):
            return word[:-1]
        if len(word) > 4 and word.endswith("ed"):
            return self._undouble(word[:-2])
        if len(word) > 5 and word.endswith("ing"):
            return self._undouble(word[:-3])
        return word


def tokenize_bag(
    review: Review,
    stopwords: frozenset[str] | set[str],
    lemmatizer: Callable[[str], str],
) -> TokenBag:
    """Reduce a review body to its multiset of lemmatized content terms.

    Stopwords are dropped both before and after lemmatization so the bag
    never contains a listed stopword. ``raw_word_count`` is the whitespace
    token count of the original body.
    """
    tokens: Counter = Counter()
    for word in normalize(review.body).split():
        if word in stopwords:
            continue
        lemma = lemmatizer(word)
        if not lemma or lemma in stopwords:
            continue
        tokens[lemma] += 1
    return TokenBag(review_id=review.id, tokens=tokens, raw_word_count=len(review.body.split()))


def tokenize_corpus(
    corpus: ReviewCorpus,
    stopwords: frozenset[str] | None = None,
    lemmatizer: Callable[[str], str] | None = None,
) -> dict[str, TokenBag]:
    """Token bags keyed by review id, using bundled resources by default."""
    stopwords = stopwords if stopwords is not None else load_stopwords()
    lemmatizer = lemmatizer if lemmatizer is not None else Lemmatizer.from_file()
    return {r.id: tokenize_bag(r, stopwords, lemmatizer) for r in corpus.reviews}
