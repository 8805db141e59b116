from __future__ import annotations

from datetime import date, timedelta

import pytest

from reviewsum.corpus import Review, ReviewCorpus


def make_review(
    i: int,
    body: str,
    rating: int = 3,
    app_id: str = "demo",
    posted: date | None = None,
    **kwargs,
) -> Review:
    return Review(
        id=f"r{i:03d}",
        app_id=app_id,
        rating=rating,
        body=body,
        posted_at=posted or (date(2024, 1, 1) + timedelta(days=i)),
        **kwargs,
    )


def make_corpus(bodies_and_ratings, app_id: str = "demo") -> ReviewCorpus:
    reviews = tuple(
        make_review(i, body, rating, app_id=app_id)
        for i, (body, rating) in enumerate(bodies_and_ratings)
    )
    return ReviewCorpus(app_id=app_id, reviews=reviews)


@pytest.fixture
def small_corpus() -> ReviewCorpus:
    return make_corpus(
        [
            ("The drivers keep canceling my rides every single day", 1),
            ("Great app, smooth rides and friendly drivers all around", 5),
            ("The new update crashed twice but support responded quickly", 3),
            ("Surge pricing makes evening rides absurdly expensive lately", 2),
            ("Love the scheduled rides feature, never late for work", 5),
        ]
    )
