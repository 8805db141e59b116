"""Rating-stratified sample construction.

Quotas follow largest-remainder (Hamilton) apportionment over the star-rating
strata, computed in exact integer arithmetic so ties are reproducible. When a
stratum cannot fill its quota the whole stratum is taken and the shortfall is
re-apportioned over the remaining strata by the same rule.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .ranking import ScoredReview

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_SIZE = 350


@dataclass(frozen=True)
class SamplingPlan:
    """Per-rating quotas summing to (at most) the requested sample size."""

    total_k: int
    quotas: dict[int, int]
    capped: tuple[int, ...] = ()

    def __post_init__(self):
        for rating, quota in self.quotas.items():
            if quota < 0:
                raise ValueError(f"quota for rating {rating} is negative")


@dataclass
class StratifiedSample:
    app_id: str
    selected: dict[int, list[str]]
    flags: list[str] = field(default_factory=list)

    def total(self) -> int:
        return sum(len(ids) for ids in self.selected.values())


def _hamilton(population: Mapping[int, int], seats: int) -> dict[int, int]:
    """Largest-remainder apportionment in integer arithmetic.

    Remainder ties break toward the larger stratum, then the lower rating.
    """
    total = sum(population.values())
    quotas = {}
    remainders = []
    assigned = 0
    for rating in sorted(population):
        count = population[rating]
        base, rem_numerator = divmod(seats * count, total)
        quotas[rating] = base
        assigned += base
        remainders.append((-rem_numerator, -count, rating))
    remainders.sort()
    for _, _, rating in remainders[: seats - assigned]:
        quotas[rating] += 1
    return quotas


def allocate(population: Mapping[int, int], total_k: int = DEFAULT_SAMPLE_SIZE) -> SamplingPlan:
    """Build per-rating quotas proportional to the population's rating mix.

    The whole population is returned (and flagged via ``capped``) whenever it
    is no larger than ``total_k``.
    """
    if total_k < 1:
        raise ValueError("total_k must be >= 1")
    population = {r: c for r, c in population.items() if c > 0}
    total = sum(population.values())
    if total == 0:
        raise ValueError("population is empty")
    if total <= total_k:
        log.warning("population (%d) does not exceed K=%d; taking everything", total, total_k)
        return SamplingPlan(
            total_k=total_k, quotas=dict(population), capped=tuple(sorted(population))
        )

    capped: dict[int, int] = {}
    open_strata = dict(population)
    seats = total_k
    while True:
        quotas = _hamilton(open_strata, seats)
        overfull = [r for r, q in quotas.items() if q > open_strata[r]]
        if not overfull:
            break
        for rating in overfull:
            capped[rating] = open_strata.pop(rating)
            seats -= capped[rating]
        if not open_strata:
            quotas = {}
            break
    quotas.update(capped)
    return SamplingPlan(total_k=total_k, quotas=quotas, capped=tuple(sorted(capped)))


def select(
    ranked: Mapping[int, Sequence[ScoredReview]],
    plan: SamplingPlan,
    app_id: str = "",
) -> StratifiedSample:
    """Take the quota-prefix of each rating's descending ranking."""
    sample = StratifiedSample(app_id=app_id, selected={})
    for rating in sorted(plan.quotas):
        quota = plan.quotas[rating]
        stratum = list(ranked.get(rating, ()))
        if len(stratum) < quota:
            sample.flags.append(
                f"rating {rating}: stratum has {len(stratum)} reviews, quota was {quota}"
            )
            quota = len(stratum)
        sample.selected[rating] = [s.review_id for s in stratum[:quota]]
    for rating in plan.capped:
        sample.flags.append(f"rating {rating}: whole stratum taken (population below quota)")
    return sample


def write_manifest(
    sample: StratifiedSample,
    ranked: Mapping[int, Sequence[ScoredReview]],
    path: str | Path,
) -> None:
    """Sample manifest CSV: app_id, rating, review_id, score, rank_in_stratum."""
    scores = {s.review_id: s.score for stratum in ranked.values() for s in stratum}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["app_id", "rating", "review_id", "score", "rank_in_stratum"])
        for rating in sorted(sample.selected):
            for position, review_id in enumerate(sample.selected[rating], start=1):
                writer.writerow(
                    [sample.app_id, rating, review_id, f"{scores[review_id]:.12g}", position]
                )


def read_manifest(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
