"""Summary quality metrics: entity density, recall, and readability.

Density is entities per whitespace token. Recall matches a summary's
annotated entities against a gold set case-insensitively, with per-entity
aliases absorbing granularity differences between annotators. Readability is
scored by an analyze-then-rate prompt that asks a model for a single 1-5
integer; the four-level human scale used on study sheets is kept separate.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .llm import GenerationParams, ProviderEndpoint, cached_complete, complete
from .prompts import PromptError, first_json_array

log = logging.getLogger(__name__)

LIKERT_READABILITY_LEVELS = ("Unreadable", "Somewhat Readable", "Readable", "Easy to Read")

ENTITY_DEFINITION = (
    "An entity is any functional or non-functional feature of the app that users "
    "mention in their reviews and perceive to either harm or enhance their overall "
    "experience."
)


@dataclass(frozen=True)
class EntityAnnotation:
    """Entities one annotator identified in one summary."""

    summary_id: str
    entities: tuple[str, ...]
    annotator: str

    def __post_init__(self):
        seen = set()
        deduped = []
        for entity in self.entities:
            key = entity.strip().lower()
            if key and key not in seen:
                seen.add(key)
                deduped.append(entity.strip())
        object.__setattr__(self, "entities", tuple(deduped))


@dataclass(frozen=True)
class GoldEntitySet:
    """Canonical entities identified in an app's review sample."""

    app_id: str
    entities: tuple[str, ...]
    aliases: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        known = {e.lower() for e in self.entities}
        for name in self.aliases:
            if name.lower() not in known:
                raise ValueError(f"alias key {name!r} is not a gold entity")


@dataclass(frozen=True)
class DensityReport:
    summary_id: str
    entity_count: int
    token_count: int
    density: float

    def __post_init__(self):
        if self.token_count <= 0:
            raise ValueError("token_count must be positive")
        if self.entity_count < 0:
            raise ValueError("entity_count must be non-negative")


def density(entity_count: int, summary_text: str, summary_id: str = "") -> DensityReport:
    """Entities per whitespace token of the raw summary text."""
    tokens = len(summary_text.split())
    if tokens == 0:
        raise ValueError("summary text is empty")
    return DensityReport(
        summary_id=summary_id,
        entity_count=entity_count,
        token_count=tokens,
        density=entity_count / tokens,
    )


def recall(annotation: EntityAnnotation, gold: GoldEntitySet) -> float:
    """Fraction of gold entities present in the annotation.

    A gold entity counts as matched when the annotation contains its name or
    any of its aliases, compared case-insensitively.
    """
    if not gold.entities:
        raise ValueError("gold entity set is empty")
    found = {entity.lower() for entity in annotation.entities}
    matched = 0
    for name in gold.entities:
        candidates = {name.lower()}
        candidates.update(alias.lower() for alias in gold.aliases.get(name, ()))
        if candidates & found:
            matched += 1
    return matched / len(gold.entities)


# --- readability ----------------------------------------------------------

_READABILITY_TEMPLATE = """Read the following summary of mobile app reviews carefully.

Summary: {summary}

Analyze the summary step by step:
1. Identify awkward or unclear sentences.
2. Look for errors in subject-verb agreement.
3. Ensure sentences are well-formed and not run-ons or fragments.
4. Evaluate word choices: are they precise and natural?
5. Evaluate the semantic cohesion of the summary as a whole.

After your analysis, rate the readability of the summary on a scale from 1
(unreadable) to 5 (perfectly readable and natural). Your final line must be a
single integer between 1 and 5."""


def readability_prompt(summary: str) -> str:
    """Analyze-then-rate prompt asking for a single 1-5 integer."""
    return _READABILITY_TEMPLATE.format(summary=" ".join(summary.split()))


def parse_readability_rating(text: str) -> int:
    """First integer in 1..5 found in the reply."""
    for token in re.findall(r"\d+", text):
        value = int(token)
        if 1 <= value <= 5:
            return value
    raise PromptError(f"no 1-5 rating found in reply: {text[:80]!r}")


def rate_readability(
    summary: str,
    endpoint: ProviderEndpoint,
    params: GenerationParams,
    repeats: int = 1,
    cache_dir: str | Path | None = None,
) -> float:
    """Mean of ``repeats`` model ratings for one summary.

    Repeats are distinguished by a query marker so a cache never collapses
    them into one call.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    ratings = []
    for query in range(repeats):
        prompt = readability_prompt(summary)
        if repeats > 1:
            prompt += f"\n\n(query {query + 1} of {repeats})"
        if cache_dir is not None:
            result = cached_complete(cache_dir, endpoint, prompt, params)
        else:
            result = complete(endpoint, prompt, params)
        ratings.append(parse_readability_rating(result.text))
    return sum(ratings) / len(ratings)


# --- optional model-assisted entity annotation ----------------------------

_EXTRACTION_TEMPLATE = """{definition}

List every entity in the following summary of mobile app reviews.

Summary: {summary}

Respond with a JSON array of strings, one entity per element, nothing else."""


def extract_entities_llm(
    summary: str,
    endpoint: ProviderEndpoint,
    params: GenerationParams,
    summary_id: str = "",
    cache_dir: str | Path | None = None,
) -> EntityAnnotation:
    """Model-assisted entity annotation (a convenience, not a judge).

    The returned annotation is tagged annotator="llm" so downstream reports
    can distinguish it from human annotation files.
    """
    prompt = _EXTRACTION_TEMPLATE.format(
        definition=ENTITY_DEFINITION, summary=" ".join(summary.split())
    )
    if cache_dir is not None:
        result = cached_complete(cache_dir, endpoint, prompt, params)
    else:
        result = complete(endpoint, prompt, params)
    try:
        values = first_json_array(result.text)
    except PromptError:
        log.warning("entity extraction reply had no JSON array; returning empty annotation")
        values = []
    entities = tuple(str(v).strip() for v in values if str(v).strip())
    if not entities:
        log.warning("entity extraction for %s produced no entities", summary_id or "summary")
    return EntityAnnotation(summary_id=summary_id, entities=entities, annotator="llm")


# --- aggregation -----------------------------------------------------------


def aggregate_entity_table(grid: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    """Arithmetic mean per condition over a complete app x condition grid."""
    if not grid:
        raise ValueError("empty grid")
    apps = list(grid)
    conditions = list(grid[apps[0]])
    for app in apps:
        if set(grid[app]) != set(conditions):
            raise ValueError(f"grid is incomplete: app {app!r} lacks some conditions")
    return {
        condition: sum(float(grid[app][condition]) for app in apps) / len(apps)
        for condition in conditions
    }


def read_entity_counts_csv(path: str | Path) -> dict[str, dict[str, float]]:
    """Per-app entity counts: first column "app", one column per condition."""
    grid: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[0] != "app":
            raise ValueError(f"{path}: expected a header starting with 'app'")
        for row in reader:
            app = row.pop("app").strip()
            grid[app] = {cond.strip(): float(v) for cond, v in row.items()}
    return grid


def format_entity_table(grid: Mapping[str, Mapping[str, float]]) -> str:
    """Human-readable grid with an Avg. row, mirroring the report CSVs."""
    conditions = list(next(iter(grid.values())))
    averages = aggregate_entity_table(grid)
    width = max(len("Avg."), *(len(app) for app in grid)) + 2
    header = "app".ljust(width) + "  ".join(c.rjust(8) for c in conditions)
    lines = [header, "-" * len(header)]
    for app, counts in grid.items():
        lines.append(app.ljust(width) + "  ".join(f"{counts[c]:8.2f}" for c in conditions))
    lines.append("-" * len(header))
    lines.append("Avg.".ljust(width) + "  ".join(f"{averages[c]:8.2f}" for c in conditions))
    return "\n".join(lines)


# --- annotation / gold file formats ---------------------------------------


def load_annotations(path: str | Path) -> list[EntityAnnotation]:
    """JSONL: {"summary_id": ..., "annotator": ..., "entities": [...]}."""
    annotations = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            annotations.append(
                EntityAnnotation(
                    summary_id=record["summary_id"],
                    entities=tuple(record.get("entities", ())),
                    annotator=record.get("annotator", "unknown"),
                )
            )
    return annotations


def save_annotations(annotations: Iterable[EntityAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for annotation in annotations:
            fh.write(
                json.dumps(
                    {
                        "summary_id": annotation.summary_id,
                        "annotator": annotation.annotator,
                        "entities": list(annotation.entities),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_gold(path: str | Path) -> GoldEntitySet:
    """JSON: {"app_id": ..., "entities": [{"name": ..., "aliases": [...]}]}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    names = []
    aliases = {}
    for entry in payload.get("entities", ()):
        name = entry["name"].strip()
        names.append(name)
        if entry.get("aliases"):
            aliases[name] = tuple(str(a).strip() for a in entry["aliases"])
    return GoldEntitySet(app_id=payload["app_id"], entities=tuple(names), aliases=aliases)


def write_density_csv(reports: Sequence[DensityReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["summary_id", "entity_count", "token_count", "density"])
        for report in reports:
            writer.writerow(
                [report.summary_id, report.entity_count, report.token_count, f"{report.density:.6f}"]
            )
