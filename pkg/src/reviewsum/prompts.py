"""Prompt templates and response parsing for chain-of-density summarization.

Three templates ship as text assets: the original chain-of-density prompt
(``cod``, 80-word budget), its app-review adaptation (``cod_r``, 120 words,
app-feature entity definition, app-name/PII exclusions), and a plain
``vanilla`` summarization prompt. Rendering substitutes ``{{app}}``,
``{{reviews}}``, ``{{word_budget}}``, and ``{{iterations}}`` and, for the
chain prompts, appends the JSON output instruction the parser expects.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import Review

CHAIN_TEMPLATE_IDS = ("cod", "cod_r")
JSON_OUTPUT_CLAUSE = (
    "Answer in JSON. The JSON should be a list of dictionaries whose keys are "
    '"missing_entities" and "denser_summary".'
)

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")
_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*(.*?)```", re.S)


class PromptError(ValueError):
    """Rendering or response parsing failed."""


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    word_budget: int
    iterations: int

    def __post_init__(self):
        if self.word_budget <= 0 or self.iterations <= 0:
            raise ValueError("word_budget and iterations must be positive")


@dataclass
class ChainIteration:
    missing_entities: list[str]
    summary: str


@dataclass
class SummaryChain:
    """Parsed multi-iteration output of a chain-of-density prompt."""

    app_id: str
    prompt_id: str
    iterations: list[ChainIteration]
    short_chain: bool = False
    flags: list[str] = field(default_factory=list)


def _manifest() -> list[dict]:
    text = resources.files("reviewsum").joinpath("templates/manifest.json").read_text("utf-8")
    return json.loads(text)


def builtin_template_ids() -> list[str]:
    return [entry["id"] for entry in _manifest()]


def load_template(template_id: str) -> PromptTemplate:
    """Load a bundled template by id (cod, cod_r, or vanilla)."""
    for entry in _manifest():
        if entry["id"] == template_id:
            body = (
                resources.files("reviewsum")
                .joinpath(f"templates/{entry['file']}")
                .read_text("utf-8")
            )
            return PromptTemplate(
                id=template_id,
                body=body,
                word_budget=entry["word_budget"],
                iterations=entry["iterations"],
            )
    raise PromptError(f"unknown template id {template_id!r}; have {builtin_template_ids()}")


def load_template_file(
    path: str | Path, template_id: str | None = None, word_budget: int = 120, iterations: int = 5
) -> PromptTemplate:
    """Load a user-supplied template file with the same placeholder syntax."""
    path = Path(path)
    return PromptTemplate(
        id=template_id or path.stem,
        body=path.read_text(encoding="utf-8"),
        word_budget=word_budget,
        iterations=iterations,
    )


def format_review_block(reviews: Sequence) -> str:
    """Number the reviews and prefix each with its star rating.

    Accepts Review objects, (rating, text) pairs, or bare strings.
    """
    if not reviews:
        raise PromptError("cannot render a prompt with no reviews")
    lines = []
    for position, item in enumerate(reviews, start=1):
        if isinstance(item, Review):
            rating, text = item.rating, item.body
        elif isinstance(item, tuple):
            rating, text = item
        else:
            rating, text = None, str(item)
        text = " ".join(str(text).split())
        if rating is None:
            lines.append(f"[{position}] {text}")
        else:
            lines.append(f"[{position}] ({rating}★) {text}")
    return "\n".join(lines)


def render(
    template: PromptTemplate,
    app: str,
    reviews: Sequence,
    word_budget: int | None = None,
    iterations: int | None = None,
) -> str:
    """Substitute all placeholders and append the output-format clause.

    Raises PromptError on empty review lists or unresolved placeholders.
    """
    values = {
        "app": app,
        "reviews": format_review_block(reviews),
        "word_budget": str(word_budget if word_budget is not None else template.word_budget),
        "iterations": str(iterations if iterations is not None else template.iterations),
    }

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in values:
            raise PromptError(f"template {template.id!r} has unknown placeholder {{{{{name}}}}}")
        return values[name]

    rendered = _PLACEHOLDER_RE.sub(substitute, template.body).strip()
    if template.id in CHAIN_TEMPLATE_IDS:
        rendered = f"{rendered}\n\n{JSON_OUTPUT_CLAUSE}"
    return rendered


# --- response parsing ----------------------------------------------------


def _strip_fences(text: str) -> str:
    match = _FENCE_RE.search(text)
    return match.group(1).strip() if match else text.strip()


def first_json_array(text: str):
    """Extract and decode the first JSON array in a possibly chatty reply."""
    candidate = _strip_fences(text)
    decoder = json.JSONDecoder()
    for start in range(len(candidate)):
        if candidate[start] != "[":
            continue
        try:
            value, _ = decoder.raw_decode(candidate, start)
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise PromptError("no JSON array found in response")


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace(" ", "_")


def _entities_from(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [part.strip() for part in value.split(";") if part.strip()]
    if isinstance(value, list):
        return [str(part).strip() for part in value if str(part).strip()]
    return [str(value).strip()]


def parse_cod_response(
    text: str,
    expected_iterations: int = 5,
    app_id: str = "",
    prompt_id: str = "cod_r",
) -> SummaryChain:
    """Parse a chain reply into its per-iteration entities and summaries.

    Tolerates code fences and leading prose around the JSON array, and
    case/underscore/space variation in the object keys. Fewer elements than
    expected produce a flagged short chain; extras beyond the expected count
    are dropped. An element without a non-empty summary is an error.
    """
    elements = first_json_array(text)
    if not elements:
        raise PromptError("response JSON array is empty")
    iterations: list[ChainIteration] = []
    for position, element in enumerate(elements[:expected_iterations], start=1):
        if not isinstance(element, dict):
            raise PromptError(f"iteration {position} is not a JSON object")
        by_key = {_normalize_key(k): v for k, v in element.items()}
        summary = by_key.get("denser_summary") or by_key.get("summary")
        if not summary or not str(summary).strip():
            raise PromptError(f"iteration {position} is missing its summary field")
        iterations.append(
            ChainIteration(
                missing_entities=_entities_from(by_key.get("missing_entities")),
                summary=str(summary).strip(),
            )
        )
    chain = SummaryChain(app_id=app_id, prompt_id=prompt_id, iterations=iterations)
    if len(iterations) < expected_iterations:
        chain.short_chain = True
        chain.flags.append(
            f"expected {expected_iterations} iterations, response contained {len(iterations)}"
        )
    if len(elements) > expected_iterations:
        chain.flags.append(
            f"response contained {len(elements)} elements; extras beyond "
            f"{expected_iterations} were ignored"
        )
    return chain


def parse_vanilla_response(text: str) -> str:
    """Strip fences/wrappers and return the trimmed summary text."""
    summary = _strip_fences(text)
    if not summary:
        raise PromptError("empty response")
    return summary


def chain_to_dict(chain: SummaryChain) -> dict:
    return {
        "app_id": chain.app_id,
        "prompt_id": chain.prompt_id,
        "short_chain": chain.short_chain,
        "flags": list(chain.flags),
        "iterations": [
            {"missing_entities": it.missing_entities, "summary": it.summary}
            for it in chain.iterations
        ],
    }


def chain_from_dict(payload: dict) -> SummaryChain:
    return SummaryChain(
        app_id=payload["app_id"],
        prompt_id=payload["prompt_id"],
        short_chain=payload.get("short_chain", False),
        flags=list(payload.get("flags", [])),
        iterations=[
            ChainIteration(
                missing_entities=list(it.get("missing_entities", [])), summary=it["summary"]
            )
            for it in payload["iterations"]
        ],
    )
