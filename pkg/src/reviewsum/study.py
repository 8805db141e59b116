"""Counterbalanced readability study materials.

Participants rate the third, fourth, and fifth chain iterations of one app's
summaries on a four-level scale. To neutralize order effects, the six
presentation orders of those three summaries are all used, each at least
once per app; participants are assigned round-robin over (app, order) pairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .evaluation import LIKERT_READABILITY_LEVELS
from .prompts import SummaryChain

STUDY_ITERATIONS = (3, 4, 5)
PRESENTATION_ORDERS = (
    (3, 4, 5),
    (4, 5, 3),
    (5, 4, 3),
    (3, 5, 4),
    (4, 3, 5),
    (5, 3, 4),
)


@dataclass(frozen=True)
class StudySheet:
    app_id: str
    order: tuple[int, int, int]
    summaries: tuple[str, str, str]

    def render(self) -> str:
        lines = [
            f"Readability study sheet - app: {self.app_id}",
            "",
            "Please read each summary and rate its readability by circling one level.",
            "",
        ]
        for label, text in zip("ABC", self.summaries):
            lines.append(f"Summary {label}:")
            lines.append(text)
            lines.append("")
            lines.append("Rating: " + " / ".join(LIKERT_READABILITY_LEVELS))
            lines.append("")
        return "\n".join(lines)


def build_study_sheets(chains: Mapping[str, SummaryChain]) -> list[StudySheet]:
    """Six sheets per app, one per presentation order.

    Every chain must have at least five iterations; the sheets hide the
    iteration numbers behind A/B/C labels.
    """
    if not chains:
        raise ValueError("no apps to build study sheets for")
    sheets = []
    for app_id in sorted(chains):
        chain = chains[app_id]
        if len(chain.iterations) < max(STUDY_ITERATIONS):
            raise ValueError(
                f"app {app_id}: chain has {len(chain.iterations)} iterations; "
                f"study sheets need {max(STUDY_ITERATIONS)}"
            )
        summaries = {i: chain.iterations[i - 1].summary for i in STUDY_ITERATIONS}
        for order in PRESENTATION_ORDERS:
            sheets.append(
                StudySheet(
                    app_id=app_id,
                    order=order,
                    summaries=tuple(summaries[i] for i in order),
                )
            )
    return sheets


def assign_participants(
    sheets: Sequence[StudySheet], participants: int
) -> list[tuple[int, StudySheet]]:
    """Round-robin participant -> sheet assignment (balanced when the count
    is a multiple of the sheet count)."""
    if participants < 1:
        raise ValueError("participants must be >= 1")
    return [(p + 1, sheets[p % len(sheets)]) for p in range(participants)]


def write_study_sheets(
    sheets: Sequence[StudySheet],
    out_dir: str | Path,
    participants: int | None = None,
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for sheet in sheets:
        order_tag = "".join(str(i) for i in sheet.order)
        path = out_dir / f"sheet_{sheet.app_id}_{order_tag}.txt"
        path.write_text(sheet.render() + "\n", encoding="utf-8")
        written.append(path)
    if participants:
        assignment_path = out_dir / "assignment.csv"
        with open(assignment_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["participant", "app_id", "order"])
            for participant, sheet in assign_participants(sheets, participants):
                writer.writerow(
                    [participant, sheet.app_id, "-".join(str(i) for i in sheet.order)]
                )
        written.append(assignment_path)
    return written
