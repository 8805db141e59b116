"""Evaluate summaries: density, recall, readability statistics.

Uses a readability study's contingency counts (three summary iterations by
four readability levels) for the chi-square test of independence, and a per
app entity-count grid for aggregation and paired t-tests.
"""

from reviewsum.evaluation import (
    EntityAnnotation,
    GoldEntitySet,
    aggregate_entity_table,
    density,
    format_entity_table,
    recall,
)
from reviewsum.stats import ContingencyTable, chi_square, paired_t

# Entity density: entities per whitespace token.
summary = " ".join(["word"] * 120)
report = density(15, summary, summary_id="demo:cod_r:5")
print(f"density: {report.entity_count} entities / {report.token_count} tokens "
      f"= {report.density:.3f}")

# Recall against a gold set, with aliases absorbing annotator granularity.
gold = GoldEntitySet(
    app_id="demo",
    entities=("safety concerns", "subscription fees", "customer service"),
    aliases={"safety concerns": ("fake profiles",)},
)
annotation = EntityAnnotation(
    summary_id="demo:cod_r:5",
    entities=("fake profiles", "Customer Service"),
    annotator="j1",
)
print(f"recall: {recall(annotation, gold):.3f}")

# Chi-square independence test on readability-by-iteration counts.
table = ContingencyTable.from_rows(
    {"3rd": (2, 15, 19, 12), "4th": (0, 19, 16, 13), "5th": (2, 10, 21, 15)},
    ("Unreadable", "Somewhat Readable", "Readable", "Easy to Read"),
)
result = chi_square(table)
print(f"\nchi-square: statistic={result.statistic:.2f}, df={result.df:.0f}, "
      f"p={result.p_value:.3f} (no evidence readability depends on iteration)")

# Entity-count aggregation and a paired comparison of two conditions.
grid = {
    "appA": {"codr_5": 15, "cod_5": 15, "vanilla": 10},
    "appB": {"codr_5": 11, "cod_5": 14, "vanilla": 10},
    "appC": {"codr_5": 13, "cod_5": 8, "vanilla": 9},
    "appD": {"codr_5": 12, "cod_5": 13, "vanilla": 13},
    "appE": {"codr_5": 14, "cod_5": 2, "vanilla": 9},
    "appF": {"codr_5": 11, "cod_5": 6, "vanilla": 9},
    "appG": {"codr_5": 8, "cod_5": 8, "vanilla": 8},
    "appH": {"codr_5": 10, "cod_5": 7, "vanilla": 8},
}
print()
print(format_entity_table(grid))

averages = aggregate_entity_table(grid)
a = [grid[app]["codr_5"] for app in sorted(grid)]
b = [grid[app]["cod_5"] for app in sorted(grid)]
t = paired_t(a, b)
print(f"\ncodr_5 vs cod_5: mean difference "
      f"{averages['codr_5'] - averages['cod_5']:.3f}, t={t.statistic:.3f}, "
      f"df={t.df:.0f}, p={t.p_value:.3f}")
