"""Acceptance criteria, one test per criterion, at their stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion.
"""

from __future__ import annotations

import json
import random
import time
from decimal import Decimal
from pathlib import Path

import pytest

import reviewsum.llm as llm
from reviewsum.bundled import mini_corpus_paths
from reviewsum.cli import main
from reviewsum.corpus import ingest
from reviewsum.evaluation import aggregate_entity_table
from reviewsum.extractive import ExtractiveConfig, SentenceUnit, cosine, summarize_extractive
from reviewsum.llm import Price, UsageRecord, estimate_cost
from reviewsum.prompts import load_template, render
from reviewsum.ranking import ScoredReview, fit, score_review, term_weight
from reviewsum.sampling import allocate, select
from reviewsum.stats import chi2_sf, t_sf_two_tailed

from . import oracles
from .test_evaluation import ENTITY_COUNTS, PUBLISHED_AVERAGES
from .test_ranking import bag


def passed(number: int, message: str) -> None:
    print(f"\nACCEPTANCE CRITERION {number}: PASS - {message}")


def test_criterion_1_chi_square_reproduction(tmp_path, monkeypatch):
    contingency = tmp_path / "readability.csv"
    contingency.write_text(
        "iteration,Unreadable,Somewhat Readable,Readable,Easy to Read\n"
        "3rd,2,15,19,12\n4th,0,19,16,13\n5th,2,10,21,15\n",
        encoding="utf-8",
    )
    config = tmp_path / "eval.toml"
    config.write_text(f'[output]\ndir = "{tmp_path / "out"}"\n', encoding="utf-8")
    started = time.perf_counter()
    code = main(
        ["--config", str(config), "evaluate", "--contingency", str(contingency)]
    )
    elapsed = time.perf_counter() - started
    assert code == 0
    run_dir = next((tmp_path / "out").glob("run-*"))
    payload = json.loads((run_dir / "evaluation/chi_square.json").read_text())
    assert payload["statistic"] == pytest.approx(5.80, abs=0.01)
    assert payload["df"] == 6
    assert 0.44 < payload["p_value"] < 0.45
    assert elapsed < 1.0
    passed(
        1,
        f"chi-square {payload['statistic']:.4f} (5.80 +- 0.01), df 6, "
        f"p {payload['p_value']:.4f} in (0.44, 0.45), {elapsed * 1000:.0f} ms",
    )


def test_criterion_2_entity_count_aggregation():
    averages = aggregate_entity_table(ENTITY_COUNTS)
    for condition, published in PUBLISHED_AVERAGES.items():
        assert abs(averages[condition] - published) <= 0.005 + 1e-9, condition
    diff = averages["codr_5"] - averages["cod_5"]
    assert diff == pytest.approx(2.625, abs=1e-12)
    passed(2, "average row matches to +-0.005; fifth-iteration mean difference 2.625")


def test_criterion_3_term_weight_oracle_equivalence():
    rng = random.Random(101)
    terms = list("abcdefgh")
    for _ in range(200):
        lists = [
            [rng.choice(terms) for _ in range(rng.randint(0, 7))]
            for _ in range(rng.randint(1, 10))
        ]
        bags = [bag(f"r{i}", *lst) for i, lst in enumerate(lists)]
        model = fit(bags)
        assert model.doc_count == len(lists)
        assert model.doc_freq == oracles.brute_doc_freq(lists)
        for i, token_bag in enumerate(bags):
            for term in set(lists[i]):
                assert term_weight(model, term, token_bag) == pytest.approx(
                    oracles.brute_term_weight(lists, i, term), abs=1e-12
                )
            assert score_review(model, token_bag).score == pytest.approx(
                oracles.brute_score(lists, i), abs=1e-12
            )
    passed(3, "fit/term_weight/score_review match brute force to 1e-12 on 200 corpora")


def test_criterion_4_sampling_property_suite():
    rng = random.Random(202)
    for _ in range(1000):
        strata = rng.randint(1, 5)
        population = {r: rng.randint(0, 3000) for r in range(1, strata + 1)}
        if sum(population.values()) == 0:
            population[1] = 1
        k = rng.randint(1, 800)
        plan = allocate(population, k)
        total_population = sum(population.values())
        nonzero = sum(1 for c in population.values() if c > 0)
        total = sum(plan.quotas.values())
        if total_population <= k:
            assert total == total_population
        else:
            assert abs(total - k) <= max(nonzero - 1, 0)
        # scale invariance
        if total_population > k:
            scaled = {r: c * 7 for r, c in population.items()}
            assert allocate(scaled, k).quotas == plan.quotas
        # selection prefix property (ranking order descending by construction)
        ranked = {
            r: [
                ScoredReview(review_id=f"{r}-{i}", score=float(quota - i))
                for i in range(min(population.get(r, 0), quota))
            ]
            for r, quota in plan.quotas.items()
        }
        sample = select(ranked, plan)
        for rating, ids in sample.selected.items():
            assert ids == [s.review_id for s in ranked[rating][: len(ids)]]
    passed(4, "allocation slack, scale invariance, and prefix property on 1000 populations")


def test_criterion_5_extractive_invariants():
    rng = random.Random(303)
    for _ in range(500):
        units = []
        for i in range(rng.randint(1, 10)):
            words = rng.randint(3, 40)
            units.append(
                SentenceUnit(
                    review_id=f"r{rng.randint(0, 4)}",
                    index=i,
                    text=" ".join(f"w{k}" for k in range(words)),
                    tokens=[],
                    score=round(rng.random(), 3),
                    embedding=__import__("numpy").asarray(
                        [float(rng.randint(-3, 3)) for _ in range(4)]
                    ),
                )
            )
        lam = rng.choice([0.1, 0.3, 0.5, 0.9])
        budget = rng.choice([20, 60, 120])
        picked = summarize_extractive(units, ExtractiveConfig(lam, budget))
        for i, unit in enumerate(picked):
            for other in picked[:i]:
                assert cosine(unit.embedding, other.embedding) < lam
        if len(picked) > 1:
            assert sum(u.word_count() for u in picked) <= budget
        expected = oracles.greedy_replay(
            [
                (u.score, u.review_id, u.index, u.word_count(), list(u.embedding))
                for u in units
            ],
            lam,
            budget,
        )
        assert [(u.review_id, u.index) for u in picked] == expected
    passed(5, "redundancy, budget, and greedy-replay equivalence on 500 sentence sets")


def test_criterion_6_offline_pipeline_determinism(tmp_path, monkeypatch):
    class Offline:
        def post(self, *args, **kwargs):
            raise AssertionError("network access attempted in the offline pipeline")

    monkeypatch.setattr(llm, "requests", Offline())

    paths = mini_corpus_paths()
    corpora = [ingest(path)[0] for path in paths.values()]
    total = sum(len(c) for c in corpora)
    ratings = {r.rating for c in corpora for r in c.reviews}
    assert total >= 60
    assert ratings == {1, 2, 3, 4, 5}

    def run_once(outdir: Path) -> Path:
        config = tmp_path / f"{outdir.name}.toml"
        config.write_text(
            "[corpus]\n"
            f'inputs = {{ aurora = "{paths["aurora"]}", dartcab = "{paths["dartcab"]}" }}\n'
            "[sampling]\nk = 30\n"
            '[prompt]\nid = "cod_r"\n'
            '[llm]\nprovider = "mock"\nmodel = "mock-chat"\n'
            f'[output]\ndir = "{outdir}"\ncache_dir = "{outdir / "cache"}"\n',
            encoding="utf-8",
        )
        for command in ("ingest", "sample", "summarize", "evaluate"):
            code = main(["--config", str(config), "--offline", command])
            assert code in (0, 1), command  # evaluate is partial without annotations
        return next(outdir.glob("run-*"))

    started = time.perf_counter()
    dir_one = run_once(tmp_path / "one")
    dir_two = run_once(tmp_path / "two")
    elapsed = time.perf_counter() - started
    files_one = sorted(p.relative_to(dir_one) for p in dir_one.rglob("*") if p.is_file())
    files_two = sorted(p.relative_to(dir_two) for p in dir_two.rglob("*") if p.is_file())
    assert files_one == files_two and files_one
    for relative in files_one:
        assert (dir_one / relative).read_bytes() == (dir_two / relative).read_bytes(), relative
    assert elapsed < 30.0
    passed(
        6,
        f"{total}-review corpus, two byte-identical offline runs "
        f"({len(files_one)} files) in {elapsed:.1f} s",
    )


def test_criterion_7_prompt_fidelity():
    reviews = [(5, "Calm helps me sleep."), (1, "Subscription billing is a mess.")]
    cod = render(load_template("cod"), app="Calm", reviews=reviews)
    cod_r = render(load_template("cod_r"), app="Calm", reviews=reviews)
    assert "Repeat the following 2 steps 5 times." in cod
    assert "Repeat the following 2 steps 5 times." in cod_r
    assert (
        "any functional or non-functional feature of the app that users mention in "
        "their reviews and perceive to either harm or enhance their overall experience"
        in cod_r
    )
    assert (
        "Avoid including personal and location specific information, like name, place, "
        "URLs, and emails, in summaries." in cod_r
    )
    assert "Avoid apps' names other than Calm in summaries." in cod_r
    assert "You will generate increasingly concise, entity-dense summaries" in cod
    assert "entity-dense summaries of the reviews of the Calm app" in cod_r
    passed(7, "chain prompts carry the published instructions verbatim")


def test_criterion_8_statistics_quantiles():
    assert chi2_sf(12.592, 6) == pytest.approx(0.05, abs=1e-3)
    assert t_sf_two_tailed(2.365, 7) == pytest.approx(0.05, abs=1e-3)
    # and both match the independent series/continued-fraction oracles
    assert chi2_sf(12.592, 6) == pytest.approx(oracles.chi2_sf(12.592, 6), abs=1e-8)
    assert t_sf_two_tailed(2.365, 7) == pytest.approx(
        oracles.t_two_tailed(2.365, 7), abs=1e-8
    )
    passed(8, "p-values at published quantiles within 1e-3 and oracle-consistent")


def test_criterion_9_cost_accounting(tmp_path, monkeypatch):
    price = Price(in_per_million=2.5, out_per_million=10.0)
    assert estimate_cost(
        UsageRecord(input_tokens=1_000_000, output_tokens=0, latency=0.0), price
    ) == Decimal("2.50")
    assert estimate_cost(
        UsageRecord(input_tokens=20_000, output_tokens=2_000, latency=0.0), price
    ) == Decimal("0.07")
    assert estimate_cost(
        UsageRecord(input_tokens=0, output_tokens=0, latency=0.0), price
    ) == Decimal("0")

    # per-summary aggregation property on a usage fixture
    run_dir = tmp_path / "out" / "run-fixture"
    (run_dir / "usage").mkdir(parents=True)
    fixture = {
        "app_id": "uber",
        "prompt_id": "cod_r",
        "provider": "fixture",
        "model": "priced-model",
        "requests": 1,
        "input_tokens": 200_000,
        "output_tokens": 1_000,
        "latency_seconds": 2.2,
        "approximate_tokens": False,
        "summaries": 5,
    }
    (run_dir / "usage" / "uber_cod_r.json").write_text(json.dumps(fixture), encoding="utf-8")
    config = tmp_path / "report.toml"
    config.write_text(
        f'[output]\ndir = "{tmp_path / "out"}"\n'
        '[prices."priced-model"]\nin_per_million = 2.5\nout_per_million = 10.0\n',
        encoding="utf-8",
    )

    # the run dir is content-addressed; point the report at the fixture dir
    import reviewsum.config as config_mod

    monkeypatch.setattr(config_mod.RunConfig, "run_dir", lambda self: run_dir)
    assert main(["--config", str(config), "report"]) == 0
    lines = (run_dir / "report/cost_report.csv").read_text().splitlines()
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    # 200000 * 2.5/1e6 + 1000 * 10/1e6 = 0.51 exactly; 0.102 per summary
    assert Decimal(row["cost_usd"]) == Decimal("0.51")
    assert Decimal(row["cost_per_summary_usd"]) == Decimal("0.102")
    passed(9, "token prices reproduce hand-computed totals; $0.102/summary style row")


def test_criterion_10_non_reproducible_items_documented():
    readme = Path(__file__).resolve().parents[1] / "README.md"
    text = readme.read_text(encoding="utf-8")
    assert "Non-reproducible" in text
    for marker in (
        "readability study outcomes",
        "density t-test p-values",
        "recall figures",
    ):
        assert marker in text, marker
    passed(10, "README states the non-reproducible items and why")
