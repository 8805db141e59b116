"""Command-line pipeline: ingest, sample, summarize, extract, evaluate,
study-sheets, and report.

Every command reads one TOML config (flags override it) and writes into a
content-addressed run directory under the configured output dir, so the
stages of one configuration compose and reruns are bitwise identical.
Exit codes: 0 success, 1 completed with flags raised, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import extractive as extractive_mod
from . import prompts as prompts_mod
from . import ranking as ranking_mod
from . import sampling as sampling_mod
from . import study as study_mod
from .config import ConfigError, RunConfig, load_config, require_inputs
from .llm import (
    GenerationParams,
    LlmError,
    Price,
    UsageRecord,
    cached_complete,
    estimate_cost,
)
from .stats import ContingencyTable, ZeroVarianceError, chi_square, paired_t

log = logging.getLogger("reviewsum")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewsum",
        description="Rank, sample, summarize, and evaluate mobile app reviews.",
    )
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--app", help="restrict the command to one app id")
    parser.add_argument("--k", type=int, help="stratified sample size override")
    parser.add_argument(
        "--prompt", choices=("cod", "cod_r", "vanilla"), help="prompt template override"
    )
    parser.add_argument("--provider", help="provider endpoint override")
    parser.add_argument(
        "--lambda",
        dest="similarity_threshold",
        type=float,
        help="extractive redundancy threshold override",
    )
    parser.add_argument("--budget", type=int, help="extractive word budget override")
    parser.add_argument("--cache-dir", help="completion cache directory override")
    parser.add_argument("--output-dir", help="output directory override")
    parser.add_argument(
        "--offline", action="store_true", help="force the mock provider (no network)"
    )
    parser.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", help="validate exports and write canonical corpora")
    sub.add_parser("sample", help="rank reviews and draw rating-stratified samples")
    sub.add_parser("summarize", help="render prompts and collect summaries")
    sub.add_parser("extract", help="run the extractive baseline")
    evaluate = sub.add_parser("evaluate", help="density, recall, readability statistics")
    evaluate.add_argument("--contingency", help="readability contingency CSV override")
    evaluate.add_argument("--entity-counts", help="per-app entity count CSV override")
    sheets = sub.add_parser("study-sheets", help="emit counterbalanced readability sheets")
    sheets.add_argument("--participants", type=int, help="participant count override")
    sub.add_parser("report", help="aggregate latency and cost accounting")
    return parser


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.k is not None:
        config.sample_k = args.k
    if args.prompt:
        config.prompt_id = args.prompt
    if args.provider:
        config.provider = args.provider
    if args.offline:
        config.provider = "mock"
    if args.similarity_threshold is not None:
        config.similarity_threshold = args.similarity_threshold
    if args.budget is not None:
        config.extract_budget = args.budget
    if args.cache_dir:
        config.cache_dir = Path(args.cache_dir)
    if args.output_dir:
        config.output_dir = Path(args.output_dir)
    if args.app:
        if args.app not in config.inputs:
            raise ConfigError(f"--app {args.app!r} is not among configured inputs")
        config.inputs = {args.app: config.inputs[args.app]}
    if getattr(args, "contingency", None):
        config.contingency = Path(args.contingency)
    if getattr(args, "entity_counts", None):
        config.entity_counts = Path(args.entity_counts)
    if getattr(args, "participants", None):
        config.participants = args.participants
    return config


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def _fan_out(config: RunConfig, work, items):
    """Run per-app work, optionally in parallel, preserving input order."""
    if config.workers <= 1 or len(items) <= 1:
        return [work(item) for item in items]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(work, items))


# --- shared pipeline pieces ------------------------------------------------


def _resources(config: RunConfig):
    stopwords = corpus_mod.load_stopwords(config.stopwords)
    lemmatizer = corpus_mod.Lemmatizer.from_file(config.lemmas)
    return stopwords, lemmatizer


def _ensure_corpus(config: RunConfig, run_dir: Path, app: str):
    """Load the canonical corpus for an app, ingesting it if needed."""
    canonical = run_dir / "corpora" / f"{app}.jsonl"
    if canonical.exists():
        corpus, _ = corpus_mod.ingest(canonical, fmt="jsonl")
        return corpus, None
    corpus, report = corpus_mod.ingest(config.inputs[app])
    canonical.parent.mkdir(parents=True, exist_ok=True)
    corpus_mod.save_corpus(corpus, canonical, fmt="jsonl")
    _write_json(
        run_dir / "reports" / f"ingest_{app}.json",
        {
            "app_id": corpus.app_id,
            "total_records": report.total_records,
            "accepted": report.accepted,
            "duplicates": report.duplicates,
            "rejected": dict(sorted(report.rejected.items())),
        },
    )
    return corpus, report


def _rank_app(config: RunConfig, corpus, stopwords, lemmatizer):
    filtered, filter_report = corpus_mod.filter_english(
        corpus, trust_language_field=config.trust_language_field
    )
    if not filtered.reviews:
        raise ConfigError(f"app {corpus.app_id}: no English reviews after filtering")
    bags = corpus_mod.tokenize_corpus(filtered, stopwords, lemmatizer)
    model = ranking_mod.fit(list(bags.values()))
    ranked = ranking_mod.rank_by_rating(filtered, model, bags)
    return filtered, bags, model, ranked, filter_report


def _ensure_sample(config: RunConfig, run_dir: Path, app: str, stopwords, lemmatizer):
    """Build (or reload) the stratified sample manifest for an app."""
    manifest_path = run_dir / "samples" / f"{app}.csv"
    corpus, _ = _ensure_corpus(config, run_dir, app)
    if manifest_path.exists():
        return corpus, sampling_mod.read_manifest(manifest_path), []
    filtered, bags, model, ranked, filter_report = _rank_app(config, corpus, stopwords, lemmatizer)
    population = {rating: len(group) for rating, group in filtered.by_rating().items()}
    plan = sampling_mod.allocate(population, config.sample_k)
    sample = sampling_mod.select(ranked, plan, app_id=app)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    sampling_mod.write_manifest(sample, ranked, manifest_path)
    models_dir = run_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    ranking_mod.save_model(model, models_dir / f"{app}.tsv")
    _write_json(
        run_dir / "reports" / f"sample_{app}.json",
        {
            "app_id": app,
            "english_reviews": len(filtered),
            "removed_non_english": filter_report.removed,
            "removed_languages": dict(sorted(filter_report.removed_languages.items())),
            "population": {str(r): c for r, c in sorted(population.items())},
            "quotas": {str(r): q for r, q in sorted(plan.quotas.items())},
            "selected_total": sample.total(),
            "flags": sample.flags,
        },
    )
    return corpus, sampling_mod.read_manifest(manifest_path), sample.flags


def _generation_params(config: RunConfig) -> GenerationParams:
    return GenerationParams(
        model=config.model,
        temperature=config.temperature,
        top_p=config.top_p,
        frequency_penalty=config.frequency_penalty,
        presence_penalty=config.presence_penalty,
        max_output_tokens=config.max_output_tokens,
    )


# --- commands ---------------------------------------------------------------


def cmd_ingest(config: RunConfig, args) -> int:
    require_inputs(config)
    run_dir = config.run_dir()
    flags = []

    def work(app: str):
        corpus, report = _ensure_corpus(config, run_dir, app)
        return app, len(corpus), report

    for app, size, report in _fan_out(config, work, sorted(config.inputs)):
        note = ""
        if report is not None and (report.rejected_total or report.duplicates):
            note = f" (rejected {report.rejected_total}, duplicates {report.duplicates})"
            flags.append(app)
        print(f"{app}: {size} reviews{note}", file=sys.stderr)
    print(run_dir)
    return EXIT_PARTIAL if flags else EXIT_OK


def cmd_sample(config: RunConfig, args) -> int:
    require_inputs(config)
    run_dir = config.run_dir()
    stopwords, lemmatizer = _resources(config)
    all_flags = []

    def work(app: str):
        _, manifest, flags = _ensure_sample(config, run_dir, app, stopwords, lemmatizer)
        return app, manifest, flags

    for app, manifest, flags in _fan_out(config, work, sorted(config.inputs)):
        print(f"{app}: sampled {len(manifest)} reviews", file=sys.stderr)
        all_flags.extend(flags)
    for flag in all_flags:
        print(f"flag: {flag}", file=sys.stderr)
    print(run_dir)
    return EXIT_PARTIAL if all_flags else EXIT_OK


def cmd_summarize(config: RunConfig, args) -> int:
    require_inputs(config)
    run_dir = config.run_dir()
    stopwords, lemmatizer = _resources(config)
    if config.template_file is not None:
        template = prompts_mod.load_template_file(config.template_file, config.prompt_id)
    else:
        template = prompts_mod.load_template(config.prompt_id)
    params = _generation_params(config)
    endpoint = config.endpoint()
    flags = []

    def work(app: str):
        corpus, manifest, _ = _ensure_sample(config, run_dir, app, stopwords, lemmatizer)
        by_id = {review.id: review for review in corpus.reviews}
        selected = [by_id[row["review_id"]] for row in manifest]
        if config.include_title:
            review_items = [
                (r.rating, f"{r.title}. {r.body}" if r.title else r.body) for r in selected
            ]
        else:
            review_items = selected
        prompt = prompts_mod.render(
            template,
            app=app,
            reviews=review_items,
            word_budget=config.word_budget,
            iterations=config.iterations,
        )
        result = cached_complete(
            config.cache_dir, endpoint, prompt, params, timeout=config.timeout
        )
        app_flags = []
        if template.id in prompts_mod.CHAIN_TEMPLATE_IDS:
            chain = prompts_mod.parse_cod_response(
                result.text,
                expected_iterations=config.iterations,
                app_id=app,
                prompt_id=template.id,
            )
            payload = prompts_mod.chain_to_dict(chain)
            summaries = len(chain.iterations)
            if chain.short_chain:
                app_flags.append(f"{app}: short chain ({summaries}/{config.iterations})")
        else:
            summary = prompts_mod.parse_vanilla_response(result.text)
            payload = {
                "app_id": app,
                "prompt_id": template.id,
                "short_chain": False,
                "flags": [],
                "iterations": [{"missing_entities": [], "summary": summary}],
            }
            summaries = 1
        _write_json(run_dir / "chains" / f"{app}_{template.id}.json", payload)
        _write_json(
            run_dir / "usage" / f"{app}_{template.id}.json",
            {
                "app_id": app,
                "prompt_id": template.id,
                "provider": endpoint.name,
                "model": params.model,
                "requests": 1,
                "input_tokens": result.usage.input_tokens,
                "output_tokens": result.usage.output_tokens,
                "latency_seconds": result.usage.latency,
                "approximate_tokens": result.usage.approximate,
                "summaries": summaries,
            },
        )
        return app, summaries, app_flags

    for app, summaries, app_flags in _fan_out(config, work, sorted(config.inputs)):
        print(f"{app}: {summaries} summaries ({template.id})", file=sys.stderr)
        flags.extend(app_flags)
    for flag in flags:
        print(f"flag: {flag}", file=sys.stderr)
    print(run_dir)
    return EXIT_PARTIAL if flags else EXIT_OK


def cmd_extract(config: RunConfig, args) -> int:
    require_inputs(config)
    if config.embeddings is None:
        raise ConfigError("extract needs an embedding file ([extractive] embeddings)")
    if not config.embeddings.exists():
        raise ConfigError(f"embedding file not found: {config.embeddings}")
    run_dir = config.run_dir()
    stopwords, lemmatizer = _resources(config)
    table = extractive_mod.load_embeddings(config.embeddings)
    extract_config = extractive_mod.ExtractiveConfig(
        similarity_threshold=config.similarity_threshold, word_budget=config.extract_budget
    )

    def tokenizer(review):
        return corpus_mod.tokenize_bag(review, stopwords, lemmatizer)

    def work(app: str):
        corpus, _ = _ensure_corpus(config, run_dir, app)
        filtered, _ = corpus_mod.filter_english(
            corpus, trust_language_field=config.trust_language_field
        )
        units, _ = extractive_mod.prepare_sentences(
            filtered, table, tokenizer, include_title=config.include_title
        )
        selected = extractive_mod.summarize_extractive(units, extract_config)
        out_dir = run_dir / "extractive"
        out_dir.mkdir(parents=True, exist_ok=True)
        extractive_mod.write_extractive_summary(
            selected, out_dir / f"{app}.txt", out_dir / f"{app}.json"
        )
        return app, selected

    for app, selected in _fan_out(config, work, sorted(config.inputs)):
        words = sum(unit.word_count() for unit in selected)
        print(f"{app}: {len(selected)} sentences, {words} words", file=sys.stderr)
    print(run_dir)
    return EXIT_OK


def _load_chains(run_dir: Path) -> dict[str, prompts_mod.SummaryChain]:
    chains = {}
    chain_dir = run_dir / "chains"
    if chain_dir.is_dir():
        for path in sorted(chain_dir.glob("*.json")):
            payload = json.loads(path.read_text(encoding="utf-8"))
            chain = prompts_mod.chain_from_dict(payload)
            chains[f"{chain.app_id}_{chain.prompt_id}"] = chain
    return chains


def cmd_evaluate(config: RunConfig, args) -> int:
    run_dir = config.run_dir()
    out_dir = run_dir / "evaluation"
    out_dir.mkdir(parents=True, exist_ok=True)
    partial = False
    produced = []

    if config.contingency is not None:
        if not config.contingency.exists():
            raise ConfigError(f"contingency file not found: {config.contingency}")
        table = ContingencyTable.from_csv(config.contingency)
        result = chi_square(table)
        _write_json(
            out_dir / "chi_square.json",
            {
                "statistic": round(result.statistic, 6),
                "df": result.df,
                "p_value": round(result.p_value, 6),
                "rows": list(table.row_labels),
                "cols": list(table.col_labels),
            },
        )
        width = max(len(label) for label in table.row_labels) + 2
        lines = [" " * width + "  ".join(c.rjust(18) for c in table.col_labels)]
        for label, row in zip(table.row_labels, table.counts):
            lines.append(label.ljust(width) + "  ".join(str(v).rjust(18) for v in row))
        (out_dir / "readability_table.txt").write_text("\n".join(lines) + "\n", "utf-8")
        print(
            f"chi-square: statistic={result.statistic:.2f} df={result.df:.0f} "
            f"p={result.p_value:.3f}",
            file=sys.stderr,
        )
        produced.extend(["chi_square.json", "readability_table.txt"])

    if config.entity_counts is not None:
        if not config.entity_counts.exists():
            raise ConfigError(f"entity counts file not found: {config.entity_counts}")
        grid = eval_mod.read_entity_counts_csv(config.entity_counts)
        averages = eval_mod.aggregate_entity_table(grid)
        with open(out_dir / "entity_averages.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("condition,average\n")
            for condition, value in averages.items():
                fh.write(f"{condition},{value:.6f}\n")
        (out_dir / "entity_table.txt").write_text(
            eval_mod.format_entity_table(grid) + "\n", encoding="utf-8"
        )
        produced.extend(["entity_averages.csv", "entity_table.txt"])
        t_rows = _entity_t_tests(grid)
        if t_rows:
            with open(out_dir / "t_tests.csv", "w", encoding="utf-8", newline="") as fh:
                fh.write("comparison,mean_difference,t,df,p_value\n")
                for row in t_rows:
                    fh.write(",".join(row) + "\n")
            produced.append("t_tests.csv")

    chains = _load_chains(run_dir)
    annotations = {}
    if config.annotations is not None and config.annotations.exists():
        annotations = {
            a.summary_id: a for a in eval_mod.load_annotations(config.annotations)
        }
    if chains:
        reports = []
        missing = 0
        for key in sorted(chains):
            chain = chains[key]
            for iteration, item in enumerate(chain.iterations, start=1):
                summary_id = f"{chain.app_id}:{chain.prompt_id}:{iteration}"
                annotation = annotations.get(summary_id)
                if annotation is None:
                    missing += 1
                    count = 0
                else:
                    count = len(annotation.entities)
                reports.append(eval_mod.density(count, item.summary, summary_id=summary_id))
        eval_mod.write_density_csv(reports, out_dir / "density.csv")
        produced.append("density.csv")
        if missing:
            print(
                f"warning: {missing} summaries have no entity annotation; "
                "their density rows assume zero entities",
                file=sys.stderr,
            )
            partial = True
        if config.rate_readability:
            params = _generation_params(config)
            endpoint = config.endpoint()
            rating_rows = []
            for key in sorted(chains):
                chain = chains[key]
                for iteration, item in enumerate(chain.iterations, start=1):
                    summary_id = f"{chain.app_id}:{chain.prompt_id}:{iteration}"
                    rating = eval_mod.rate_readability(
                        item.summary,
                        endpoint,
                        params,
                        repeats=config.readability_repeats,
                        cache_dir=config.cache_dir,
                    )
                    rating_rows.append((summary_id, rating))
            with open(out_dir / "readability.csv", "w", encoding="utf-8", newline="") as fh:
                fh.write("summary_id,rating\n")
                for summary_id, rating in rating_rows:
                    fh.write(f"{summary_id},{rating:.3f}\n")
            produced.append("readability.csv")
        if annotations and config.gold:
            recall_rows = []
            for summary_id in sorted(annotations):
                app_id = summary_id.split(":", 1)[0]
                gold_path = config.gold.get(app_id)
                if gold_path is None or not gold_path.exists():
                    continue
                gold = eval_mod.load_gold(gold_path)
                value = eval_mod.recall(annotations[summary_id], gold)
                recall_rows.append((summary_id, value))
            if recall_rows:
                with open(out_dir / "recall.csv", "w", encoding="utf-8", newline="") as fh:
                    fh.write("summary_id,recall\n")
                    for summary_id, value in recall_rows:
                        fh.write(f"{summary_id},{value:.6f}\n")
                produced.append("recall.csv")
    elif config.contingency is None and config.entity_counts is None:
        print("warning: nothing to evaluate (no chains, no evaluation inputs)", file=sys.stderr)
        partial = True

    for name in produced:
        print(f"wrote evaluation/{name}", file=sys.stderr)
    print(run_dir)
    return EXIT_PARTIAL if partial else EXIT_OK


def _entity_t_tests(grid) -> list[tuple[str, str, str, str, str]]:
    """Pairwise paired t-tests of the later adapted-chain iterations against
    every baseline condition present in the grid."""
    conditions = set(next(iter(grid.values())))
    apps = sorted(grid)
    rows = []
    lefts = [c for c in ("codr_3", "codr_4", "codr_5") if c in conditions]
    rights = [c for c in ("cod_3", "cod_4", "cod_5", "vanilla", "tfidf") if c in conditions]
    for left in lefts:
        for right in rights:
            a = [grid[app][left] for app in apps]
            b = [grid[app][right] for app in apps]
            mean_diff = sum(x - y for x, y in zip(a, b)) / len(a)
            try:
                result = paired_t(a, b)
            except (ZeroVarianceError, ValueError):
                continue
            rows.append(
                (
                    f"{left} vs {right}",
                    f"{mean_diff:.6f}",
                    f"{result.statistic:.6f}",
                    f"{result.df:.0f}",
                    f"{result.p_value:.6f}",
                )
            )
    return rows


def cmd_study_sheets(config: RunConfig, args) -> int:
    run_dir = config.run_dir()
    chains = _load_chains(run_dir)
    by_app = {
        chain.app_id: chain
        for chain in chains.values()
        if chain.prompt_id in prompts_mod.CHAIN_TEMPLATE_IDS
    }
    if not by_app:
        raise ConfigError(f"no chain summaries found under {run_dir / 'chains'}; run summarize")
    sheets = study_mod.build_study_sheets(by_app)
    written = study_mod.write_study_sheets(
        sheets, run_dir / "study", participants=config.participants
    )
    print(f"wrote {len(written)} study files for {len(by_app)} apps", file=sys.stderr)
    print(run_dir)
    return EXIT_OK


def cmd_report(config: RunConfig, args) -> int:
    run_dir = config.run_dir()
    usage_dir = run_dir / "usage"
    paths = sorted(usage_dir.glob("*.json")) if usage_dir.is_dir() else []
    if not paths:
        raise ConfigError(f"no usage records under {usage_dir}; run summarize first")
    rows = []
    flagged = False
    totals = {"input": 0, "output": 0, "latency": 0.0, "cost": Decimal("0"), "summaries": 0}
    for path in paths:
        record = json.loads(path.read_text(encoding="utf-8"))
        price = config.prices.get(record["model"])
        if price is None:
            price = Price(0.0, 0.0)
            flagged = True
            print(f"warning: no price configured for model {record['model']!r}", file=sys.stderr)
        usage = UsageRecord(
            input_tokens=record["input_tokens"],
            output_tokens=record["output_tokens"],
            latency=record["latency_seconds"],
        )
        cost = estimate_cost(usage, price)
        summaries = int(record.get("summaries", 1)) or 1
        per_summary = cost / summaries
        rows.append(
            (
                record["app_id"],
                record["prompt_id"],
                record["model"],
                str(record["requests"]),
                str(record["input_tokens"]),
                str(record["output_tokens"]),
                f"{record['latency_seconds']:.3f}",
                str(cost),
                str(summaries),
                str(per_summary),
            )
        )
        totals["input"] += record["input_tokens"]
        totals["output"] += record["output_tokens"]
        totals["latency"] += record["latency_seconds"]
        totals["cost"] += cost
        totals["summaries"] += summaries
    report_dir = run_dir / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    with open(report_dir / "cost_report.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "app_id,prompt_id,model,requests,input_tokens,output_tokens,"
            "latency_seconds,cost_usd,summaries,cost_per_summary_usd\n"
        )
        for row in rows:
            fh.write(",".join(row) + "\n")
        overall_per_summary = (
            totals["cost"] / totals["summaries"] if totals["summaries"] else Decimal("0")
        )
        fh.write(
            f"TOTAL,,,,{totals['input']},{totals['output']},{totals['latency']:.3f},"
            f"{totals['cost']},{totals['summaries']},{overall_per_summary}\n"
        )
    print(
        f"total: {totals['input']} in / {totals['output']} out tokens, "
        f"${totals['cost']} ({totals['summaries']} summaries)",
        file=sys.stderr,
    )
    print(run_dir)
    return EXIT_PARTIAL if flagged else EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "sample": cmd_sample,
    "summarize": cmd_summarize,
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "study-sheets": cmd_study_sheets,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(args.config) if args.config else RunConfig()
        config = _apply_overrides(config, args)
        return COMMANDS[args.command](config, args)
    except (LlmError, prompts_mod.PromptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # malformed user-supplied inputs (bad CSV shapes, bad records, ...)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
