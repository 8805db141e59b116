"""Rank reviews by informativeness and draw a rating-stratified sample.

Walks the first half of the pipeline on the bundled mini corpus: ingest,
English filtering, tokenization, term-weight model fitting, ranking, and
largest-remainder sampling.
"""

from reviewsum.bundled import mini_corpus_paths
from reviewsum.corpus import filter_english, ingest, tokenize_corpus
from reviewsum.ranking import fit, rank, rank_by_rating
from reviewsum.sampling import allocate, select

corpus, report = ingest(mini_corpus_paths()["aurora"])
print(f"ingested {len(corpus)} reviews ({report.rejected_total} rejected)")

english, language_report = filter_english(corpus)
print(f"kept {language_report.kept} English reviews, removed {language_report.removed}:",
      dict(language_report.removed_languages))

bags = tokenize_corpus(english)
model = fit(list(bags.values()))
print(f"term-weight model: N={model.doc_count}, vocabulary={len(model.doc_freq)}")

# The most informative reviews overall.
print("\ntop five reviews by mean term weight:")
by_id = {r.id: r for r in english.reviews}
for scored in rank(english, model, bags)[:5]:
    body = by_id[scored.review_id].body
    print(f"  {scored.score:.3f}  ({by_id[scored.review_id].rating}*) {body[:64]}")

# Quotas proportional to the star-rating mix, then the top of each stratum.
population = {rating: len(group) for rating, group in english.by_rating().items()}
plan = allocate(population, total_k=20)
print(f"\npopulation by rating: {population}")
print(f"quotas for K=20:      {plan.quotas}")

sample = select(rank_by_rating(english, model, bags), plan, app_id=english.app_id)
for rating in sorted(sample.selected):
    print(f"  {rating}*: {sample.selected[rating]}")
print(f"sampled {sample.total()} reviews in total")
