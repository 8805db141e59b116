"""Build an extractive summary with redundancy control.

Sentences are scored like reviews (mean term weight over distinct terms),
embedded as the mean of their word vectors, then selected greedily: highest
score first, skipping anything too similar to an already-selected sentence
or too long for the remaining word budget.
"""

from reviewsum.bundled import mini_corpus_paths, mini_embeddings_path
from reviewsum.corpus import Lemmatizer, filter_english, ingest, load_stopwords, tokenize_bag
from reviewsum.extractive import (
    ExtractiveConfig,
    load_embeddings,
    prepare_sentences,
    summarize_extractive,
    summary_text,
)

corpus, _ = ingest(mini_corpus_paths()["dartcab"])
english, _ = filter_english(corpus)

table = load_embeddings(mini_embeddings_path())
print(f"embedding table: {len(table.vectors)} tokens, {table.dim} dimensions")

stopwords = load_stopwords()
lemmatizer = Lemmatizer.from_file()
units, model = prepare_sentences(
    english, table, lambda review: tokenize_bag(review, stopwords, lemmatizer)
)
print(f"{len(units)} candidate sentences from {len(english)} reviews")

config = ExtractiveConfig(similarity_threshold=0.35, word_budget=120)
selected = summarize_extractive(units, config)

print(f"\nselected {len(selected)} sentences "
      f"({sum(u.word_count() for u in selected)} words, budget {config.word_budget}):")
for unit in selected:
    print(f"  [{unit.review_id}#{unit.index}] score={unit.score:.3f}  {unit.text}")

print("\nsummary:")
print(summary_text(selected))
