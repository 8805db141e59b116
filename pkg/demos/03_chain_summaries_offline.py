"""Generate chain-of-density summaries offline with the mock provider.

The cod_r template asks for five rounds: each round names 1-3 app-feature
entities missing so far and rewrites the summary, same length, to fuse them
in. The mock provider fabricates a deterministic reply from the prompt
digest, so this demo runs with no network and always prints the same chains.
"""

from reviewsum.bundled import mini_corpus_paths
from reviewsum.corpus import filter_english, ingest
from reviewsum.llm import MOCK_ENDPOINT, GenerationParams, cached_complete
from reviewsum.prompts import load_template, parse_cod_response, render

corpus, _ = ingest(mini_corpus_paths()["aurora"])
english, _ = filter_english(corpus)
reviews = list(english.reviews[:12])

template = load_template("cod_r")
prompt = render(template, app="Aurora", reviews=reviews)
print("prompt head:")
print("\n".join(prompt.splitlines()[:6]))
print(f"... ({len(prompt.split())} words total)\n")

params = GenerationParams(model="mock-chat")  # temperature 0.5, top_p 0.5 defaults
result = cached_complete(".demo-cache", MOCK_ENDPOINT, prompt, params)
print(f"usage: {result.usage.input_tokens} in / {result.usage.output_tokens} out tokens\n")

chain = parse_cod_response(result.text, expected_iterations=5, app_id="aurora")
for i, iteration in enumerate(chain.iterations, start=1):
    print(f"iteration {i}: +{'; '.join(iteration.missing_entities) or '(none)'}")
    print(f"  {iteration.summary}\n")

# A second call is served from the cache: zero network either way.
again = cached_complete(".demo-cache", MOCK_ENDPOINT, prompt, params)
print("cache hit is byte-identical:", again.text == result.text)
