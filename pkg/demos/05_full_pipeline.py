"""Run the whole pipeline end to end, offline, via the CLI entry point.

Writes a throwaway config pointing at the bundled mini corpus, then runs
ingest -> sample -> summarize -> extract -> study-sheets -> report with the
mock provider. Everything lands in a content-addressed run directory;
rerunning produces byte-identical artifacts.
"""

import sys
import tempfile
from pathlib import Path

from reviewsum.bundled import mini_corpus_paths, mini_embeddings_path
from reviewsum.cli import main

workdir = Path(tempfile.mkdtemp(prefix="reviewsum-demo-"))
paths = mini_corpus_paths()
config = workdir / "run.toml"
config.write_text(
    f"""[corpus]
inputs = {{ aurora = "{paths['aurora']}", dartcab = "{paths['dartcab']}" }}

[sampling]
k = 30

[prompt]
id = "cod_r"

[llm]
provider = "mock"
model = "mock-chat"

[extractive]
embeddings = "{mini_embeddings_path()}"
lambda = 0.35

[study]
participants = 12

[output]
dir = "{workdir / 'out'}"
cache_dir = "{workdir / 'cache'}"

[prices."mock-chat"]
in_per_million = 2.5
out_per_million = 10.0
""",
    encoding="utf-8",
)

for command in ("ingest", "sample", "summarize", "extract", "study-sheets", "report"):
    print(f"\n$ reviewsum --config run.toml {command}")
    code = main(["--config", str(config), command])
    if code not in (0, 1):
        sys.exit(code)

run_dir = next((workdir / "out").glob("run-*"))
print(f"\nartifacts under {run_dir}:")
for path in sorted(run_dir.rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(run_dir)}")
