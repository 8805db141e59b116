"""Paths to the bundled demo corpus and embeddings.

The mini corpus is a synthetic two-app review set (all five star ratings,
plus a few non-English entries) sized so the whole pipeline runs offline in
seconds with the mock provider. The embedding file carries small random
vectors for the corpus vocabulary; both are fixtures, not real data.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def _data_path(relative: str) -> Path:
    return Path(str(resources.files("reviewsum").joinpath(relative)))


def mini_corpus_paths() -> dict[str, Path]:
    """App id -> bundled JSONL export."""
    directory = _data_path("data/mini")
    return {path.stem: path for path in sorted(directory.glob("*.jsonl"))}


def mini_embeddings_path() -> Path:
    return _data_path("data/mini_embeddings.txt")
