"""Pluggable language detection with a character-trigram default.

The default detector compares a text's ranked character trigrams against
bundled per-language profiles (Cavnar-Trenkle out-of-place distance). It is
deliberately small: the pipeline only needs a reliable English / non-English
split on short review texts, and any object with a ``detect(text)`` method
can be swapped in.
"""

from __future__ import annotations

import re
from collections import Counter
from importlib import resources
from typing import Protocol

UNKNOWN = "und"

_WORD_RE = re.compile(r"[^\W\d_]+")


class LanguageDetector(Protocol):
    def detect(self, text: str) -> tuple[str, float]:
        """Return (ISO 639-1 code, confidence in [0, 1])."""
        ...


def _trigrams(text: str) -> Counter:
    grams: Counter = Counter()
    for word in _WORD_RE.findall(text.lower()):
        padded = f" {word} "
        for i in range(len(padded) - 2):
            grams[padded[i : i + 3]] += 1
    return grams


def _rank(grams: Counter, size: int) -> dict[str, int]:
    # Ties broken alphabetically so profiles are stable across runs.
    ordered = sorted(grams.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
    return {gram: pos for pos, (gram, _) in enumerate(ordered)}


class TrigramLanguageDetector:
    """Rank-order trigram profile detector over the bundled seed texts."""

    def __init__(self, profiles: dict[str, dict[str, int]] | None = None, profile_size: int = 400):
        self.profile_size = profile_size
        self._profiles = profiles if profiles is not None else self._load_bundled(profile_size)

    @staticmethod
    def _load_bundled(profile_size: int) -> dict[str, dict[str, int]]:
        profiles = {}
        seed_dir = resources.files("reviewsum").joinpath("data/language_seeds")
        for entry in sorted(seed_dir.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".txt"):
                lang = entry.name[:-4]
                profiles[lang] = _rank(_trigrams(entry.read_text(encoding="utf-8")), profile_size)
        return profiles

    def detect(self, text: str) -> tuple[str, float]:
        grams = _rank(_trigrams(text), self.profile_size)
        if not grams:
            return UNKNOWN, 0.0
        max_penalty = self.profile_size
        worst = len(grams) * max_penalty
        distances = []
        for lang, profile in self._profiles.items():
            out_of_place = sum(
                abs(pos - profile[g]) if g in profile else max_penalty for g, pos in grams.items()
            )
            distances.append((out_of_place / worst, lang))
        distances.sort()
        best_dist, best_lang = distances[0]
        if len(distances) == 1:
            return best_lang, max(0.0, 1.0 - best_dist)
        runner_dist = distances[1][0]
        if runner_dist == 0.0:
            return best_lang, 0.0
        margin = (runner_dist - best_dist) / runner_dist
        return best_lang, max(0.0, min(1.0, margin))


_default_detector: TrigramLanguageDetector | None = None


def default_detector() -> TrigramLanguageDetector:
    global _default_detector
    if _default_detector is None:
        _default_detector = TrigramLanguageDetector()
    return _default_detector


def detect(text: str) -> tuple[str, float]:
    """Detect with the bundled trigram profiles."""
    return default_detector().detect(text)
