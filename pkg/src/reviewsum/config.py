"""Run configuration: one TOML file, sections per pipeline stage.

Relative paths are resolved against the config file's directory. Every run
writes under ``output.dir`` in a content-addressed ``run-<digest>`` folder so
stages of the same configuration share artifacts and reruns are bitwise
reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .llm import MOCK_ENDPOINT, Price, ProviderEndpoint
from .sampling import DEFAULT_SAMPLE_SIZE


class ConfigError(ValueError):
    """Bad or missing configuration; commands exit with status 2."""


BUILTIN_PROVIDERS = {
    "mock": MOCK_ENDPOINT,
    "openai": ProviderEndpoint(
        name="openai",
        base_url="https://api.openai.com/v1",
        auth_env="OPENAI_API_KEY",
        request_shape="openai-chat",
    ),
    "gemini": ProviderEndpoint(
        name="gemini",
        base_url="https://generativelanguage.googleapis.com/v1beta",
        auth_env="GEMINI_API_KEY",
        request_shape="gemini",
        context_window=1_000_000,
    ),
}


@dataclass
class RunConfig:
    inputs: dict[str, Path] = field(default_factory=dict)
    stopwords: Path | None = None
    lemmas: Path | None = None
    include_title: bool = False
    trust_language_field: bool = False

    sample_k: int = DEFAULT_SAMPLE_SIZE

    prompt_id: str = "cod_r"
    iterations: int = 5
    word_budget: int | None = None
    template_file: Path | None = None

    provider: str = "mock"
    model: str = "mock-chat"
    temperature: float = 0.5
    top_p: float = 0.5
    frequency_penalty: float = 0.1
    presence_penalty: float = 0.1
    max_output_tokens: int = 2048
    timeout: float = 120.0
    providers: dict[str, ProviderEndpoint] = field(default_factory=lambda: dict(BUILTIN_PROVIDERS))

    embeddings: Path | None = None
    similarity_threshold: float = 0.1
    extract_budget: int = 120

    annotations: Path | None = None
    gold: dict[str, Path] = field(default_factory=dict)
    contingency: Path | None = None
    entity_counts: Path | None = None
    rate_readability: bool = False
    readability_repeats: int = 1

    participants: int = 48

    output_dir: Path = Path("out")
    cache_dir: Path = Path(".reviewsum-cache")
    workers: int = 4
    prices: dict[str, Price] = field(default_factory=dict)

    def endpoint(self) -> ProviderEndpoint:
        try:
            return self.providers[self.provider]
        except KeyError:
            raise ConfigError(
                f"unknown provider {self.provider!r}; configured: {sorted(self.providers)}"
            ) from None

    def digest(self) -> str:
        """Content digest of the artifact-determining configuration.

        Post-hoc analysis inputs (annotations, gold sets, contingency and
        count tables, participant counts) are excluded: they are evaluated
        inside an existing run, not reasons to start a new one.
        """
        material = {
            "inputs": {app: str(p) for app, p in sorted(self.inputs.items())},
            "stopwords": str(self.stopwords) if self.stopwords else None,
            "lemmas": str(self.lemmas) if self.lemmas else None,
            "include_title": self.include_title,
            "trust_language_field": self.trust_language_field,
            "sample_k": self.sample_k,
            "prompt_id": self.prompt_id,
            "iterations": self.iterations,
            "word_budget": self.word_budget,
            "template_file": str(self.template_file) if self.template_file else None,
            "provider": self.provider,
            "model": self.model,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "frequency_penalty": self.frequency_penalty,
            "presence_penalty": self.presence_penalty,
            "max_output_tokens": self.max_output_tokens,
            "embeddings": str(self.embeddings) if self.embeddings else None,
            "similarity_threshold": self.similarity_threshold,
            "extract_budget": self.extract_budget,
        }
        canonical = json.dumps(material, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def run_dir(self) -> Path:
        return self.output_dir / f"run-{self.digest()}"


def _resolve(base: Path, value: str | None) -> Path | None:
    if not value:
        return None
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.parent
    config = RunConfig()

    corpus = raw.get("corpus", {})
    config.inputs = {
        str(app): _resolve(base, str(p)) for app, p in corpus.get("inputs", {}).items()
    }
    config.stopwords = _resolve(base, corpus.get("stopwords"))
    config.lemmas = _resolve(base, corpus.get("lemmas"))
    config.include_title = bool(corpus.get("include_title", False))
    config.trust_language_field = bool(corpus.get("trust_language_field", False))

    sampling = raw.get("sampling", {})
    config.sample_k = int(sampling.get("k", DEFAULT_SAMPLE_SIZE))

    prompt = raw.get("prompt", {})
    config.prompt_id = str(prompt.get("id", "cod_r"))
    config.iterations = int(prompt.get("iterations", 5))
    if "word_budget" in prompt:
        config.word_budget = int(prompt["word_budget"])
    config.template_file = _resolve(base, prompt.get("template_file"))

    llm = raw.get("llm", {})
    config.provider = str(llm.get("provider", "mock"))
    config.model = str(llm.get("model", "mock-chat"))
    config.temperature = float(llm.get("temperature", 0.5))
    config.top_p = float(llm.get("top_p", 0.5))
    config.frequency_penalty = float(llm.get("frequency_penalty", 0.1))
    config.presence_penalty = float(llm.get("presence_penalty", 0.1))
    config.max_output_tokens = int(llm.get("max_output_tokens", 2048))
    config.timeout = float(llm.get("timeout", 120.0))

    for name, spec in raw.get("providers", {}).items():
        config.providers[name] = ProviderEndpoint(
            name=name,
            base_url=str(spec.get("base_url", "")),
            auth_env=str(spec.get("auth_env", f"{name.upper()}_API_KEY")),
            request_shape=str(spec.get("request_shape", "openai-chat")),
            context_window=int(spec.get("context_window", 128_000)),
            max_in_flight=int(spec.get("max_in_flight", 4)),
        )

    extractive = raw.get("extractive", {})
    config.embeddings = _resolve(base, extractive.get("embeddings"))
    config.similarity_threshold = float(extractive.get("lambda", 0.1))
    config.extract_budget = int(extractive.get("budget", 120))

    evaluate = raw.get("evaluate", {})
    config.annotations = _resolve(base, evaluate.get("annotations"))
    config.gold = {
        str(app): _resolve(base, str(p)) for app, p in evaluate.get("gold", {}).items()
    }
    config.contingency = _resolve(base, evaluate.get("contingency"))
    config.entity_counts = _resolve(base, evaluate.get("entity_counts"))
    config.rate_readability = bool(evaluate.get("rate_readability", False))
    config.readability_repeats = int(evaluate.get("readability_repeats", 1))

    study = raw.get("study", {})
    config.participants = int(study.get("participants", 48))

    output = raw.get("output", {})
    config.output_dir = _resolve(base, output.get("dir", "out"))
    config.cache_dir = _resolve(base, output.get("cache_dir", ".reviewsum-cache"))
    config.workers = int(output.get("workers", 4))

    for model, spec in raw.get("prices", {}).items():
        config.prices[str(model)] = Price(
            in_per_million=float(spec.get("in_per_million", 0.0)),
            out_per_million=float(spec.get("out_per_million", 0.0)),
        )
    return config


def require_inputs(config: RunConfig) -> None:
    if not config.inputs:
        raise ConfigError("no review inputs configured ([corpus] inputs)")
    for app, path in config.inputs.items():
        if not path.exists():
            raise ConfigError(f"input for app {app!r} not found: {path}")
