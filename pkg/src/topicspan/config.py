"""Pipeline configuration: defaults, key-value config files, flag overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .text import TokenizerConfig, default_stopwords, load_stopwords

# Fields that identify an analysis. Paths are deliberately excluded so the
# hash is stable across relocations; the corpus fingerprint covers the data.
_HASHED_FIELDS = (
    "lowercase", "min_token_len", "strip_urls",
    "min_df", "max_df_ratio",
    "k", "alpha", "beta", "fit_iterations", "infer_iterations", "seed", "average_over", "chains",
    "c_min", "c_max", "restarts",
    "tau_exp1", "tau_span", "tau_all", "top_words",
)


@dataclass
class PipelineConfig:
    """Every knob of the pipeline, with the documented defaults."""

    input: str = ""
    output_dir: str = "out"
    # tokenizer
    lowercase: bool = True
    min_token_len: int = 2
    stopword_path: str | None = None  # None -> packaged default list
    strip_urls: bool = True
    # vocabulary
    min_df: int = 2
    max_df_ratio: float = 1.0
    # topic model
    k: int = 20
    alpha: float | None = None  # None -> 50 / k
    beta: float = 0.01
    fit_iterations: int = 1000
    infer_iterations: int = 100
    seed: int = 0
    average_over: int = 1
    chains: int = 1
    # cluster-count selection
    c_min: int = 2
    c_max: int = 10
    restarts: int = 4
    # similarity thresholds
    tau_exp1: float = 0.95
    tau_span: float = 0.7
    tau_all: float = 0.9
    # sub-graph labeling
    top_words: int = 10

    def validate(self) -> None:
        for name in ("tau_exp1", "tau_span", "tau_all"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.fit_iterations < 1 or self.infer_iterations < 1:
            raise ConfigError("iteration counts must be >= 1")
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if not 0 < self.max_df_ratio <= 1:
            raise ConfigError("max_df_ratio must be in (0, 1]")
        if not 2 <= self.c_min <= self.c_max:
            raise ConfigError("need 2 <= c_min <= c_max")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.top_words < 1:
            raise ConfigError("top_words must be >= 1")
        if self.min_token_len < 1:
            raise ConfigError("min_token_len must be >= 1")

    def effective_alpha(self) -> float:
        return 50.0 / self.k if self.alpha is None else self.alpha

    def tokenizer(self) -> TokenizerConfig:
        stop = default_stopwords() if self.stopword_path is None else load_stopwords(self.stopword_path)
        return TokenizerConfig(
            lowercase=self.lowercase,
            min_token_len=self.min_token_len,
            stopwords=stop,
            strip_urls=self.strip_urls,
        )

    def config_hash(self) -> str:
        payload = {name: getattr(self, name) for name in _HASHED_FIELDS}
        payload["alpha"] = self.effective_alpha()
        payload["stopwords"] = sorted(self.tokenizer().stopwords)
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    if raw.lower() in ("none", "null"):
        return None
    ftype = _FIELD_TYPES[name]
    try:
        if ftype == "bool":
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype in ("float", "float | None"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an optional `key = value` file plus overrides.

    File lines may use `=` or `:` separators; '#' starts a comment. Override
    values that are None are ignored (unset flags).
    """
    cfg = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"no such config file: {path}")
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            sep = "=" if "=" in line else ":" if ":" in line else None
            if sep is None:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            name, raw = (part.strip() for part in line.split(sep, 1))
            setattr(cfg, name, _coerce(name, raw))
    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {name!r}")
        setattr(cfg, name, value)
    cfg.validate()
    return cfg


def stable_seed(*parts) -> int:
    """Deterministic 63-bit sub-seed derived from arbitrary labeled parts."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1
