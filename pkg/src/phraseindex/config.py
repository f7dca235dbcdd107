"""Engine configuration shared by the CLI and the HTTP service."""

from __future__ import annotations

from dataclasses import dataclass, field

from .alsh import AlshParams
from .errors import ConfigError

ENCODERS = ("tfidf", "dense_lstm", "dense_lstm_sa")

# Config-level encoder names map onto the composition modes of the dense
# encoder; tfidf passes through.
_BUILD_NAMES = {"tfidf": "tfidf", "dense_lstm": "lstm", "dense_lstm_sa": "lstm_sa"}


@dataclass
class EngineConfig:
    encoder: str = "tfidf"
    max_span_len: int = 7
    window: int = 7
    alsh: AlshParams = field(default_factory=AlshParams)
    corpus_path: str | None = None
    word_vectors_path: str | None = None
    index_path: str | None = None
    filter_path: str | None = None

    def validate(self) -> None:
        if self.encoder not in ENCODERS:
            raise ConfigError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.max_span_len < 1:
            raise ConfigError(f"max_span_len must be >= 1, got {self.max_span_len}")
        if self.window < 0:
            raise ConfigError(f"window must be >= 0, got {self.window}")
        if self.encoder != "tfidf" and not self.word_vectors_path:
            raise ConfigError(f"encoder {self.encoder!r} requires a word-vector file")
        self.alsh.validate()

    @property
    def build_encoder(self) -> str:
        return _BUILD_NAMES[self.encoder]
