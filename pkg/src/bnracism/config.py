"""Pipeline configuration: defaults, YAML file, then command-line overrides."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .embeddings import PROVIDERS, EmbeddingProvider, get_provider
from .errors import ConfigError
from .models import Architecture, ModelConfig, TrainConfig, default_epochs
from .preprocess import CleanConfig, PosTag, StopPosLexicon

__all__ = [
    "PreprocessSettings",
    "EmbeddingSettings",
    "ModelSettings",
    "TrainSettings",
    "PipelineConfig",
    "load_config",
    "merge",
]


@dataclass
class PreprocessSettings:
    numbers: bool = True
    punctuation: bool = True
    emoji: bool = True
    pos: bool = True
    drop_tags: list[str] = field(default_factory=lambda: ["PRONOUN", "CONJUNCTION", "INTERJECTION", "PREPOSITION"])
    lexicon: str | None = None
    keep_empty: bool = False

    def clean_config(self) -> CleanConfig:
        source = StopPosLexicon.from_file(self.lexicon) if self.lexicon else None
        return CleanConfig(
            numbers=self.numbers,
            punctuation=self.punctuation,
            emoji=self.emoji,
            pos=self.pos,
            drop_tags=frozenset(PosTag.parse(t) for t in self.drop_tags),
            pos_source=source,
        )


@dataclass
class EmbeddingSettings:
    provider: str = "stub"
    dim: int | None = 768
    batch_size: int = 32
    seed: int = 0  # stub provider only
    workers: int = 1

    @property
    def dimension(self) -> int:
        if self.provider in PROVIDERS:
            return PROVIDERS[self.provider][1]
        if self.dim is None:
            raise ConfigError("embedding.dim is required for the stub provider")
        return self.dim

    def make_provider(self) -> EmbeddingProvider:
        dim = self.dim if self.provider == "stub" else None
        return get_provider(self.provider, dim, self.seed)


@dataclass
class ModelSettings:
    sequence_length: int | None = None
    kernel_sizes: list[int] = field(default_factory=lambda: [4, 6, 8])
    conv_filters: int = 64
    pool_size: int = 2
    hidden_units: int = 64


@dataclass
class TrainSettings:
    epochs: int | None = None  # None: 10 for the recurrent heads, 18 for MCNN-LSTM
    batch_size: int = 10
    learning_rate: float = 1e-4
    optimizer: str = "adam"


_ARCH_KEYS = {f.name for f in fields(ModelSettings)} | {f.name for f in fields(TrainSettings)}


@dataclass
class PipelineConfig:
    dataset: str | None = None
    out: str = "runs/default"
    seed: int = 42
    split_ratio: float = 0.8
    stratify: bool = True
    hard_vote: bool = False
    mcnn_channel_caches: list[str] | None = None
    preprocess: PreprocessSettings = field(default_factory=PreprocessSettings)
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    # per-architecture overrides of any model/train key, e.g. {"mcnn_lstm": {"epochs": 18}}
    models: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for arch, over in self.models.items():
            Architecture.parse(arch)
            unknown = set(over) - _ARCH_KEYS
            if unknown:
                raise ConfigError(f"models.{arch}: unknown key(s) {sorted(unknown)}")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def _overrides(self, arch: Architecture) -> dict[str, Any]:
        for key, over in self.models.items():
            if Architecture.parse(key) is arch:
                return over
        return {}

    def model_config(self, arch: Architecture | str) -> ModelConfig:
        arch = Architecture.parse(arch) if isinstance(arch, str) else arch
        m = asdict(self.model)
        m.update({k: v for k, v in self._overrides(arch).items() if k in m})
        return ModelConfig(
            architecture=arch,
            input_dim=self.embedding.dimension,
            kernel_sizes=tuple(m["kernel_sizes"]),
            conv_filters=m["conv_filters"],
            pool_size=m["pool_size"],
            hidden_units=m["hidden_units"],
            sequence_length=m["sequence_length"],
        )

    def train_config(self, arch: Architecture | str) -> TrainConfig:
        arch = Architecture.parse(arch) if isinstance(arch, str) else arch
        t = asdict(self.train)
        t.update({k: v for k, v in self._overrides(arch).items() if k in t})
        return TrainConfig(
            epochs=t["epochs"] or default_epochs(arch),
            batch_size=t["batch_size"],
            learning_rate=float(t["learning_rate"]),
            optimizer=t["optimizer"],
            seed=self.seed,
        )

    def validate(self) -> None:
        # Every head must accept the one embedding dimension of this run.
        for arch in Architecture:
            self.model_config(arch)
            self.train_config(arch)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _build(cls, data: Mapping[str, Any], where: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value or {}, f"{where}.{name}" if where else name)
        else:
            kwargs[name] = value
    return replace(defaults, **kwargs) if kwargs else defaults


def merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; values in ``over`` win, ``None`` leaves ``base``."""
    out = dict(base)
    for k, v in over.items():
        if v is None:
            continue
        if isinstance(v, Mapping):
            prev = out.get(k)
            out[k] = merge(prev if isinstance(prev, Mapping) else {}, v)
        else:
            out[k] = v
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    data: dict[str, Any] = {}
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"--config: {path} does not exist") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        data = loaded or {}
        # A dataset path in a config file is relative to that file.
        ds = data.get("dataset")
        if ds and not Path(ds).is_absolute():
            data["dataset"] = str((Path(path).parent / ds).resolve())
    if overrides:
        data = merge(data, overrides)
    try:
        cfg = _build(PipelineConfig, data, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg
