"""Classifier heads over sentence embeddings: Bi-RNN, Bi-LSTM and MCNN-LSTM.

A flat embedding of width ``input_dim`` is viewed as ``sequence_length``
steps of ``input_dim // sequence_length`` features. Every head ends in a
single sigmoid unit giving the probability of the racism class.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .corpus import BinaryLabel
from .errors import CheckpointError, ConfigError, DivergenceError, InputError

log = logging.getLogger(__name__)

__all__ = [
    "Architecture",
    "ModelConfig",
    "TrainConfig",
    "EpochStats",
    "TrainedModel",
    "Prediction",
    "DEFAULT_THRESHOLD",
    "default_epochs",
    "reshape_embedding",
    "flatten_sequence",
    "build_model",
    "train",
    "predict_proba",
    "predict_batch",
    "save_checkpoint",
    "load_checkpoint",
]

DEFAULT_THRESHOLD = 0.5
CHECKPOINT_FORMAT = "bnracism-checkpoint"
CHECKPOINT_VERSION = 1


class Architecture(str, enum.Enum):
    BI_RNN = "bi_rnn"
    BI_LSTM = "bi_lstm"
    MCNN_LSTM = "mcnn_lstm"

    @property
    def display_name(self) -> str:
        return {"bi_rnn": "Bi-RNN", "bi_lstm": "Bi-LSTM", "mcnn_lstm": "MCNN-LSTM"}[self.value]

    @classmethod
    def parse(cls, raw: str) -> "Architecture":
        key = raw.strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown model {raw!r}; choose from {[a.value for a in cls]}") from None


def default_epochs(arch: Architecture) -> int:
    return 18 if arch is Architecture.MCNN_LSTM else 10


@dataclass(frozen=True)
class ModelConfig:
    architecture: Architecture
    input_dim: int = 768
    kernel_sizes: tuple[int, int, int] = (4, 6, 8)
    conv_filters: int = 64
    pool_size: int = 2
    hidden_units: int = 64
    sequence_length: int | None = None  # None: one feature per step

    def __post_init__(self) -> None:
        object.__setattr__(self, "architecture", Architecture(self.architecture))
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        if self.sequence_length is None:
            object.__setattr__(self, "sequence_length", self.input_dim)
        self.validate()

    @property
    def feature_width(self) -> int:
        return self.input_dim // self.sequence_length

    def validate(self) -> None:
        if self.input_dim < 1 or self.hidden_units < 1:
            raise ConfigError("input_dim and hidden_units must be positive")
        L = self.sequence_length
        if L < 1 or self.input_dim % L:
            raise ConfigError(f"sequence_length {L} does not divide input_dim {self.input_dim}")
        if self.architecture is Architecture.MCNN_LSTM:
            if len(self.kernel_sizes) != 3:
                raise ConfigError(f"MCNN-LSTM needs exactly three kernel sizes, got {self.kernel_sizes}")
            if self.conv_filters < 1 or self.pool_size < 1:
                raise ConfigError("conv_filters and pool_size must be positive")
            for k in self.kernel_sizes:
                if k < 1 or k >= L:
                    raise ConfigError(f"kernel size {k} must be in [1, sequence_length={L})")
                if (L - k + 1) // self.pool_size < 1:
                    raise ConfigError(f"kernel {k} with pool {self.pool_size} leaves no steps from length {L}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["architecture"] = self.architecture.value
        d["kernel_sizes"] = list(self.kernel_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["architecture"] = Architecture(d["architecture"])
        d["kernel_sizes"] = tuple(d.get("kernel_sizes", (4, 6, 8)))
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 10
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    loss: str = "binary_cross_entropy"
    seed: int = 42

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ConfigError("epochs, batch_size and learning_rate must be positive")
        if self.optimizer.lower() not in _OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; choose from {sorted(_OPTIMIZERS)}")
        if self.loss not in ("binary_cross_entropy", "cross_entropy"):
            raise ConfigError(f"unsupported loss {self.loss!r}")


_OPTIMIZERS = {"adam": torch.optim.Adam, "nadam": torch.optim.NAdam, "radam": torch.optim.RAdam}


@dataclass(frozen=True)
class EpochStats:
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass(frozen=True)
class Prediction:
    probability: float
    label: BinaryLabel

    @classmethod
    def from_probability(cls, p: float, threshold: float = DEFAULT_THRESHOLD) -> "Prediction":
        return cls(float(p), BinaryLabel.RACISM if p >= threshold else BinaryLabel.NON_RACISM)


def reshape_embedding(v: np.ndarray | Sequence[float], config: ModelConfig) -> np.ndarray:
    """View a flat vector as ``(sequence_length, feature_width)``."""
    arr = np.asarray(getattr(v, "values", v))
    if arr.shape != (config.input_dim,):
        raise ConfigError(f"expected a vector of length {config.input_dim}, got shape {arr.shape}")
    if config.input_dim % config.sequence_length:
        raise ConfigError(f"sequence_length {config.sequence_length} does not divide {config.input_dim}")
    return arr.reshape(config.sequence_length, config.feature_width)


def flatten_sequence(steps: np.ndarray) -> np.ndarray:
    return np.asarray(steps).reshape(-1)


class _BiRecurrent(nn.Module):
    def __init__(self, config: ModelConfig, cell: type[nn.RNNBase]) -> None:
        super().__init__()
        self.config = config
        self.rnn = cell(config.feature_width, config.hidden_units, batch_first=True, bidirectional=True)
        self.head = nn.Linear(2 * config.hidden_units, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, input_dim)
        seq = x.reshape(x.shape[0], self.config.sequence_length, self.config.feature_width)
        _, h = self.rnn(seq)
        if isinstance(h, tuple):
            h = h[0]
        # h: (2, batch, hidden) -> forward and backward final states side by side
        final = torch.cat([h[0], h[1]], dim=1)
        return torch.sigmoid(self.head(final)).squeeze(1)


class _Channel(nn.Module):
    def __init__(self, config: ModelConfig, kernel: int) -> None:
        super().__init__()
        self.conv = nn.Conv1d(config.feature_width, config.conv_filters, kernel)
        self.pool = nn.MaxPool1d(config.pool_size)
        self.lstm = nn.LSTM(config.conv_filters, config.hidden_units, batch_first=True)

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        # seq: (batch, steps, width); Conv1d wants channels first
        z = self.pool(torch.relu(self.conv(seq.transpose(1, 2))))
        _, (h, _) = self.lstm(z.transpose(1, 2))
        return h[-1]


class _MultiChannelCnnLstm(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        self.channels = nn.ModuleList(_Channel(config, k) for k in config.kernel_sizes)
        self.head = nn.Linear(len(config.kernel_sizes) * config.hidden_units, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, input_dim) shared by all channels, or (batch, 3, input_dim)
        if x.dim() == 2:
            x = x.unsqueeze(1).expand(-1, len(self.channels), -1)
        L, W = self.config.sequence_length, self.config.feature_width
        feats = [ch(x[:, i].reshape(x.shape[0], L, W)) for i, ch in enumerate(self.channels)]
        return torch.sigmoid(self.head(torch.cat(feats, dim=1))).squeeze(1)


def build_model(config: ModelConfig, seed: int = 42) -> nn.Module:
    """Fresh, seeded network for ``config``.

    Weights use PyTorch's default uniform fan-in initialisation, drawn under
    a private RNG seeded with ``seed``.
    """
    config.validate()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        if config.architecture is Architecture.BI_RNN:
            return _BiRecurrent(config, nn.RNN)
        if config.architecture is Architecture.BI_LSTM:
            return _BiRecurrent(config, nn.LSTM)
        return _MultiChannelCnnLstm(config)


@dataclass
class TrainedModel:
    config: ModelConfig
    module: nn.Module
    history: list[EpochStats] = field(default_factory=list)
    train_config: TrainConfig | None = None

    @property
    def name(self) -> str:
        return self.config.architecture.display_name


def _as_inputs(x: np.ndarray | Sequence, config: ModelConfig) -> torch.Tensor:
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[None, :]
    multi = arr.ndim == 3
    if arr.shape[-1] != config.input_dim:
        raise ConfigError(f"model expects {config.input_dim}-dim embeddings, got {arr.shape[-1]}")
    if multi and (config.architecture is not Architecture.MCNN_LSTM or arr.shape[1] != len(config.kernel_sizes)):
        raise ConfigError(f"per-channel inputs of shape {arr.shape} do not fit {config.architecture.value}")
    if arr.ndim not in (2, 3):
        raise ConfigError(f"cannot use inputs of shape {arr.shape}")
    return torch.from_numpy(np.ascontiguousarray(arr))


def _as_labels(y: Sequence[int] | np.ndarray) -> torch.Tensor:
    arr = np.asarray(y)
    if not np.isin(arr, (0, 1)).all():
        raise InputError("labels must be binary 0/1")
    return torch.from_numpy(arr.astype(np.float32))


def _evaluate(module: nn.Module, x: torch.Tensor, y: torch.Tensor, loss_fn: nn.Module, batch: int = 256) -> tuple[float, float]:
    module.eval()
    total_loss, correct = 0.0, 0
    with torch.no_grad():
        for s in range(0, len(x), batch):
            p = module(x[s : s + batch])
            total_loss += loss_fn(p, y[s : s + batch]).item() * len(p)
            correct += int(((p >= DEFAULT_THRESHOLD).float() == y[s : s + batch]).sum())
    return total_loss / len(x), correct / len(x)


def train(
    model: nn.Module,
    x_train: np.ndarray,
    y_train: Sequence[int],
    x_val: np.ndarray | None,
    y_val: Sequence[int] | None,
    tcfg: TrainConfig,
) -> TrainedModel:
    """Mini-batch training with binary cross-entropy on the sigmoid output.

    Batches are reshuffled every epoch from a generator seeded with
    ``tcfg.seed``. Without validation data the validation columns repeat
    the end-of-epoch training metrics.
    """
    config: ModelConfig = model.config
    xt, yt = _as_inputs(x_train, config), _as_labels(y_train)
    if len(xt) != len(yt) or len(xt) == 0:
        raise InputError(f"{len(xt)} training inputs vs {len(yt)} labels")
    if x_val is not None:
        xv, yv = _as_inputs(x_val, config), _as_labels(y_val)
        if len(xv) != len(yv) or len(xv) == 0:
            raise InputError(f"{len(xv)} validation inputs vs {len(yv)} labels")
    else:
        xv = yv = None

    optimizer = _OPTIMIZERS[tcfg.optimizer.lower()](model.parameters(), lr=tcfg.learning_rate)
    loss_fn = nn.BCELoss()
    gen = torch.Generator().manual_seed(tcfg.seed)
    history: list[EpochStats] = []

    for epoch in range(1, tcfg.epochs + 1):
        model.train()
        order = torch.randperm(len(xt), generator=gen)
        seen, loss_sum, correct = 0, 0.0, 0
        for s in range(0, len(xt), tcfg.batch_size):
            idx = order[s : s + tcfg.batch_size]
            xb, yb = xt[idx], yt[idx]
            optimizer.zero_grad()
            p = model(xb)
            # BCELoss rejects NaN inputs with a RuntimeError, so check first.
            if not torch.isfinite(p).all():
                raise DivergenceError(epoch)
            loss = loss_fn(p, yb)
            if not torch.isfinite(loss):
                raise DivergenceError(epoch)
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * len(idx)
            correct += int(((p.detach() >= DEFAULT_THRESHOLD).float() == yb).sum())
            seen += len(idx)
        train_loss, train_acc = loss_sum / seen, correct / seen
        if xv is not None:
            val_loss, val_acc = _evaluate(model, xv, yv, loss_fn)
        else:
            val_loss, val_acc = _evaluate(model, xt, yt, loss_fn)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise DivergenceError(epoch)
        history.append(EpochStats(train_loss, train_acc, val_loss, val_acc))
        log.info(
            "%s epoch %d/%d loss=%.4f acc=%.4f val_loss=%.4f val_acc=%.4f",
            config.architecture.display_name, epoch, tcfg.epochs, train_loss, train_acc, val_loss, val_acc,
        )

    model.eval()
    return TrainedModel(config, model, history, tcfg)


def predict_batch(model: TrainedModel, x: np.ndarray, batch: int = 256) -> np.ndarray:
    """Racism probabilities for a batch of embeddings, in input order."""
    xt = _as_inputs(x, model.config)
    model.module.eval()
    out = []
    with torch.no_grad():
        for s in range(0, len(xt), batch):
            out.append(model.module(xt[s : s + batch]).numpy())
    probs = np.concatenate(out) if out else np.zeros(0, np.float32)
    return np.clip(probs.astype(np.float64), 0.0, 1.0)


def predict_proba(model: TrainedModel, v: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> Prediction:
    arr = np.asarray(getattr(v, "values", v), dtype=np.float32)
    if arr.ndim not in (1, 2) or (arr.ndim == 2 and arr.shape[0] != len(model.config.kernel_sizes)):
        raise InputError(f"predict_proba takes one embedding, got shape {arr.shape}")
    return Prediction.from_probability(float(predict_batch(model, arr[None])[0]), threshold)


def save_checkpoint(model: TrainedModel, path: str | Path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "train_config": asdict(model.train_config) if model.train_config else None,
        "state_dict": {k: v.detach().clone() for k, v in model.module.state_dict().items()},
        "history": [[h.train_loss, h.train_acc, h.val_loss, h.val_acc] for h in model.history],
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path, expected: Architecture | str | None = None) -> TrainedModel:
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {payload.get('version')} unsupported")
    try:
        config = ModelConfig.from_dict(payload["config"])
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise CheckpointError(f"{path}: bad model config ({exc})") from exc
    if expected is not None:
        want = Architecture.parse(expected) if isinstance(expected, str) else expected
        if config.architecture is not want:
            raise CheckpointError(f"{path}: holds a {config.architecture.value} model, expected {want.value}")
    module = build_model(config)
    try:
        module.load_state_dict(payload["state_dict"])
    except RuntimeError as exc:
        raise CheckpointError(f"{path}: parameters do not fit the config ({exc})") from exc
    module.eval()
    tc = payload.get("train_config")
    history = [EpochStats(*map(float, row)) for row in payload.get("history", [])]
    return TrainedModel(config, module, history, TrainConfig(**tc) if tc else None)
