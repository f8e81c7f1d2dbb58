"""Low-rank adapter algebra at desk scale, plus fine-tune config emission.

The adapter keeps the frozen base matrix and the two low-rank factors; the
forward pass applies the factors without ever materializing their product.
Training itself is out of scope here: the point is to make the update rule
checkable and to export the hyperparameter file consumed by external tools.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from decimal import Decimal
from pathlib import Path

import numpy as np

from .errors import MissingField, RankTooLarge, ShapeMismatch

DEFAULT_INIT_SIGMA = 0.02


@dataclass
class LowRankAdapter:
    """Frozen base W0 (d_out x d_in) with trainable factors B (d_out x r) and
    A (r x d_in); the effective weight is W0 + scale * B @ A."""

    W0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    r: int
    scale: float = 1.0

    @property
    def d_out(self) -> int:
        return self.W0.shape[0]

    @property
    def d_in(self) -> int:
        return self.W0.shape[1]


def init_adapter(
    W0: np.ndarray,
    r: int,
    seed: int,
    sigma: float = DEFAULT_INIT_SIGMA,
    scale: float = 1.0,
) -> LowRankAdapter:
    """Gaussian-initialize A, zero-initialize B, so a fresh adapter is an
    exact no-op on top of W0."""
    W0 = np.asarray(W0, dtype=np.float64)
    if W0.ndim != 2:
        raise ShapeMismatch("W0 must be a 2-D matrix")
    d_out, d_in = W0.shape
    if r < 1 or r > min(d_in, d_out):
        raise RankTooLarge(f"rank {r} not in [1, {min(d_in, d_out)}]")
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, sigma, size=(r, d_in))
    B = np.zeros((d_out, r), dtype=np.float64)
    return LowRankAdapter(W0=W0, A=A, B=B, r=r, scale=scale)


def forward(adapter: LowRankAdapter, x: np.ndarray) -> np.ndarray:
    """h = W0 x + B (A x), factored so B @ A is never formed."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (adapter.d_in,):
        raise ShapeMismatch(f"expected input of shape ({adapter.d_in},), got {x.shape}")
    return adapter.W0 @ x + adapter.scale * (adapter.B @ (adapter.A @ x))


def merge(adapter: LowRankAdapter) -> np.ndarray:
    """Collapse the adapter into a single matrix W0 + scale * B @ A."""
    return adapter.W0 + adapter.scale * (adapter.B @ adapter.A)


@dataclass(frozen=True)
class ParamSavings:
    full: int
    lora: int
    ratio: float


def param_savings(d_in: int, d_out: int, r: int) -> ParamSavings:
    """Trainable-parameter counts: full matrix vs. the two low-rank factors."""
    if d_in < 1 or d_out < 1:
        raise ShapeMismatch("dimensions must be positive")
    if r < 1 or r > min(d_in, d_out):
        raise RankTooLarge(f"rank {r} not in [1, {min(d_in, d_out)}]")
    full = d_in * d_out
    lora = r * (d_in + d_out)
    return ParamSavings(full=full, lora=lora, ratio=lora / full)


@dataclass
class FinetuneConfig:
    """Hyperparameters for an external LoRA fine-tuning run."""

    learning_rate: float = 0.00005
    epochs: int = 30
    cutoff_len: int = 1024
    batch_size: int = 2
    compute_type: str = "fp16"
    lr_scheduler: str = "cosine"
    optimizer: str = "adamw_torch"
    lora_rank: int = 8
    lora_target: str = "all"

    def __post_init__(self):
        if self.lora_rank < 1:
            raise RankTooLarge("lora_rank must be >= 1")


def _format_value(value) -> str:
    if isinstance(value, float):
        # plain decimal notation, never scientific (0.00005, not 5e-05)
        return format(Decimal(repr(value)), "f")
    return str(value)


def emit_config(cfg: FinetuneConfig, path: str | Path) -> Path:
    """Write the config as UTF-8 `key=value` lines, one per field."""
    path = Path(path)
    lines = [f"{f.name}={_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def parse_config(path: str | Path) -> FinetuneConfig:
    """Inverse of emit_config; every field must be present."""
    raw: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        raw[key.strip()] = value.strip()
    kwargs = {}
    for f in fields(FinetuneConfig):
        if f.name not in raw:
            raise MissingField(f.name)
        kwargs[f.name] = _convert(f.name, raw[f.name])
    return FinetuneConfig(**kwargs)


_INT_FIELDS = {"epochs", "cutoff_len", "batch_size", "lora_rank"}
_FLOAT_FIELDS = {"learning_rate"}


def _convert(name: str, value: str):
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return value
