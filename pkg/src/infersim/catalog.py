"""Model architecture descriptions and the memory/compute figures derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from infersim.config import ConfigError, check_fields, load_json, load_preset, require

GQA = "GQA"
MLA = "MLA"


@dataclass(frozen=True)
class Attention:
    kind: str = GQA
    latent_dim: int = 0
    rope_dim: int = 0


@dataclass(frozen=True)
class MoE:
    num_moe_layers: int


@dataclass(frozen=True)
class ModelSpec:
    name: str
    num_layers: int
    hidden_size: int
    num_heads: int
    num_kv_heads: int
    head_dim: int
    total_params: int
    active_params: int
    dtype_bytes: int = 2
    attention: Attention = field(default_factory=Attention)
    moe: MoE | None = None
    # Forces a published per-token KV figure instead of the formula value.
    kv_bytes_per_token_override: int | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        where = f"model '{self.name}'"
        for fname in ("num_layers", "hidden_size", "num_heads", "num_kv_heads", "head_dim"):
            if getattr(self, fname) < 1:
                raise ConfigError(f"{where}: {fname} must be >= 1")
        if self.num_kv_heads > self.num_heads:
            raise ConfigError(f"{where}: num_kv_heads ({self.num_kv_heads}) > num_heads ({self.num_heads})")
        if self.total_params < 0 or self.active_params < 0:
            raise ConfigError(f"{where}: total_params/active_params must be >= 0")
        if self.active_params > self.total_params:
            raise ConfigError(f"{where}: active_params exceeds total_params")
        if self.moe is None and self.active_params != self.total_params:
            raise ConfigError(f"{where}: active_params must equal total_params for a dense model")
        if self.dtype_bytes not in (1, 2, 4):
            raise ConfigError(f"{where}: dtype_bytes must be 1, 2 or 4")
        if self.attention.kind == GQA:
            if self.head_dim * self.num_heads != self.hidden_size:
                raise ConfigError(f"{where}: head_dim * num_heads != hidden_size for a GQA model")
        elif self.attention.kind == MLA:
            if self.attention.latent_dim < 1 or self.attention.rope_dim < 0:
                raise ConfigError(f"{where}: attention.latent_dim must be >= 1 for MLA")
        else:
            raise ConfigError(f"{where}: attention must be GQA or MLA, got {self.attention.kind!r}")
        if self.moe is not None and not 0 <= self.moe.num_moe_layers <= self.num_layers:
            raise ConfigError(f"{where}: moe.num_moe_layers must lie in [0, num_layers]")
        if self.kv_bytes_per_token_override is not None and self.kv_bytes_per_token_override < 1:
            raise ConfigError(f"{where}: kv_bytes_per_token_override must be >= 1")

    @property
    def is_moe(self) -> bool:
        return self.moe is not None

    @property
    def num_moe_layers(self) -> int:
        return self.moe.num_moe_layers if self.moe is not None else 0


def kv_bytes_per_token(model: ModelSpec) -> int:
    """Bytes of KV cache one token occupies across all layers.

    GQA stores a key and a value vector per KV head per layer; MLA stores one
    compressed latent (plus the decoupled rope part) per layer.
    """
    if model.kv_bytes_per_token_override is not None:
        return model.kv_bytes_per_token_override
    if model.attention.kind == MLA:
        width = model.attention.latent_dim + model.attention.rope_dim
        return model.num_layers * width * model.dtype_bytes
    return 2 * model.num_layers * model.num_kv_heads * model.head_dim * model.dtype_bytes


def weight_bytes(model: ModelSpec) -> int:
    return model.total_params * model.dtype_bytes


def weight_read_bytes(model: ModelSpec) -> int:
    """Weight bytes streamed from HBM per forward pass (active experts only for MoE)."""
    return model.active_params * model.dtype_bytes


def flops_per_token(model: ModelSpec) -> int:
    return 2 * model.active_params


@dataclass
class ModelCatalog:
    entries: dict[str, ModelSpec] = field(default_factory=dict)

    def __getitem__(self, name: str) -> ModelSpec:
        try:
            return self.entries[name]
        except KeyError:
            known = ", ".join(sorted(self.entries)) or "none"
            raise KeyError(f"unknown model '{name}' (known: {known})") from None

    def __contains__(self, name: object) -> bool:
        return name in self.entries

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, model: ModelSpec) -> None:
        if model.name in self.entries:
            raise ConfigError(f"duplicate model name '{model.name}'")
        self.entries[model.name] = model


_MODEL_FIELDS = {
    "name", "num_layers", "hidden_size", "num_heads", "num_kv_heads", "head_dim",
    "attention", "total_params", "active_params", "dtype_bytes", "moe",
    "kv_bytes_per_token_override",
}


def model_from_dict(table: dict, name: str | None = None) -> ModelSpec:
    table = dict(table)
    if name is not None:
        table.setdefault("name", name)
    where = f"model '{table.get('name', '?')}'"
    check_fields(table, _MODEL_FIELDS, where)
    attn = table.get("attention", GQA)
    if isinstance(attn, str):
        attention = Attention(kind=attn)
    elif isinstance(attn, dict):
        check_fields(attn, {"kind", "latent_dim", "rope_dim"}, f"{where}.attention")
        attention = Attention(
            kind=require(attn, "kind", f"{where}.attention"),
            latent_dim=int(attn.get("latent_dim", 0)),
            rope_dim=int(attn.get("rope_dim", 0)),
        )
    else:
        raise ConfigError(f"{where}: attention must be a string or a table")
    moe = table.get("moe")
    if moe is not None:
        check_fields(moe, {"num_moe_layers"}, f"{where}.moe")
        moe = MoE(num_moe_layers=int(moe.get("num_moe_layers", table.get("num_layers", 0))))
    total = int(float(require(table, "total_params", where)))
    try:
        return ModelSpec(
            name=require(table, "name", where),
            num_layers=int(require(table, "num_layers", where)),
            hidden_size=int(require(table, "hidden_size", where)),
            num_heads=int(require(table, "num_heads", where)),
            num_kv_heads=int(require(table, "num_kv_heads", where)),
            head_dim=int(require(table, "head_dim", where)),
            total_params=total,
            active_params=int(float(table.get("active_params", total))),
            dtype_bytes=int(table.get("dtype_bytes", 2)),
            attention=attention,
            moe=moe,
            kv_bytes_per_token_override=table.get("kv_bytes_per_token_override"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


def catalog_from_dict(data: dict) -> ModelCatalog:
    if not isinstance(data, dict):
        raise ConfigError("model catalog must be a table of model tables")
    catalog = ModelCatalog()
    for name, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"model '{name}': expected a table")
        catalog.add(model_from_dict(table, name))
    return catalog


def load_catalog(path: str | Path) -> ModelCatalog:
    return catalog_from_dict(load_json(path))


def bundled_catalog() -> ModelCatalog:
    return catalog_from_dict(load_preset("models.json"))
