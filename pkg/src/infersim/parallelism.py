"""Placement of a model onto GPUs under (DP, TP, PP) and the communication costs that follow."""

from __future__ import annotations

from dataclasses import MISSING, dataclass, fields, replace
from pathlib import Path
from typing import TYPE_CHECKING

from infersim.catalog import ModelSpec, kv_bytes_per_token, weight_bytes
from infersim.config import ConfigError, check_fields, load_json, load_preset

if TYPE_CHECKING:
    from infersim.scheduler import SchedulerConfig


@dataclass(frozen=True)
class HardwareSpec:
    name: str
    num_gpus: int
    hbm_capacity: float  # bytes per GPU
    hbm_bandwidth: float  # bytes/s per GPU
    peak_flops: float  # flop/s per GPU
    link_bandwidth: float  # bytes/s per GPU
    link_latency: float  # seconds per ring hop
    mem_efficiency: float = 0.8
    compute_efficiency: float = 0.5
    moe_route_latency: float = 20e-6  # seconds per MoE layer per step
    launch_overhead: float = 50e-6  # seconds per engine step
    activation_reserve: float = 0.05  # fraction of HBM kept for activations

    def __post_init__(self) -> None:
        where = f"hardware '{self.name}'"
        if self.num_gpus < 1:
            raise ConfigError(f"{where}: num_gpus must be >= 1")
        for fname in ("hbm_capacity", "hbm_bandwidth", "peak_flops", "link_bandwidth"):
            if not getattr(self, fname) > 0:
                raise ConfigError(f"{where}: {fname} must be positive")
        for fname in ("link_latency", "moe_route_latency", "launch_overhead"):
            if getattr(self, fname) < 0:
                raise ConfigError(f"{where}: {fname} must be non-negative")
        for fname in ("mem_efficiency", "compute_efficiency"):
            if not 0 < getattr(self, fname) <= 1:
                raise ConfigError(f"{where}: {fname} must lie in (0, 1]")
        if not 0 <= self.activation_reserve < 1:
            raise ConfigError(f"{where}: activation_reserve must lie in [0, 1)")

    def with_overrides(self, **overrides: float) -> HardwareSpec:
        known = {f.name for f in fields(self)}
        bad = sorted(set(overrides) - known)
        if bad:
            raise ConfigError(f"hardware '{self.name}': unknown override(s) {', '.join(bad)}")
        return replace(self, **overrides)


@dataclass(frozen=True, order=True)
class ParallelismConfig:
    dp: int = 1
    tp: int = 1
    pp: int = 1

    def __post_init__(self) -> None:
        if min(self.dp, self.tp, self.pp) < 1:
            raise ConfigError(f"parallelism degrees must be >= 1, got {self}")

    @property
    def num_gpus(self) -> int:
        return self.dp * self.tp * self.pp

    @property
    def shards(self) -> int:
        """GPUs holding one model replica."""
        return self.tp * self.pp

    def __str__(self) -> str:
        return f"dp{self.dp}-tp{self.tp}-pp{self.pp}"

    @classmethod
    def parse(cls, text: str) -> ParallelismConfig:
        """Accepts ``"4,2,1"`` or ``"dp4-tp2-pp1"``."""
        cleaned = text.lower().replace("dp", "").replace("tp", "").replace("pp", "")
        parts = [p for p in cleaned.replace("-", ",").split(",") if p.strip()]
        if len(parts) != 3:
            raise ConfigError(f"cannot parse parallelism '{text}', expected dp,tp,pp")
        dp, tp, pp = (int(p) for p in parts)
        return cls(dp, tp, pp)


@dataclass(frozen=True)
class PlacementReport:
    weight_bytes_per_gpu: float
    kv_headroom_per_gpu: float
    kv_pool_tokens_per_replica: int
    feasible: bool
    infeasibility_reason: str | None = None


def enumerate_configs(num_gpus: int) -> list[ParallelismConfig]:
    if num_gpus < 1:
        raise ValueError("num_gpus must be >= 1")
    out = []
    for dp in range(1, num_gpus + 1):
        if num_gpus % dp:
            continue
        rest = num_gpus // dp
        for tp in range(1, rest + 1):
            if rest % tp == 0:
                out.append(ParallelismConfig(dp, tp, rest // tp))
    return out


def placement(
    model: ModelSpec,
    hw: HardwareSpec,
    cfg: ParallelismConfig,
    sched: SchedulerConfig | None = None,
) -> PlacementReport:
    util = sched.gpu_memory_utilization if sched is not None else 0.9
    budget = hw.hbm_capacity * util
    w_gpu = weight_bytes(model) / cfg.shards
    headroom = max(0.0, budget - w_gpu)
    pool_tokens = int(headroom * cfg.shards // kv_bytes_per_token(model))
    reason = None
    if cfg.num_gpus > hw.num_gpus:
        reason = f"{cfg} needs {cfg.num_gpus} GPUs, hardware has {hw.num_gpus}"
    elif w_gpu + hw.activation_reserve * hw.hbm_capacity >= budget:
        reason = (
            f"weights {w_gpu / 1e9:.1f} GB/GPU plus activation reserve do not fit in "
            f"{budget / 1e9:.1f} GB usable HBM"
        )
    elif pool_tokens < (sched.block_size if sched is not None else 16):
        reason = "KV headroom smaller than one block"
    return PlacementReport(
        weight_bytes_per_gpu=w_gpu,
        kv_headroom_per_gpu=headroom,
        kv_pool_tokens_per_replica=pool_tokens,
        feasible=reason is None,
        infeasibility_reason=reason,
    )


def allreduce_time(nbytes: float, tp: int, hw: HardwareSpec) -> float:
    """Ring all-reduce: bandwidth term plus one link latency per hop."""
    if tp <= 1:
        return 0.0
    return 2 * (tp - 1) / tp * nbytes / hw.link_bandwidth + 2 * (tp - 1) * hw.link_latency


def pp_bubble_fraction(pp: int, microbatches: int) -> float:
    if pp < 1 or microbatches < 1:
        raise ValueError("pp and microbatches must be >= 1")
    return (pp - 1) / (microbatches + pp - 1)


_HW_FIELDS = {f.name for f in fields(HardwareSpec)}


def hardware_from_dict(table: dict, name: str | None = None) -> HardwareSpec:
    table = dict(table)
    if name is not None:
        table.setdefault("name", name)
    where = f"hardware '{table.get('name', '?')}'"
    check_fields(table, _HW_FIELDS, where)
    missing = sorted(
        f.name for f in fields(HardwareSpec) if f.name not in table and f.default is MISSING
    )
    if missing:
        raise ConfigError(f"{where}: missing field(s) {', '.join(missing)}")
    try:
        values = {k: (v if k == "name" else float(v)) for k, v in table.items()}
        values["num_gpus"] = int(values["num_gpus"])
        return HardwareSpec(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc


def load_hardware_file(path: str | Path) -> dict[str, HardwareSpec]:
    data = load_json(path)
    return {name: hardware_from_dict(t, name) for name, t in data.items()}


def bundled_hardware() -> dict[str, HardwareSpec]:
    data = load_preset("hardware.json")
    return {name: hardware_from_dict(t, name) for name, t in data.items()}
