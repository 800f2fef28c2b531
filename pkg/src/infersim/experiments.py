"""Scenario builders for the bundled experiments.

The acceptance suite and the scripts in ``scripts/`` build their runs from
here so both always simulate the same thing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from infersim.catalog import ModelCatalog, bundled_catalog, kv_bytes_per_token, weight_bytes
from infersim.engine import RunSummary, Scenario, SimulationError, run
from infersim.parallelism import HardwareSpec, ParallelismConfig, bundled_hardware, enumerate_configs
from infersim.planner import PlanEntry, plan
from infersim.scheduler import SchedulerConfig
from infersim.workload import HistogramSpec, WorkloadSpec, natural_reasoning, sample_workload, workload_stats

# Crossover runs: reduced batch, a slot cap that keeps DP8 replicas near their KV limit.
CROSSOVER_REQUESTS = 3000
CROSSOVER_MAX_SEQS = 32
CROSSOVER_MODELS = ("ds-qwen-14b", "ds-qwen-32b", "llama-405b", "ds-r1-671b")

CAPACITY_TRAP_SEQS = (10, 25, 40, 70, 100)
CLIFF_BATCHES = (1000, 5000)


def _hw() -> HardwareSpec:
    return bundled_hardware()["h200-node"]


def crossover_scheduler() -> SchedulerConfig:
    return SchedulerConfig(max_num_seqs=CROSSOVER_MAX_SEQS, max_num_batched_tokens=2048)


def crossover_scenario(model: str, cfg: ParallelismConfig, num_requests: int = CROSSOVER_REQUESTS,
                       catalog: ModelCatalog | None = None) -> Scenario:
    catalog = catalog or bundled_catalog()
    return Scenario(
        model=catalog[model], hardware=_hw(), parallelism=cfg, scheduler=crossover_scheduler(),
        workload=natural_reasoning(num_requests), telemetry_sample_interval=10**9,
        name=f"crossover-{model}-{cfg}",
    )


@dataclass(frozen=True)
class CrossoverResult:
    model: str
    makespans: dict[ParallelismConfig, float | None]  # None: infeasible placement
    summaries: dict[ParallelismConfig, RunSummary]
    plan: list[PlanEntry]

    def ranked(self) -> list[ParallelismConfig]:
        ok = [(m, (c.dp, c.tp, c.pp), c) for c, m in self.makespans.items() if m is not None]
        return [c for _, _, c in sorted(ok)]

    def best(self) -> ParallelismConfig:
        return self.ranked()[0]


def crossover(model: str, num_gpus: int = 8, num_requests: int = CROSSOVER_REQUESTS,
              check_invariants: bool = False) -> CrossoverResult:
    """Simulate every factorisation of ``num_gpus`` and plan the same workload analytically."""
    catalog = bundled_catalog()
    makespans: dict[ParallelismConfig, float | None] = {}
    summaries: dict[ParallelismConfig, RunSummary] = {}
    for cfg in enumerate_configs(num_gpus):
        try:
            _, summary = run(crossover_scenario(model, cfg, num_requests, catalog),
                             check_invariants=check_invariants)
        except SimulationError:
            makespans[cfg] = None
            continue
        makespans[cfg] = summary.makespan
        summaries[cfg] = summary
    stats = workload_stats(sample_workload(natural_reasoning(num_requests)))
    entries = plan(catalog[model], _hw(), stats, num_gpus, crossover_scheduler())
    return CrossoverResult(model, makespans, summaries, entries)


def capacity_trap_scenario(max_num_seqs: int = CAPACITY_TRAP_SEQS[0]) -> Scenario:
    """8B on one GPU whose KV pool holds the full footprint of 40 requests; 100 requests arrive."""
    model = bundled_catalog()["ds-llama-8b"]
    isl, osl = (100, 150), (8000, 12000)
    pool_bytes = 40 * (isl[1] + osl[1]) * kv_bytes_per_token(model)
    sched = SchedulerConfig(max_num_seqs=max_num_seqs, max_num_batched_tokens=2048)
    hw = _hw().with_overrides(hbm_capacity=(weight_bytes(model) + pool_bytes) / sched.gpu_memory_utilization)
    wl = WorkloadSpec(100, HistogramSpec(((isl[0], isl[1], 1.0),)), HistogramSpec(((osl[0], osl[1], 1.0),)))
    return Scenario(model=model, hardware=hw, parallelism=ParallelismConfig(1, 1, 1), scheduler=sched,
                    workload=wl, telemetry_sample_interval=50, name="capacity-trap")


def cliff_scenario(batch_size: int, model: str = "llama-405b", horizon: float = 120.0) -> Scenario:
    """405B under TP8 with a slot cap high enough that only KV capacity throttles admission."""
    return Scenario(
        model=bundled_catalog()[model], hardware=_hw(), parallelism=ParallelismConfig(1, 8, 1),
        scheduler=SchedulerConfig(max_num_seqs=8192, max_num_batched_tokens=8192),
        workload=natural_reasoning(batch_size), telemetry_sample_interval=100, horizon=horizon,
        name=f"cliff-{batch_size}",
    )


def decode_dominance_scenario(num_requests: int = 300) -> Scenario:
    """8B on one GPU serving the reasoning mix with default scheduler limits."""
    return Scenario(
        model=bundled_catalog()["ds-llama-8b"], hardware=_hw(), parallelism=ParallelismConfig(1, 1, 1),
        scheduler=SchedulerConfig(), workload=natural_reasoning(num_requests), telemetry_sample_interval=200,
        name="reasoning-8b",
    )


def dp_light_scenario(dp: int) -> Scenario:
    """Light load: 512 short requests, far below every replica's KV and slot limits."""
    return Scenario(
        model=bundled_catalog()["ds-llama-8b"], hardware=_hw(), parallelism=ParallelismConfig(dp, 1, 1),
        scheduler=SchedulerConfig(max_num_seqs=32, max_num_batched_tokens=2048),
        workload=WorkloadSpec.fixed(512, 100, 2000), telemetry_sample_interval=100, name=f"dp-light-{dp}",
    )


def dp_saturating_scenario(dp: int, per_replica: int = 200) -> Scenario:
    """Reasoning mix sized so every replica holds more requests than its KV pool can keep resident."""
    return Scenario(
        model=bundled_catalog()["ds-qwen-32b"], hardware=_hw(), parallelism=ParallelismConfig(dp, 1, 1),
        scheduler=SchedulerConfig(max_num_seqs=256, max_num_batched_tokens=2048),
        workload=natural_reasoning(per_replica * dp), telemetry_sample_interval=10**9,
        name=f"dp-saturating-{dp}",
    )


def moe_route_scenario(cfg: ParallelismConfig, route_latency: float,
                       num_requests: int = CROSSOVER_REQUESTS) -> Scenario:
    """671B crossover run with the MoE routing latency overridden, for recalibration."""
    base = crossover_scenario("ds-r1-671b", cfg, num_requests)
    return replace(base, hardware=base.hardware.with_overrides(moe_route_latency=route_latency))
