"""Analytical parallelism planner and KV-footprint projection.

The planner never runs the event loop. For each factorisation it estimates a
per-replica steady state: concurrency is capped by ``max_num_seqs`` and by how
many resident requests the KV pool holds (long requests stay resident
longer, so the resident mix is length-weighted), decode runs at that
concurrency, and prefill runs at the full token budget.
"""

from __future__ import annotations

from dataclasses import dataclass

from infersim.catalog import ModelSpec, kv_bytes_per_token
from infersim.parallelism import HardwareSpec, ParallelismConfig, enumerate_configs, placement
from infersim.perf import PerfModel
from infersim.scheduler import SchedulerConfig
from infersim.workload import WorkloadStats


class PlanError(ValueError):
    def __init__(self, message: str, reasons: dict[str, str]):
        super().__init__(message)
        self.reasons = reasons


@dataclass(frozen=True)
class PlanEntry:
    config: ParallelismConfig
    feasible: bool
    kv_pool_tokens: int
    est_makespan: float | None
    est_ttft: float | None
    est_tpot: float | None
    rationale: str
    concurrency: float | None = None

    def to_dict(self) -> dict:
        return {
            "config": str(self.config),
            "dp": self.config.dp,
            "tp": self.config.tp,
            "pp": self.config.pp,
            "feasible": self.feasible,
            "kv_pool_tokens": self.kv_pool_tokens,
            "concurrency": self.concurrency,
            "est_makespan": self.est_makespan,
            "est_ttft": self.est_ttft,
            "est_tpot": self.est_tpot,
            "rationale": self.rationale,
        }


def _score(model: ModelSpec, hw: HardwareSpec, cfg: ParallelismConfig, stats: WorkloadStats,
           sched: SchedulerConfig) -> PlanEntry:
    report = placement(model, hw, cfg, sched)
    pool = report.kv_pool_tokens_per_replica
    if not report.feasible:
        return PlanEntry(cfg, False, pool, None, None, None, f"infeasible: {report.infeasibility_reason}")

    perf = PerfModel(model, hw, cfg)
    per_replica = stats.num_requests / cfg.dp
    kv_limit = pool / stats.resident_footprint
    conc = min(float(sched.max_num_seqs), kv_limit, per_replica)
    conc = max(1.0, conc)
    batch = max(1, int(conc))
    context = stats.mean_isl + stats.mean_osl / 2

    dec = perf.timing(batch, 0, batch * context, batch)
    decode_seconds = per_replica * stats.mean_osl / batch * dec.step_seconds

    chunk = sched.max_num_batched_tokens
    pre = perf.timing(0, chunk, 0, max(1, batch))
    prefill_tokens = per_replica * stats.mean_isl
    prefill_seconds = prefill_tokens / chunk * pre.step_seconds
    makespan = decode_seconds + prefill_seconds

    # Later waves queue behind earlier ones when the pool or slot cap binds.
    waves = per_replica / batch
    first_wave_prefill = min(per_replica, batch) * stats.mean_isl / chunk * pre.step_seconds
    queueing = max(0.0, waves - 1) / 2 * stats.mean_osl * dec.step_seconds
    est_ttft = first_wave_prefill / 2 + dec.step_seconds + queueing
    est_tpot = dec.step_seconds

    terms = {
        "bandwidth-bound": dec.memory_seconds,
        "compute-bound": dec.compute_seconds,
        "comm-bound": dec.comm_seconds,
        "bubble-bound": dec.bubble_seconds + dec.transfer_seconds,
    }
    dominant = max(terms, key=lambda k: terms[k])
    detail = (f"decode step {dec.step_seconds * 1e3:.2f} ms at {conc:.0f} concurrent "
              f"(memory {dec.memory_seconds * 1e3:.2f}, comm {dec.comm_seconds * 1e3:.2f}, "
              f"bubble {(dec.bubble_seconds + dec.transfer_seconds) * 1e3:.2f} ms)")
    if kv_limit < sched.max_num_seqs and kv_limit < per_replica:
        rationale = f"capacity-bound: KV pool fits {kv_limit:.0f} resident requests; {detail}"
    else:
        rationale = f"{dominant}: {detail}"
    return PlanEntry(cfg, True, pool, makespan, est_ttft, est_tpot, rationale, conc)


def plan(model: ModelSpec, hw: HardwareSpec, stats: WorkloadStats, num_gpus: int | None = None,
         sched: SchedulerConfig | None = None) -> list[PlanEntry]:
    """Score every (dp, tp, pp) factorisation of ``num_gpus``; best first, infeasible last."""
    sched = sched if sched is not None else SchedulerConfig()
    num_gpus = num_gpus if num_gpus is not None else hw.num_gpus
    entries = [_score(model, hw, cfg, stats, sched) for cfg in enumerate_configs(num_gpus)]
    feasible = [e for e in entries if e.feasible]
    if not feasible:
        reasons = {str(e.config): e.rationale for e in entries}
        raise PlanError(f"no feasible configuration for {model.name} on {num_gpus} GPUs", reasons)
    feasible.sort(key=lambda e: (e.est_makespan, e.config.dp, e.config.tp, e.config.pp))
    rest = sorted((e for e in entries if not e.feasible),
                  key=lambda e: (e.config.dp, e.config.tp, e.config.pp))
    return feasible + rest


@dataclass(frozen=True)
class KvProjection:
    points: tuple[tuple[int, int], ...]
    kv_bytes_per_token: int

    def bytes_at(self, tokens: int) -> int:
        return tokens * self.kv_bytes_per_token


def kv_projection(model: ModelSpec, max_tokens: int, points: int = 11) -> KvProjection:
    """Evenly spaced (tokens, bytes) pairs from 0 to ``max_tokens``."""
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    if points < 1:
        raise ValueError("points must be >= 1")
    kvb = kv_bytes_per_token(model)
    if points == 1:
        ticks = [max_tokens]
    else:
        ticks = [max_tokens * i // (points - 1) for i in range(points)]
    return KvProjection(tuple((t, t * kvb) for t in ticks), kvb)
