"""Discrete-event serving loop: one shared-nothing replica per DP rank.

Each replica repeatedly plans a step with the scheduler, prices it with the
perf model, advances its own clock, and applies token progress. Stretches
where every running request is decoding and no admission can happen are
advanced in one vectorised jump that reproduces the per-step arithmetic
exactly; ``fast_forward=False`` turns that off.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from infersim.catalog import ModelCatalog, ModelSpec, bundled_catalog, kv_bytes_per_token, load_catalog
from infersim.config import ConfigError, check_fields, load_json
from infersim.kvcache import BlockPool, blocks_for, new_pool
from infersim.parallelism import (
    HardwareSpec,
    ParallelismConfig,
    bundled_hardware,
    hardware_from_dict,
    load_hardware_file,
    placement,
)
from infersim.perf import PerfModel
from infersim.scheduler import (
    Request,
    RequestState,
    SchedulerConfig,
    on_decode_token,
    on_prefill_chunk,
    schedule_step,
)
from infersim.workload import WorkloadSpec, sample_workload, workload_from_dict


class SimulationError(RuntimeError):
    """The scenario cannot be simulated (infeasible placement, unservable request)."""


@dataclass(frozen=True)
class Scenario:
    model: ModelSpec
    hardware: HardwareSpec
    parallelism: ParallelismConfig
    scheduler: SchedulerConfig
    workload: WorkloadSpec
    telemetry_sample_interval: int = 100
    horizon: float | None = None  # stop once every replica's clock passes this
    router_weights: tuple[float, ...] | None = None
    name: str = "scenario"

    def __post_init__(self) -> None:
        if self.parallelism.num_gpus > self.hardware.num_gpus:
            raise ConfigError(
                f"scenario '{self.name}': {self.parallelism} needs {self.parallelism.num_gpus} GPUs, "
                f"hardware '{self.hardware.name}' has {self.hardware.num_gpus}"
            )
        if self.telemetry_sample_interval < 1:
            raise ConfigError("telemetry_sample_interval must be >= 1")
        if self.router_weights is not None:
            if len(self.router_weights) != self.parallelism.dp or min(self.router_weights) <= 0:
                raise ConfigError("router_weights needs one positive weight per DP replica")


@dataclass(frozen=True)
class TelemetrySample:
    sim_time: float
    replica: int
    running: int
    waiting: int
    preempted_cum: int
    kv_util: float
    tokens_per_s: float
    bw_util: float
    sm_util: float


TELEMETRY_HEADER = (
    "sim_time", "replica", "running", "waiting", "preempted_cum",
    "kv_util", "tokens_per_s", "bw_util", "sm_util",
)


@dataclass
class Telemetry:
    samples: list[TelemetrySample] = field(default_factory=list)

    def replica(self, idx: int) -> list[TelemetrySample]:
        return [s for s in self.samples if s.replica == idx]

    def replicas(self) -> list[int]:
        return sorted({s.replica for s in self.samples})

    def merged(self, times: Sequence[float] | None = None) -> dict[str, np.ndarray]:
        """Cluster-level timeline: per-replica series interpolated onto shared instants.

        Counts and throughput are summed over replicas; utilisations are averaged.
        """
        if not self.samples:
            raise ValueError("telemetry is empty")
        if times is None:
            times = sorted({s.sim_time for s in self.samples})
        t = np.asarray(times, dtype=float)
        out = {"sim_time": t}
        summed = ("running", "waiting", "preempted_cum", "tokens_per_s")
        averaged = ("kv_util", "bw_util", "sm_util")
        reps = self.replicas()
        for key in summed + averaged:
            acc = np.zeros_like(t)
            for r in reps:
                rows = self.replica(r)
                xs = np.array([s.sim_time for s in rows])
                ys = np.array([getattr(s, key) for s in rows], dtype=float)
                acc += np.interp(t, xs, ys)
            out[key] = acc if key in summed else acc / len(reps)
        return out


@dataclass(frozen=True)
class RequestRecord:
    id: int
    replica: int
    arrival: float
    isl: int
    osl: int
    decoded: int
    first_token_time: float | None
    finish_time: float | None
    ttft: float | None
    tpot_mean: float | None
    e2e: float | None
    wait_duration: float
    run_duration: float
    preemption_count: int
    peak_kv_tokens: int


@dataclass(frozen=True)
class ReplicaStats:
    replica: int
    num_requests: int
    steps: int
    kv_pool_tokens: int
    total_blocks: int
    max_kv_util: float
    preemptions: int
    first_saturation_time: float | None
    first_saturation_phase: str | None
    end_time: float
    prefill_seconds: float
    decode_seconds: float
    prefill_step_sm_util: float
    prefill_step_bw_util: float
    decode_step_sm_util: float
    decode_step_bw_util: float


@dataclass(frozen=True)
class Stat:
    mean: float
    p50: float
    p99: float

    @classmethod
    def of(cls, values: Sequence[float]) -> Stat:
        if len(values) == 0:
            return cls(math.nan, math.nan, math.nan)
        arr = np.asarray(values, dtype=float)
        return cls(
            mean=math.fsum(values) / len(values),
            p50=float(np.percentile(arr, 50)),
            p99=float(np.percentile(arr, 99)),
        )


@dataclass(frozen=True)
class RunSummary:
    requests: tuple[RequestRecord, ...]
    replicas: tuple[ReplicaStats, ...]
    ttft: Stat
    tpot: Stat
    e2e: Stat
    wait: Stat
    run: Stat
    makespan: float
    tokens_per_s: float
    total_preemptions: int
    finished: int
    unfinished: int

    @property
    def decode_fraction(self) -> float:
        dec = math.fsum(r.decode_seconds for r in self.replicas)
        pre = math.fsum(r.prefill_seconds for r in self.replicas)
        return dec / (dec + pre) if dec + pre > 0 else 0.0

    @property
    def max_kv_util(self) -> float:
        return max(r.max_kv_util for r in self.replicas)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _nan_to_none(x: float) -> float | None:
    return None if isinstance(x, float) and math.isnan(x) else x


def summarize(requests: Sequence[Request], replicas: Sequence[ReplicaStats]) -> RunSummary:
    """Per-request latency records plus their aggregates; shared by the engine and the oracle."""
    records = []
    for r in sorted(requests, key=lambda q: q.id):
        done = r.state is RequestState.FINISHED
        ttft = r.first_token_time - r.arrival_time if r.first_token_time is not None else None
        e2e = r.finish_time - r.arrival_time if done else None
        tpot = None
        if done and r.osl > 1:
            tpot = (e2e - ttft) / (r.osl - 1)
        records.append(RequestRecord(
            id=r.id, replica=r.replica, arrival=r.arrival_time, isl=r.isl, osl=r.osl,
            decoded=r.decoded, first_token_time=r.first_token_time, finish_time=r.finish_time,
            ttft=ttft, tpot_mean=tpot, e2e=e2e,
            wait_duration=r.wait_duration, run_duration=r.run_duration,
            preemption_count=r.preemption_count, peak_kv_tokens=r.peak_kv_tokens,
        ))
    done = [x for x in records if x.e2e is not None]
    if done:
        start = min(x.arrival for x in records)
        makespan = max(x.finish_time for x in done) - start
    else:
        makespan = 0.0
    tokens = sum(x.decoded for x in records)
    return RunSummary(
        requests=tuple(records),
        replicas=tuple(replicas),
        ttft=Stat.of([x.ttft for x in records if x.ttft is not None]),
        tpot=Stat.of([x.tpot_mean for x in done if x.tpot_mean is not None]),
        e2e=Stat.of([x.e2e for x in done]),
        wait=Stat.of([x.wait_duration for x in done]),
        run=Stat.of([x.run_duration for x in done]),
        makespan=makespan,
        tokens_per_s=tokens / makespan if makespan > 0 else 0.0,
        total_preemptions=sum(x.preemption_count for x in records),
        finished=len(done),
        unfinished=len(records) - len(done),
    )


def route_requests(requests: Sequence[Request], dp: int,
                   weights: Sequence[float] | None = None) -> list[list[Request]]:
    """Assign requests to replicas in arrival order: round-robin, or smooth weighted round-robin."""
    order = sorted(requests, key=lambda r: (r.arrival_time, r.id))
    buckets: list[list[Request]] = [[] for _ in range(dp)]
    if weights is None:
        for i, req in enumerate(order):
            req.replica = i % dp
            buckets[i % dp].append(req)
        return buckets
    total = float(sum(weights))
    current = [0.0] * dp
    for req in order:
        for k in range(dp):
            current[k] += weights[k]
        k = max(range(dp), key=lambda j: (current[j], -j))
        current[k] -= total
        req.replica = k
        buckets[k].append(req)
    return buckets


def replica_pool(scenario: Scenario) -> BlockPool:
    report = placement(scenario.model, scenario.hardware, scenario.parallelism, scenario.scheduler)
    if not report.feasible:
        raise SimulationError(f"infeasible placement {scenario.parallelism}: {report.infeasibility_reason}")
    return new_pool(report.kv_headroom_per_gpu * scenario.parallelism.shards,
                    kv_bytes_per_token(scenario.model), scenario.scheduler.block_size)


class _Replica:
    def __init__(self, idx: int, requests: list[Request], scenario: Scenario,
                 fast_forward: bool, check_invariants: bool):
        self.idx = idx
        self.scenario = scenario
        self.cfg = scenario.scheduler
        self.perf = PerfModel(scenario.model, scenario.hardware, scenario.parallelism)
        self.pool = replica_pool(scenario)
        self.requests = requests
        self.pending = deque(requests)
        self.waiting: deque[Request] = deque()
        self.running: list[Request] = []
        self.by_id = {r.id: r for r in requests}
        self.clock = requests[0].arrival_time if requests else 0.0
        self.steps = 0
        self.preempted = 0
        self.fast_forward = fast_forward
        self.check_invariants = check_invariants
        self.interval = scenario.telemetry_sample_interval
        self.samples: list[TelemetrySample] = []
        self.last_sample_time = self.clock
        self.tokens_since_sample = 0
        self.max_util = 0.0
        self.saturation: tuple[float, str] | None = None
        # Float accumulators, summed with fsum so the order of addition is irrelevant.
        self.acc: dict[str, list] = {k: [] for k in (
            "prefill", "decode", "p_step", "p_comp", "p_mem", "d_step", "d_comp", "d_mem")}

    # -- main loop -------------------------------------------------------
    def run(self) -> None:
        horizon = self.scenario.horizon
        while True:
            while self.pending and self.pending[0].arrival_time <= self.clock:
                req = self.pending.popleft()
                req.wait_started = req.arrival_time
                self.waiting.append(req)
            if not self.running and not self.waiting:
                if not self.pending:
                    break
                self.clock = self.pending[0].arrival_time
                continue
            if horizon is not None and self.clock >= horizon:
                break
            if self.fast_forward and self._decode_only():
                self._jump()
            else:
                self._step()

    def _step(self) -> None:
        now = self.clock
        plan = schedule_step(self.waiting, self.running, self.pool, self.cfg, now)
        self.preempted += len(plan.preemptions)
        if plan.kv_blocked and self.saturation is None:
            self.saturation = (now, self._phase())
        if plan.num_tokens == 0:
            if plan.preemptions and not self.running:
                raise SimulationError(
                    f"replica {self.idx}: request {plan.preemptions[-1]} needs more KV than the "
                    f"whole pool ({self.pool.total_blocks} blocks of {self.pool.block_size} tokens)"
                )
            if not self.running and self.waiting:
                raise SimulationError(
                    f"replica {self.idx}: request {self.waiting[0].id} cannot be admitted into an empty pool"
                )
            if plan.swap_in_tokens == 0:
                raise SimulationError(f"replica {self.idx}: scheduler made no progress at t={now}")
        if self.check_invariants:
            self._check(plan)
        self.max_util = max(self.max_util, self.pool.utilization())

        n_dec = len(plan.decode_set)
        pre_tok = plan.prefill_tokens
        kv_active = sum(self.by_id[i].kv_tokens + 1 for i in plan.decode_set)
        extra = 0.0
        if plan.swap_in_tokens or plan.swap_out_tokens:
            extra = ((plan.swap_in_tokens + plan.swap_out_tokens) * self.perf.kvb
                     / self.cfg.swap_host_bandwidth)
        t = self.perf.timing(n_dec, pre_tok, kv_active, n_dec + len(plan.prefill_chunks), extra)
        dt = t.step_seconds
        self.clock = now + dt

        if n_dec == 0:
            self.acc["prefill"].append(dt)
            if pre_tok:
                self.acc["p_step"].append(dt)
                self.acc["p_comp"].append(t.compute_seconds)
                self.acc["p_mem"].append(t.memory_seconds)
        elif pre_tok == 0:
            self.acc["decode"].append(dt)
            self.acc["d_step"].append(dt)
            self.acc["d_comp"].append(t.compute_seconds)
            self.acc["d_mem"].append(t.memory_seconds)
        else:
            dec_only = self.perf.timing(n_dec, 0, kv_active, n_dec).step_seconds
            share = dec_only if dec_only < dt else dt
            self.acc["decode"].append(share)
            self.acc["prefill"].append(dt - share)

        for rid, chunk in plan.prefill_chunks:
            on_prefill_chunk(self.by_id[rid], chunk)
        finished = False
        for rid in plan.decode_set:
            req = on_decode_token(self.by_id[rid], self.clock)
            if req.state is RequestState.FINISHED:
                self.pool.free(rid)
                finished = True
        if finished:
            self.running = [r for r in self.running if r.state is not RequestState.FINISHED]
        self.steps += 1
        self.tokens_since_sample += n_dec
        if self.steps % self.interval == 0:
            self._sample(self.clock, len(self.running), self.pool.utilization(),
                         t.modeled_bw_util, t.modeled_sm_util)

    # -- pure-decode fast path ---------------------------------------------
    def _decode_only(self) -> bool:
        running = self.running
        if not running:
            return False
        for r in running:
            if r.prefilled < r.prefill_target:
                return False
        n = len(running)
        if self.waiting and n < self.cfg.max_num_seqs:
            budget_left = self.cfg.max_num_batched_tokens - n
            if budget_left > 0:
                head = self.waiting[0]
                if head.swapped_tokens:
                    need = head.swapped_tokens
                else:
                    target = head.isl + head.decoded
                    cached = 0
                    if head.preemption_count and self.cfg.prefix_hit_fraction > 0:
                        cached = min(math.floor(self.cfg.prefix_hit_fraction * target), target - 1)
                    need = cached + min(target - cached, budget_left)
                if blocks_for(need, self.pool.block_size) <= self.pool.free_blocks:
                    return False
                if self.saturation is None:
                    # Let a regular step record the first blocked admission.
                    return False
        return True

    def _jump(self) -> None:
        running = self.running
        n = len(running)
        bs = self.pool.block_size
        kv = np.array([r.kv_tokens for r in running], dtype=np.int64)
        have = -(-kv // bs)
        remaining = np.array([r.osl - r.decoded for r in running], dtype=np.int64)
        k_max = int(remaining.min())

        def demand(j: int) -> int:
            return int((-(-(kv + j) // bs) - have).sum())

        free = self.pool.free_blocks
        if demand(k_max) > free:
            lo, hi = 0, k_max  # demand(lo) <= free < demand(hi)
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if demand(mid) <= free:
                    lo = mid
                else:
                    hi = mid
            k_max = lo
        if k_max == 0:
            self._step()
            return

        j = np.arange(1, k_max + 1, dtype=np.int64)
        kv_active = int(kv.sum()) + n * j
        t = self.perf.timing(n, 0, kv_active, n)
        k_full = k_max

        def vec(x) -> np.ndarray:
            return np.broadcast_to(np.asarray(x, dtype=float), (k_full,))[:k_max]

        dts = vec(t.step_seconds)
        clocks = np.add.accumulate(np.concatenate(([self.clock], dts)))
        limit = min(self.pending[0].arrival_time if self.pending else math.inf,
                    self.scenario.horizon if self.scenario.horizon is not None else math.inf)
        if limit < math.inf:
            # Keep only steps that start before the next arrival or the horizon.
            k = int(np.searchsorted(clocks[:-1], limit, side="left"))
            k = max(1, k)
            if k < k_max:
                k_max = k
                j = j[:k]
                kv_active = kv_active[:k]
                dts = dts[:k]
                clocks = clocks[:k + 1]
        K = k_max
        comp = t.compute_seconds
        mem = vec(t.memory_seconds)
        self.acc["decode"].append(np.array(dts))
        self.acc["d_step"].append(np.array(dts))
        self.acc["d_comp"].append(np.full(K, comp))
        self.acc["d_mem"].append(np.array(mem))

        used0 = self.pool.used_blocks
        new_blocks = demand(K)
        self.max_util = max(self.max_util, (used0 + new_blocks) / self.pool.total_blocks)
        t0 = clocks[1]
        t_end = float(clocks[K])
        finished = []
        for i, req in enumerate(running):
            if req.decoded == 0:
                req.first_token_time = float(t0)
            req.decoded += K
            req.kv_tokens += K
            alloc = self.pool.allocations[req.id]
            alloc.tokens_held = req.kv_tokens
            alloc.blocks_held = blocks_for(req.kv_tokens, bs)
            if req.kv_tokens > req.peak_kv_tokens:
                req.peak_kv_tokens = req.kv_tokens
            if req.decoded == req.osl:
                req.state = RequestState.FINISHED
                req.finish_time = t_end
                req.run_duration += t_end - req.admitted_at
                finished.append(req)
        self.pool.free_blocks -= new_blocks
        for req in finished:
            self.pool.free(req.id)
        if finished:
            self.running = [r for r in running if r.state is not RequestState.FINISHED]

        # Telemetry samples that fall inside the jump.
        s0 = self.steps
        counted = 0
        first = (s0 // self.interval + 1) * self.interval
        if first <= s0 + K:
            bw = vec(t.modeled_bw_util)
            sm = vec(t.modeled_sm_util)
            total = self.pool.total_blocks
            for s in range(first, s0 + K + 1, self.interval):
                jj = s - s0
                self.tokens_since_sample += n * (jj - counted)
                counted = jj
                if jj == K:
                    util = self.pool.utilization()
                    running_now = len(self.running)
                else:
                    util = (used0 + demand(jj)) / total
                    running_now = n
                self._sample(float(clocks[jj]), running_now, util, float(bw[jj - 1]), float(sm[jj - 1]))
        self.tokens_since_sample += n * (K - counted)
        self.steps += K
        self.clock = t_end

    # -- bookkeeping -----------------------------------------------------
    def _sample(self, now: float, running: int, util: float, bw: float, sm: float) -> None:
        span = now - self.last_sample_time
        rate = self.tokens_since_sample / span if span > 0 else 0.0
        self.samples.append(TelemetrySample(
            sim_time=now, replica=self.idx, running=running, waiting=len(self.waiting),
            preempted_cum=self.preempted, kv_util=util, tokens_per_s=rate, bw_util=bw, sm_util=sm,
        ))
        self.last_sample_time = now
        self.tokens_since_sample = 0

    def _phase(self) -> str:
        for r in self.requests:
            if r.arrival_time <= self.clock and r.first_token_time is None:
                return "prefill"
        return "decode"

    def _check(self, plan) -> None:
        assert plan.num_tokens <= self.cfg.max_num_batched_tokens, "token budget exceeded"
        assert len(self.running) <= self.cfg.max_num_seqs, "max_num_seqs exceeded"
        self.pool.check()

    def stats(self) -> ReplicaStats:
        def total(key: str) -> float:
            parts = self.acc[key]
            flat: list[float] = []
            for p in parts:
                if isinstance(p, np.ndarray):
                    flat.extend(p.tolist())
                else:
                    flat.append(p)
            return math.fsum(flat)

        p_step, d_step = total("p_step"), total("d_step")
        sat_time, sat_phase = self.saturation if self.saturation else (None, None)
        return ReplicaStats(
            replica=self.idx,
            num_requests=len(self.requests),
            steps=self.steps,
            kv_pool_tokens=self.pool.total_blocks * self.pool.block_size,
            total_blocks=self.pool.total_blocks,
            max_kv_util=self.max_util,
            preemptions=self.preempted,
            first_saturation_time=sat_time,
            first_saturation_phase=sat_phase,
            end_time=self.clock,
            prefill_seconds=total("prefill"),
            decode_seconds=total("decode"),
            prefill_step_sm_util=total("p_comp") / p_step if p_step else 0.0,
            prefill_step_bw_util=total("p_mem") / p_step if p_step else 0.0,
            decode_step_sm_util=total("d_comp") / d_step if d_step else 0.0,
            decode_step_bw_util=total("d_mem") / d_step if d_step else 0.0,
        )


def _fresh_requests(scenario: Scenario) -> list[Request]:
    return sample_workload(scenario.workload)


def run(scenario: Scenario, *, fast_forward: bool = True,
        check_invariants: bool = False) -> tuple[Telemetry, RunSummary]:
    """Simulate a scenario to completion (or to its horizon)."""
    requests = _fresh_requests(scenario)
    buckets = route_requests(requests, scenario.parallelism.dp, scenario.router_weights)
    replica_pool(scenario)  # raises early on infeasible placements
    telemetry = Telemetry()
    stats = []
    for idx, bucket in enumerate(buckets):
        rep = _Replica(idx, bucket, scenario, fast_forward, check_invariants)
        rep.run()
        telemetry.samples.extend(rep.samples)
        stats.append(rep.stats())
    return telemetry, summarize(requests, stats)


# -- sweeps ------------------------------------------------------------------

SWEEP_AXES = ("max_num_seqs", "max_num_batched_tokens", "batch_size", "parallelism", "dp", "model")


def with_axis(base: Scenario, axis: str, value: Any, catalog: ModelCatalog | None = None) -> Scenario:
    if axis == "max_num_seqs":
        v = int(value)
        sched = replace(base.scheduler, max_num_seqs=v,
                        max_num_batched_tokens=max(base.scheduler.max_num_batched_tokens, v))
        return replace(base, scheduler=sched)
    if axis == "max_num_batched_tokens":
        return replace(base, scheduler=replace(base.scheduler, max_num_batched_tokens=int(value)))
    if axis == "batch_size":
        return replace(base, workload=base.workload.with_requests(int(value)))
    if axis == "parallelism":
        cfg = value if isinstance(value, ParallelismConfig) else ParallelismConfig.parse(str(value))
        return replace(base, parallelism=cfg, router_weights=None)
    if axis == "dp":
        cfg = replace(base.parallelism, dp=int(value))
        return replace(base, parallelism=cfg, router_weights=None)
    if axis == "model":
        if isinstance(value, ModelSpec):
            return replace(base, model=value)
        catalog = catalog if catalog is not None else bundled_catalog()
        return replace(base, model=catalog[str(value)])
    raise ValueError(f"invalid sweep axis '{axis}' (expected one of {', '.join(SWEEP_AXES)})")


@dataclass(frozen=True)
class SweepPoint:
    value: Any
    telemetry: Telemetry
    summary: RunSummary


def _run_point(args):
    scenario, value = args
    telemetry, summary = run(scenario)
    return SweepPoint(value, telemetry, summary)


def sweep(base: Scenario, axis: str, values: Iterable[Any], jobs: int = 1,
          catalog: ModelCatalog | None = None) -> list[SweepPoint]:
    """Independent runs per value sharing the base workload seed, in input order."""
    values = list(values)
    scenarios = [(with_axis(base, axis, v, catalog), v) for v in values]
    if jobs > 1 and len(scenarios) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_point, scenarios))
    return [_run_point(s) for s in scenarios]


# -- scenario files ------------------------------------------------------------

_SCENARIO_FIELDS = {
    "name", "model", "hardware", "models_file", "hardware_file", "hardware_overrides",
    "parallelism", "scheduler", "workload", "telemetry_sample_interval", "horizon",
    "router_weights", "note",
}
_SCHED_FIELDS = {
    "max_num_seqs", "max_num_batched_tokens", "block_size", "preemption_policy",
    "gpu_memory_utilization", "prefix_hit_fraction", "swap_host_bandwidth",
}


def scheduler_from_dict(table: dict) -> SchedulerConfig:
    check_fields(table, _SCHED_FIELDS, "scheduler")
    kwargs: dict[str, Any] = {}
    for key, val in table.items():
        if key in ("max_num_seqs", "max_num_batched_tokens", "block_size"):
            kwargs[key] = int(val)
        elif key == "preemption_policy":
            kwargs[key] = str(val).lower()
        else:
            kwargs[key] = float(val)
    return SchedulerConfig(**kwargs)


def scenario_from_dict(data: dict, base_dir: str | Path = ".") -> Scenario:
    check_fields(data, _SCENARIO_FIELDS, "scenario")
    base_dir = Path(base_dir)
    catalog = bundled_catalog()
    if "models_file" in data:
        for name, spec in load_catalog(base_dir / data["models_file"]).entries.items():
            catalog.entries[name] = spec
    hardware = bundled_hardware()
    if "hardware_file" in data:
        hardware.update(load_hardware_file(base_dir / data["hardware_file"]))

    model_ref = data.get("model")
    if isinstance(model_ref, dict):
        from infersim.catalog import model_from_dict
        model = model_from_dict(model_ref)
    elif model_ref in catalog:
        model = catalog[model_ref]
    else:
        raise ConfigError(f"scenario: unknown model '{model_ref}'")

    hw_ref = data.get("hardware", "h200-node")
    if isinstance(hw_ref, dict):
        hw = hardware_from_dict(hw_ref)
    elif hw_ref in hardware:
        hw = hardware[hw_ref]
    else:
        raise ConfigError(f"scenario: unknown hardware '{hw_ref}'")
    if data.get("hardware_overrides"):
        hw = hw.with_overrides(**{k: float(v) for k, v in data["hardware_overrides"].items()})

    par = data.get("parallelism", {"dp": 1, "tp": 1, "pp": 1})
    if isinstance(par, str):
        par_cfg = ParallelismConfig.parse(par)
    else:
        check_fields(par, {"dp", "tp", "pp"}, "parallelism")
        par_cfg = ParallelismConfig(int(par.get("dp", 1)), int(par.get("tp", 1)), int(par.get("pp", 1)))

    if "workload" not in data:
        raise ConfigError("scenario: missing field 'workload'")
    weights = data.get("router_weights")
    horizon = data.get("horizon")
    return Scenario(
        name=str(data.get("name", "scenario")),
        model=model,
        hardware=hw,
        parallelism=par_cfg,
        scheduler=scheduler_from_dict(data.get("scheduler", {})),
        workload=workload_from_dict(data["workload"]),
        telemetry_sample_interval=int(data.get("telemetry_sample_interval", 100)),
        horizon=float(horizon) if horizon is not None else None,
        router_weights=tuple(float(w) for w in weights) if weights else None,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    data = load_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: scenario must be a table")
    return scenario_from_dict(data, path.parent)
