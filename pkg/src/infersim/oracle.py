"""Naive reference simulator for tiny scenarios.

Re-derives every step from scratch: block usage is recounted from per-request
token counts on each query, nothing is cached, and there is no fast path.
It shares only the workload sampler, router and step-time formulas with the
engine, so agreement between the two checks the scheduling and bookkeeping.
"""

from __future__ import annotations

import math

from infersim.catalog import kv_bytes_per_token
from infersim.engine import ReplicaStats, RunSummary, Scenario, SimulationError, replica_pool, route_requests, summarize
from infersim.perf import PerfModel
from infersim.scheduler import SWAP, Request, RequestState
from infersim.workload import sample_workload

MAX_REQUESTS = 32
MAX_TOTAL_TOKENS = 4096


def _blocks(tokens: int, bs: int) -> int:
    return (tokens + bs - 1) // bs


class _Oracle:
    def __init__(self, idx: int, reqs: list[Request], sc: Scenario):
        self.idx = idx
        self.sc = sc
        self.cfg = sc.scheduler
        self.bs = sc.scheduler.block_size
        self.total_blocks = replica_pool(sc).total_blocks
        self.perf = PerfModel(sc.model, sc.hardware, sc.parallelism)
        self.kvb = kv_bytes_per_token(sc.model)
        self.reqs = reqs
        self.held: dict[int, int] = {}  # request id -> reserved KV tokens
        self.waiting: list[Request] = []
        self.running: list[Request] = []
        self.clock = reqs[0].arrival_time if reqs else 0.0
        self.steps = 0
        self.preempted = 0
        self.max_util = 0.0
        self.saturation = None
        self.prefill_parts: list[float] = []
        self.decode_parts: list[float] = []
        self.p_util: list[tuple[float, float, float]] = []
        self.d_util: list[tuple[float, float, float]] = []

    def used(self) -> int:
        return sum(_blocks(t, self.bs) for t in self.held.values())

    def fits(self, rid: int, tokens: int) -> bool:
        others = sum(_blocks(t, self.bs) for r, t in self.held.items() if r != rid)
        return others + _blocks(tokens, self.bs) <= self.total_blocks

    def evict(self, now: float) -> Request:
        victim = self.running.pop()
        del self.held[victim.id]
        if self.cfg.preemption_policy == SWAP:
            victim.swapped_tokens = victim.kv_tokens
            self.swap_out += victim.kv_tokens
        else:
            victim.prefilled = 0
            victim.kv_tokens = 0
        victim.state = RequestState.PREEMPTED
        victim.preemption_count += 1
        victim.run_duration += now - victim.admitted_at
        victim.wait_started = now
        self.waiting.insert(0, victim)
        self.preempted_now.append(victim.id)
        return victim

    def grow(self, req: Request, tokens: int, now: float, scheduled: dict) -> bool:
        while not self.fits(req.id, tokens):
            self.blocked = True
            victim = self.evict(now)
            self.budget += scheduled.pop(victim.id, 0)
            if victim is req:
                return False
        self.held[req.id] = tokens
        return True

    def step(self) -> None:
        now = self.clock
        cfg = self.cfg
        self.budget = cfg.max_num_batched_tokens
        self.blocked = False
        self.preempted_now: list[int] = []
        self.swap_out = 0
        swap_in = 0
        scheduled: dict[int, int] = {}

        i = 0
        while i < len(self.running) and self.budget > 0:
            r = self.running[i]
            i += 1
            if r.prefilled < r.prefill_target:
                continue
            if self.grow(r, r.kv_tokens + 1, now, scheduled):
                scheduled[r.id] = 1
                self.budget -= 1
        i = 0
        while i < len(self.running) and self.budget > 0:
            r = self.running[i]
            i += 1
            if r.prefilled >= r.prefill_target or r.id in scheduled:
                continue
            n = min(r.prefill_target - r.prefilled, self.budget)
            if self.grow(r, r.kv_tokens + n, now, scheduled):
                scheduled[r.id] = n
                self.budget -= n
        if not self.preempted_now:
            while self.waiting and len(self.running) < cfg.max_num_seqs and self.budget > 0:
                r = self.waiting[0]
                if r.swapped_tokens:
                    if not self.fits(r.id, r.swapped_tokens):
                        self.blocked = True
                        break
                    self.held[r.id] = r.swapped_tokens
                    swap_in += r.swapped_tokens
                    r.swapped_tokens = 0
                    n = 0
                else:
                    target = r.isl + r.decoded
                    cached = 0
                    if r.preemption_count and cfg.prefix_hit_fraction > 0:
                        cached = min(math.floor(cfg.prefix_hit_fraction * target), target - 1)
                    n = min(target - cached, self.budget)
                    if not self.fits(r.id, cached + n):
                        self.blocked = True
                        break
                    self.held[r.id] = cached + n
                    r.prefill_target = target
                    r.prefilled = cached
                    r.kv_tokens = cached
                self.waiting.pop(0)
                r.state = RequestState.RUNNING
                r.wait_duration += now - r.wait_started
                r.admitted_at = now
                self.running.append(r)
                if n:
                    scheduled[r.id] = n
                    self.budget -= n

        self.preempted += len(self.preempted_now)
        if self.blocked and self.saturation is None:
            phase = "decode"
            for r in self.reqs:
                if r.arrival_time <= now and r.first_token_time is None:
                    phase = "prefill"
                    break
            self.saturation = (now, phase)
        decoders = [r for r in self.running if scheduled.get(r.id) == 1 and r.prefilled >= r.prefill_target]
        chunks = [(r, scheduled[r.id]) for r in self.running
                  if r.id in scheduled and r.prefilled < r.prefill_target]
        for r in self.running:
            if r.id in scheduled and self.held[r.id] > r.peak_kv_tokens:
                r.peak_kv_tokens = self.held[r.id]
        pre_tok = sum(n for _, n in chunks)
        if not decoders and not pre_tok:
            if self.preempted_now and not self.running:
                raise SimulationError("request larger than the KV pool")
            if not self.running and self.waiting:
                raise SimulationError("request cannot be admitted into an empty pool")
            if not swap_in:
                raise SimulationError("no progress")
        self.max_util = max(self.max_util, self.used() / self.total_blocks)

        kv = sum(r.kv_tokens + 1 for r in decoders)
        extra = 0.0
        if swap_in or self.swap_out:
            extra = (swap_in + self.swap_out) * self.kvb / cfg.swap_host_bandwidth
        t = self.perf.timing(len(decoders), pre_tok, kv, len(decoders) + len(chunks), extra)
        dt = t.step_seconds
        self.clock = now + dt
        if not decoders:
            self.prefill_parts.append(dt)
            if pre_tok:
                self.p_util.append((dt, t.compute_seconds, t.memory_seconds))
        elif not pre_tok:
            self.decode_parts.append(dt)
            self.d_util.append((dt, t.compute_seconds, t.memory_seconds))
        else:
            alone = self.perf.timing(len(decoders), 0, kv, len(decoders)).step_seconds
            share = min(alone, dt)
            self.decode_parts.append(share)
            self.prefill_parts.append(dt - share)

        for r, n in chunks:
            r.prefilled += n
            r.kv_tokens += n
        for r in decoders:
            r.decoded += 1
            r.kv_tokens += 1
            if r.first_token_time is None:
                r.first_token_time = self.clock
            if r.decoded == r.osl:
                r.state = RequestState.FINISHED
                r.finish_time = self.clock
                r.run_duration += self.clock - r.admitted_at
                del self.held[r.id]
        self.running = [r for r in self.running if r.state is not RequestState.FINISHED]
        self.steps += 1

    def run(self) -> ReplicaStats:
        pending = list(self.reqs)
        horizon = self.sc.horizon
        while True:
            while pending and pending[0].arrival_time <= self.clock:
                self.waiting.append(pending.pop(0))
            if not self.running and not self.waiting:
                if not pending:
                    break
                self.clock = pending[0].arrival_time
                continue
            if horizon is not None and self.clock >= horizon:
                break
            self.step()

        def ratio(rows, k):
            total = math.fsum(x[0] for x in rows)
            return math.fsum(x[k] for x in rows) / total if total else 0.0

        sat = self.saturation or (None, None)
        return ReplicaStats(
            replica=self.idx, num_requests=len(self.reqs), steps=self.steps,
            kv_pool_tokens=self.total_blocks * self.bs, total_blocks=self.total_blocks,
            max_kv_util=self.max_util, preemptions=self.preempted,
            first_saturation_time=sat[0], first_saturation_phase=sat[1], end_time=self.clock,
            prefill_seconds=math.fsum(self.prefill_parts), decode_seconds=math.fsum(self.decode_parts),
            prefill_step_sm_util=ratio(self.p_util, 1), prefill_step_bw_util=ratio(self.p_util, 2),
            decode_step_sm_util=ratio(self.d_util, 1), decode_step_bw_util=ratio(self.d_util, 2),
        )


def oracle_run(scenario: Scenario) -> RunSummary:
    """Step-by-step reference run; only for scenarios of at most 32 requests and 4096 tokens."""
    requests = sample_workload(scenario.workload)
    if not requests:
        raise ValueError("oracle_run needs a non-empty workload")
    total = sum(r.isl + r.osl for r in requests)
    if len(requests) > MAX_REQUESTS or total > MAX_TOTAL_TOKENS:
        raise ValueError(
            f"oracle_run is limited to {MAX_REQUESTS} requests and {MAX_TOTAL_TOKENS} tokens "
            f"(got {len(requests)} requests, {total} tokens)"
        )
    buckets = route_requests(requests, scenario.parallelism.dp, scenario.router_weights)
    stats = [_Oracle(i, b, scenario).run() for i, b in enumerate(buckets)]
    return summarize(requests, stats)
