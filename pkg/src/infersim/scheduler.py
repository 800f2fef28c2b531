"""FCFS continuous-batching scheduler with chunked prefill and LIFO preemption.

One scheduler runs per DP replica. Each step is planned in three passes:

1. every running request that has finished its prefill decodes one token;
   its KV allocation grows by one slot, and if the pool is exhausted the most
   recently admitted running request is preempted until the extension fits;
2. requests still prefilling get chunks from the remaining token budget,
   in admission order, under the same preemption rule;
3. if nothing was preempted, waiting requests are admitted in FCFS order while
   there is a free sequence slot, token budget, and room in the pool for the
   request's first chunk.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

from infersim.config import ConfigError
from infersim.kvcache import BlockPool

RECOMPUTE = "recompute"
SWAP = "swap"


@dataclass(frozen=True)
class SchedulerConfig:
    max_num_seqs: int = 256
    max_num_batched_tokens: int = 2048
    block_size: int = 16
    preemption_policy: str = RECOMPUTE
    gpu_memory_utilization: float = 0.9
    prefix_hit_fraction: float = 0.0
    swap_host_bandwidth: float = 50e9  # bytes/s, used only by the swap policy

    def __post_init__(self) -> None:
        if self.block_size < 1:
            raise ConfigError("scheduler: block_size must be >= 1")
        if self.max_num_seqs < 1:
            raise ConfigError("scheduler: max_num_seqs must be >= 1")
        if self.max_num_batched_tokens < max(1, self.max_num_seqs):
            raise ConfigError(
                "scheduler: max_num_batched_tokens must be >= max_num_seqs so a full decode batch fits"
            )
        if self.preemption_policy not in (RECOMPUTE, SWAP):
            raise ConfigError(f"scheduler: preemption_policy must be '{RECOMPUTE}' or '{SWAP}'")
        if not 0 < self.gpu_memory_utilization <= 1:
            raise ConfigError("scheduler: gpu_memory_utilization must lie in (0, 1]")
        if not 0 <= self.prefix_hit_fraction <= 1:
            raise ConfigError("scheduler: prefix_hit_fraction must lie in [0, 1]")
        if self.swap_host_bandwidth <= 0:
            raise ConfigError("scheduler: swap_host_bandwidth must be positive")


class RequestState(enum.Enum):
    WAITING = "waiting"
    RUNNING = "running"
    PREEMPTED = "preempted"
    FINISHED = "finished"


@dataclass(eq=False)
class Request:
    id: int
    arrival_time: float
    isl: int
    osl: int
    state: RequestState = RequestState.WAITING
    prefilled: int = 0
    decoded: int = 0
    # Tokens the current residency must prefill: the prompt plus anything
    # generated before a recompute preemption.
    prefill_target: int = 0
    recompute_from: int = 0
    first_token_time: float | None = None
    finish_time: float | None = None
    preemption_count: int = 0
    replica: int = 0
    swapped_tokens: int = 0
    # KV slots actually computed in the current residency.
    kv_tokens: int = 0
    admitted_at: float = 0.0
    wait_started: float = 0.0
    wait_duration: float = 0.0
    run_duration: float = 0.0
    peak_kv_tokens: int = 0

    def __post_init__(self) -> None:
        if self.isl < 1 or self.osl < 1:
            raise ValueError(f"request {self.id}: isl and osl must be >= 1")
        self.wait_started = self.arrival_time

    @property
    def prefill_done(self) -> bool:
        return self.state is RequestState.RUNNING and self.prefilled >= self.prefill_target

    @property
    def finished(self) -> bool:
        return self.state is RequestState.FINISHED


@dataclass
class StepPlan:
    decode_set: list[int] = field(default_factory=list)
    prefill_chunks: list[tuple[int, int]] = field(default_factory=list)
    admissions: list[int] = field(default_factory=list)
    preemptions: list[int] = field(default_factory=list)
    # Set when some allocation failed for lack of free blocks.
    kv_blocked: bool = False
    swap_out_tokens: int = 0
    swap_in_tokens: int = 0

    @property
    def num_tokens(self) -> int:
        return len(self.decode_set) + sum(c for _, c in self.prefill_chunks)

    @property
    def prefill_tokens(self) -> int:
        return sum(c for _, c in self.prefill_chunks)

    @property
    def is_empty(self) -> bool:
        return not (self.decode_set or self.prefill_chunks or self.admissions or self.preemptions)


def preempt(running: list[Request], pool: BlockPool, waiting: deque[Request],
            cfg: SchedulerConfig, now: float, plan: StepPlan | None = None) -> Request:
    """Evict the most recently admitted running request back to the waiting-queue head.

    Under recompute the victim's KV is dropped and its prompt plus already
    generated tokens are prefilled again on re-admission; under swap the KV
    is copied to host memory and restored verbatim.
    """
    if not running:
        raise ValueError("no running request to preempt")
    victim = running.pop()
    pool.free(victim.id)
    if cfg.preemption_policy == SWAP:
        victim.swapped_tokens = victim.kv_tokens
        if plan is not None:
            plan.swap_out_tokens += victim.kv_tokens
    else:
        victim.prefilled = 0
        victim.recompute_from = 0
        victim.kv_tokens = 0
    victim.state = RequestState.PREEMPTED
    victim.preemption_count += 1
    victim.run_duration += now - victim.admitted_at
    victim.wait_started = now
    waiting.appendleft(victim)
    if plan is not None:
        plan.preemptions.append(victim.id)
    return victim


def on_prefill_chunk(req: Request, tokens: int) -> None:
    if req.state is not RequestState.RUNNING:
        raise ValueError(f"request {req.id} is not running")
    req.prefilled += tokens
    req.kv_tokens += tokens
    if req.prefilled > req.prefill_target:
        raise AssertionError(f"request {req.id} prefilled past its target")


def on_decode_token(req: Request, now: float) -> Request:
    if not req.prefill_done:
        raise ValueError(f"request {req.id} is not in the decode phase")
    req.decoded += 1
    req.kv_tokens += 1
    if req.first_token_time is None:
        req.first_token_time = now
    if req.decoded == req.osl:
        req.state = RequestState.FINISHED
        req.finish_time = now
        req.run_duration += now - req.admitted_at
    return req


def schedule_step(waiting: deque[Request], running: list[Request], pool: BlockPool,
                  cfg: SchedulerConfig, now: float = 0.0) -> StepPlan:
    """Plan one engine step, reserving KV blocks and moving requests between queues."""
    plan = StepPlan()
    budget = cfg.max_num_batched_tokens
    scheduled: dict[int, int] = {}

    def evict_until_fits(req: Request, new_total: int) -> bool:
        nonlocal budget
        while not pool.extend(req.id, new_total):
            plan.kv_blocked = True
            victim = preempt(running, pool, waiting, cfg, now, plan)
            budget += scheduled.pop(victim.id, 0)
            if victim is req:
                return False
        return True

    i = 0
    while i < len(running) and budget > 0:
        req = running[i]
        i += 1
        if not req.prefill_done:
            continue
        if evict_until_fits(req, req.kv_tokens + 1):
            scheduled[req.id] = 1
            budget -= 1

    i = 0
    while i < len(running) and budget > 0:
        req = running[i]
        i += 1
        if req.prefill_done or req.id in scheduled:
            continue
        chunk = min(req.prefill_target - req.prefilled, budget)
        if evict_until_fits(req, req.kv_tokens + chunk):
            scheduled[req.id] = chunk
            budget -= chunk

    if not plan.preemptions:
        while waiting and len(running) < cfg.max_num_seqs and budget > 0:
            req = waiting[0]
            if req.swapped_tokens:
                if not pool.try_allocate(req.id, req.swapped_tokens):
                    plan.kv_blocked = True
                    break
                plan.swap_in_tokens += req.swapped_tokens
                req.swapped_tokens = 0
                chunk = 0
            else:
                req.prefill_target = req.isl + req.decoded
                cached = 0
                if req.preemption_count and cfg.prefix_hit_fraction > 0:
                    cached = min(math.floor(cfg.prefix_hit_fraction * req.prefill_target),
                                 req.prefill_target - 1)
                chunk = min(req.prefill_target - cached, budget)
                if not pool.try_allocate(req.id, cached + chunk):
                    plan.kv_blocked = True
                    break
                req.prefilled = cached
                req.recompute_from = cached
                req.kv_tokens = cached
            waiting.popleft()
            req.state = RequestState.RUNNING
            req.wait_duration += now - req.wait_started
            req.admitted_at = now
            running.append(req)
            plan.admissions.append(req.id)
            if chunk:
                scheduled[req.id] = chunk
                budget -= chunk

    for req in running:
        n = scheduled.get(req.id)
        if n is None:
            continue
        if req.prefill_done:
            plan.decode_set.append(req.id)
        else:
            plan.prefill_chunks.append((req.id, n))
        held = pool.tokens_held(req.id)
        if held > req.peak_kv_tokens:
            req.peak_kv_tokens = held
    return plan
