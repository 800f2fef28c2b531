"""Roofline step-time model.

A step costs ``max(compute, memory) + communication + launch overhead``:
compute is the GEMM flops of every token in the step, memory is one read of
the weight shard plus the KV of the decoding requests, communication is two
ring all-reduces per layer under TP plus MoE routing. Pipeline parallelism
then inflates the step by its bubble fraction and adds stage-boundary
activation transfers.

Every function here accepts ``kv_tokens`` as a numpy array as well as an int;
the engine relies on the two paths producing bit-identical floats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from infersim.catalog import ModelSpec, flops_per_token, kv_bytes_per_token, weight_read_bytes
from infersim.parallelism import (
    HardwareSpec,
    ParallelismConfig,
    allreduce_time,
    pp_bubble_fraction,
)


@dataclass(frozen=True)
class StepTiming:
    step_seconds: float
    compute_seconds: float
    memory_seconds: float
    comm_seconds: float
    bubble_seconds: float = 0.0
    modeled_sm_util: float = 0.0
    modeled_bw_util: float = 0.0
    transfer_seconds: float = 0.0


def _max(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.maximum(a, b)
    return a if a >= b else b


class PerfModel:
    """Step-time model for one (model, hardware, parallelism) placement."""

    def __init__(self, model: ModelSpec, hw: HardwareSpec, cfg: ParallelismConfig):
        self.model = model
        self.hw = hw
        self.cfg = cfg
        self.shards = cfg.tp * cfg.pp
        self.kvb = kv_bytes_per_token(model)
        self.w_read = weight_read_bytes(model)
        self.fpt = flops_per_token(model)
        self.flop_rate = self.shards * hw.peak_flops * hw.compute_efficiency
        self.byte_rate = hw.hbm_bandwidth * hw.mem_efficiency
        self.act_bytes = model.hidden_size * model.dtype_bytes
        self.route = model.num_moe_layers * hw.moe_route_latency

    def compute_seconds(self, tokens: int) -> float:
        return self.fpt * tokens / self.flop_rate

    def memory_seconds(self, kv_tokens):
        return (self.w_read + kv_tokens * self.kvb) / self.shards / self.byte_rate

    def comm_seconds(self, tokens: int) -> float:
        tp = self.cfg.tp
        per_layer = allreduce_time(tokens * self.act_bytes / tp, tp, self.hw)
        return 2 * self.model.num_layers * per_layer + self.route

    def transfer_seconds(self, tokens: int, microbatches: int) -> float:
        pp = self.cfg.pp
        if pp == 1:
            return 0.0
        per_boundary = tokens * self.act_bytes / self.hw.link_bandwidth + microbatches * self.hw.link_latency
        return (pp - 1) * per_boundary

    def timing(self, decode_tokens: int, prefill_tokens: int, kv_tokens, num_seqs: int,
               extra_seconds: float = 0.0) -> StepTiming:
        """Time one step that decodes ``decode_tokens`` sequences and prefills ``prefill_tokens``.

        ``kv_tokens`` counts the KV slots the decoding sequences attend over.
        ``extra_seconds`` is serial time added to the base step (swap traffic).
        """
        tokens = decode_tokens + prefill_tokens
        compute = self.compute_seconds(tokens)
        memory = self.memory_seconds(kv_tokens)
        comm = self.comm_seconds(tokens)
        base = _max(compute, memory) + comm + self.hw.launch_overhead + extra_seconds
        base_timing = StepTiming(
            step_seconds=base, compute_seconds=compute, memory_seconds=memory, comm_seconds=comm
        )
        microbatches = max(1, num_seqs // self.cfg.pp)
        return pp_overlay(base_timing, self.cfg.pp, microbatches,
                          self.transfer_seconds(tokens, microbatches))

    def prefill_chunk_time(self, chunk_tokens: int, num_seqs: int = 1) -> StepTiming:
        if chunk_tokens < 1:
            raise ValueError("chunk_tokens must be >= 1")
        return self.timing(0, chunk_tokens, 0, num_seqs)

    def decode_step_time(self, n: int, total_kv_tokens_active) -> StepTiming:
        if n < 1:
            raise ValueError("decode batch must hold at least one sequence")
        return self.timing(n, 0, total_kv_tokens_active, n)


def pp_overlay(base: StepTiming, pp: int, microbatches: int, transfer_seconds: float = 0.0) -> StepTiming:
    """Inflate a step by the synchronous pipeline bubble and add stage transfers."""
    if pp == 1:
        bubble = 0.0
        transfer_seconds = 0.0
    else:
        f = pp_bubble_fraction(pp, microbatches)
        bubble = base.step_seconds * f / (1 - f)
    step = base.step_seconds + bubble + transfer_seconds
    return StepTiming(
        step_seconds=step,
        compute_seconds=base.compute_seconds,
        memory_seconds=base.memory_seconds,
        comm_seconds=base.comm_seconds,
        bubble_seconds=bubble,
        modeled_sm_util=base.compute_seconds / step,
        modeled_bw_util=base.memory_seconds / step,
        transfer_seconds=transfer_seconds,
    )


def prefill_chunk_time(chunk_tokens: int, model: ModelSpec, hw: HardwareSpec,
                       cfg: ParallelismConfig) -> StepTiming:
    return PerfModel(model, hw, cfg).prefill_chunk_time(chunk_tokens)


def decode_step_time(n: int, total_kv_tokens_active: int, model: ModelSpec, hw: HardwareSpec,
                     cfg: ParallelismConfig) -> StepTiming:
    return PerfModel(model, hw, cfg).decode_step_time(n, total_kv_tokens_active)
