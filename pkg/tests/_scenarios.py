"""Small scenario factories shared by the engine, oracle and acceptance tests."""

import random

from infersim.catalog import ModelSpec
from infersim.engine import Scenario
from infersim.parallelism import ParallelismConfig, bundled_hardware
from infersim.scheduler import SchedulerConfig
from infersim.workload import Arrival, HistogramSpec, WorkloadSpec

TINY_KV_BYTES = 256  # 2 layers * 2 kv heads * 16 dims * 2 (K and V) * 2 bytes
TINY_WEIGHTS = 2_000_000


def tiny_model() -> ModelSpec:
    return ModelSpec(name="tiny", num_layers=2, hidden_size=64, num_heads=4, num_kv_heads=2,
                     head_dim=16, total_params=1_000_000, active_params=1_000_000)


def tiny_hardware(blocks: int, block_size: int = 16, util: float = 0.9):
    """h200-like node whose per-GPU KV pool for the tiny model holds exactly ``blocks`` blocks."""
    cap = (TINY_WEIGHTS + blocks * block_size * TINY_KV_BYTES + 100) / util
    return bundled_hardware()["h200-node"].with_overrides(hbm_capacity=cap, activation_reserve=0.0)


def random_tiny_scenario(seed: int) -> Scenario:
    """At most 12 requests and 12 * 270 tokens, with every scheduler feature in play."""
    rnd = random.Random(seed)
    imax, omax = rnd.randint(1, 120), rnd.randint(1, 150)
    blocks = rnd.randint(-(-(imax + omax) // 16), 40)
    n = rnd.randint(1, 12)
    arrival = Arrival("poisson", rnd.uniform(100, 5000)) if rnd.random() < 0.5 else Arrival()
    wl = WorkloadSpec(n, HistogramSpec(((1, imax, 1.0),)), HistogramSpec(((1, omax, 1.0),)), arrival, seed=seed)
    seqs = rnd.randint(1, 8)
    sched = SchedulerConfig(
        max_num_seqs=seqs,
        max_num_batched_tokens=rnd.randint(seqs, 64),
        preemption_policy=rnd.choice(["recompute", "swap"]),
        prefix_hit_fraction=rnd.choice([0.0, 0.5]),
    )
    return Scenario(
        model=tiny_model(), hardware=tiny_hardware(blocks),
        parallelism=ParallelismConfig(rnd.choice([1, 2]), 1, 1), scheduler=sched, workload=wl,
        telemetry_sample_interval=rnd.randint(1, 7), horizon=rnd.choice([None, None, 0.01]),
        name=f"tiny-{seed}",
    )
