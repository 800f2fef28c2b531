"""End-to-end acceptance checks; each test carries the criterion it covers."""

import random

import pytest
from _scenarios import random_tiny_scenario

from infersim.catalog import kv_bytes_per_token
from infersim.engine import SimulationError, run
from infersim.experiments import (
    CAPACITY_TRAP_SEQS,
    capacity_trap_scenario,
    cliff_scenario,
    crossover_scenario,
    decode_dominance_scenario,
    dp_light_scenario,
    dp_saturating_scenario,
)
from infersim.kvcache import BlockPool, blocks_for
from infersim.oracle import oracle_run
from infersim.parallelism import ParallelismConfig, placement
from infersim.planner import kv_projection
from infersim.scheduler import SchedulerConfig
from infersim.workload import natural_reasoning, sample_workload

GB = 1e9
criterion = pytest.mark.criterion


def P(dp, tp, pp):
    return ParallelismConfig(dp, tp, pp)


@pytest.fixture(scope="module")
def trap_sweep():
    return [run(capacity_trap_scenario(v), check_invariants=True)[1] for v in CAPACITY_TRAP_SEQS]


@criterion(1, "KV bytes per token exact for L=64 and L=80")
def test_kv_math_exact(catalog):
    assert kv_bytes_per_token(catalog["ds-qwen-32b"]) == 262_144
    assert kv_bytes_per_token(catalog["ds-llama-70b"]) == 327_680


@criterion(2, "32B placement: weights and KV headroom at (8,1,1) and (1,8,1)")
def test_capacity_arithmetic(catalog, h200):
    full = SchedulerConfig(gpu_memory_utilization=1.0)
    dp = placement(catalog["ds-qwen-32b"], h200, P(8, 1, 1), full)
    tp = placement(catalog["ds-qwen-32b"], h200, P(1, 8, 1), full)
    assert abs(dp.weight_bytes_per_gpu - 64 * GB) <= GB and abs(dp.kv_headroom_per_gpu - 77 * GB) <= GB
    assert abs(tp.weight_bytes_per_gpu - 8 * GB) <= GB and abs(tp.kv_headroom_per_gpu - 133 * GB) <= GB


@criterion(3, "100k-sample reasoning mix: ISL 50-150 share 0.77, OSL>5000 share 0.45")
def test_workload_fidelity():
    reqs = sample_workload(natural_reasoning(100_000))
    isl_share = sum(50 <= r.isl <= 150 for r in reqs) / len(reqs)
    osl_share = sum(r.osl > 5000 for r in reqs) / len(reqs)
    assert abs(isl_share - 0.77) <= 0.01
    assert abs(osl_share - 0.45) <= 0.01


@criterion(4, "capacity trap: preemptions non-decreasing in max_num_seqs, KV util 1.0 at the top")
def test_capacity_trap(trap_sweep):
    pre = [s.total_preemptions for s in trap_sweep]
    assert pre == sorted(pre) and pre[-1] > 0
    assert trap_sweep[-1].max_kv_util == 1.0


@criterion(5, "latency decoupling: TTFT falls, TPOT rises, E2E has an interior minimum")
def test_latency_decoupling(trap_sweep):
    ttft = [s.ttft.mean for s in trap_sweep]
    tpot = [s.tpot.mean for s in trap_sweep]
    e2e = [s.e2e.mean for s in trap_sweep]
    assert len(trap_sweep) >= 5
    assert all(b <= a for a, b in zip(ttft, ttft[1:]))
    assert all(b >= a for a, b in zip(tpot, tpot[1:]))
    best = e2e.index(min(e2e))
    assert 0 < best < len(e2e) - 1


@criterion(6, "DP: >=1.75x per doubling under light load; per-replica KV capacity invariant in DP")
def test_dp_scaling_light_load():
    tput = [run(dp_light_scenario(dp), check_invariants=True)[1].tokens_per_s for dp in (1, 2, 4, 8)]
    assert all(b / a >= 1.75 for a, b in zip(tput, tput[1:]))


@criterion(6, "DP: >=1.75x per doubling under light load; per-replica KV capacity invariant in DP")
def test_dp_stranded_capacity():
    pools = set()
    for dp in (1, 2, 4, 8):
        _, s = run(dp_saturating_scenario(dp))
        assert all(r.max_kv_util == 1.0 for r in s.replicas), "workload must saturate every replica"
        pools |= {r.kv_pool_tokens for r in s.replicas}
        assert max(r.peak_kv_tokens for r in s.requests) <= min(pools)
    assert len(pools) == 1


@criterion(7, "crossover: DP8 best for 14B; TP-containing best for 32B with (4,2,1) ahead of (8,1,1) and (1,8,1)")
def test_dp_tp_crossover(crossover_results):
    r14 = crossover_results("ds-qwen-14b")
    assert r14.best() == P(8, 1, 1)
    r32 = crossover_results("ds-qwen-32b")
    assert r32.best().tp > 1
    m = r32.makespans
    assert m[P(4, 2, 1)] < m[P(8, 1, 1)] and m[P(4, 2, 1)] < m[P(1, 8, 1)]


@criterion(8, "frontier: 405B TP8 >=2x faster than PP8, DP8 infeasible; 671B (1,2,4) beats (1,8,1)")
def test_frontier_divergence(crossover_results, catalog, h200):
    m405 = crossover_results("llama-405b").makespans
    assert m405[P(1, 1, 8)] >= 2 * m405[P(1, 8, 1)]
    assert m405[P(8, 1, 1)] is None
    assert not placement(catalog["llama-405b"], h200, P(8, 1, 1)).feasible
    with pytest.raises(SimulationError):
        run(crossover_scenario("llama-405b", P(8, 1, 1), 10))
    m671 = crossover_results("ds-r1-671b").makespans
    assert m671[P(1, 2, 4)] < m671[P(1, 8, 1)]


@criterion(9, "8B reasoning: >99% of time in decode; prefill compute-heavy, decode bandwidth-heavy")
def test_decode_dominance():
    _, s = run(decode_dominance_scenario(), check_invariants=True)
    assert s.decode_fraction > 0.99
    rep = s.replicas[0]
    assert rep.prefill_step_sm_util > rep.prefill_step_bw_util
    assert rep.decode_step_bw_util > rep.decode_step_sm_util


@criterion(10, "reasoning cliff: 8B at 20M tokens >2 TB; larger 405B batch saturates during prefill")
def test_reasoning_cliff(catalog):
    assert kv_projection(catalog["ds-llama-8b"], 20_000_000).points[-1][1] > 2e12
    phases = {}
    for bs in (1000, 5000):
        _, s = run(cliff_scenario(bs), check_invariants=True)
        phases[bs] = s.replicas[0].first_saturation_phase
    assert phases == {1000: "decode", 5000: "prefill"}


def random_pool_sequence(rnd: random.Random) -> None:
    bs = rnd.choice((1, 2, 16))
    pool = BlockPool(bs, rnd.randint(0, 48))
    held: dict[int, int] = {}
    for op in range(rnd.randint(1, 12)):
        kind = rnd.random()
        if kind < 0.45 or not held:
            tokens = rnd.randint(1, 200)
            if pool.try_allocate(op, tokens):
                held[op] = tokens
        elif kind < 0.8:
            rid = rnd.choice(list(held))
            new = held[rid] + rnd.randint(0, 64)
            if pool.extend(rid, new):
                held[rid] = new
        else:
            rid = rnd.choice(list(held))
            assert pool.free(rid) == blocks_for(held.pop(rid), bs)
        used = sum(blocks_for(t, bs) for t in held.values())
        assert pool.free_blocks + used == pool.total_blocks
        assert pool.free_blocks >= 0


@criterion(11, "correctness: allocator conservation, per-step invariants, oracle equivalence, reruns")
def test_allocator_conservation_random_sequences():
    rnd = random.Random(2024)
    for _ in range(100_000):
        random_pool_sequence(rnd)


@criterion(11, "correctness: allocator conservation, per-step invariants, oracle equivalence, reruns")
def test_oracle_equivalence_100_tiny_scenarios():
    diverged = []
    for seed in range(100):
        sc = random_tiny_scenario(seed)
        try:
            engine = run(sc, check_invariants=True)[1]
        except SimulationError:
            engine = "error"
        try:
            ref = oracle_run(sc)
        except SimulationError:
            ref = "error"
        if engine != ref:
            diverged.append(seed)
    assert diverged == []


@criterion(11, "correctness: allocator conservation, per-step invariants, oracle equivalence, reruns")
def test_bit_identical_reruns(crossover_results):
    sc = capacity_trap_scenario(CAPACITY_TRAP_SEQS[-1])
    assert run(sc) == run(sc)
    cfg = P(4, 2, 1)
    again = run(crossover_scenario("ds-qwen-32b", cfg))[1]
    assert again == crossover_results("ds-qwen-32b").summaries[cfg]
