import itertools
import json

import pytest
from hypothesis import given, strategies as st

from infersim.catalog import weight_bytes
from infersim.config import ConfigError
from infersim.parallelism import (
    HardwareSpec,
    ParallelismConfig,
    allreduce_time,
    enumerate_configs,
    load_hardware_file,
    placement,
    pp_bubble_fraction,
)
from infersim.scheduler import SchedulerConfig

GB = 1e9
FULL = SchedulerConfig(gpu_memory_utilization=1.0)


def brute_force_triples(n):
    return sorted((d, t, p) for d, t, p in itertools.product(range(1, n + 1), repeat=3) if d * t * p == n)


def test_enumerate_small():
    assert enumerate_configs(1) == [ParallelismConfig(1, 1, 1)]
    four = enumerate_configs(4)
    assert len(four) == 6  # ordered divisor triples of 4
    assert [(c.dp, c.tp, c.pp) for c in four] == brute_force_triples(4)


def test_enumerate_eight_has_studied_layouts():
    got = {(c.dp, c.tp, c.pp) for c in enumerate_configs(8)}
    assert {(8, 1, 1), (1, 8, 1), (1, 1, 8), (4, 2, 1), (2, 4, 1), (1, 4, 2)} <= got
    assert sorted(got) == brute_force_triples(8)


@pytest.mark.parametrize("n", [2, 6, 12, 16])
def test_enumerate_matches_brute_force(n):
    assert [(c.dp, c.tp, c.pp) for c in enumerate_configs(n)] == brute_force_triples(n)


def test_enumerate_rejects_zero():
    with pytest.raises(ValueError):
        enumerate_configs(0)


def test_h200_preset(h200):
    assert h200.hbm_capacity == 141e9
    assert h200.hbm_bandwidth == 4.8e12
    assert h200.peak_flops == 1979e12
    assert h200.link_bandwidth == 900e9
    assert h200.num_gpus == 8


def test_placement_dp8_vs_tp8(catalog, h200):
    m = catalog["ds-qwen-32b"]
    dp = placement(m, h200, ParallelismConfig(8, 1, 1), FULL)
    tp = placement(m, h200, ParallelismConfig(1, 8, 1), FULL)
    assert dp.weight_bytes_per_gpu == pytest.approx(64 * GB, abs=1 * GB)
    assert dp.kv_headroom_per_gpu == pytest.approx(77 * GB, abs=1 * GB)
    assert tp.weight_bytes_per_gpu == pytest.approx(8 * GB, abs=1 * GB)
    assert tp.kv_headroom_per_gpu == pytest.approx(133 * GB, abs=1 * GB)
    assert dp.feasible and tp.feasible


def test_pool_tokens_aggregate_shards(catalog, h200):
    m = catalog["ds-qwen-32b"]
    rep = placement(m, h200, ParallelismConfig(1, 8, 1), FULL)
    # 8 shards of 133 GB each, 262144 B per token
    assert rep.kv_pool_tokens_per_replica == 8 * 133_000_000_000 // 262_144


def test_405b_does_not_fit_one_gpu(catalog, h200):
    rep = placement(catalog["llama-405b"], h200, ParallelismConfig(8, 1, 1))
    assert not rep.feasible
    assert "weights" in rep.infeasibility_reason
    assert rep.kv_headroom_per_gpu == 0.0


def test_too_many_gpus_is_infeasible(catalog, h200):
    rep = placement(catalog["ds-llama-8b"], h200, ParallelismConfig(16, 1, 1))
    assert not rep.feasible and "16 GPUs" in rep.infeasibility_reason


def test_allreduce_examples(h200):
    hw = h200.with_overrides(link_latency=5e-6)
    assert allreduce_time(16 * 2**20, 8, hw) == pytest.approx(1.0262e-4, rel=1e-3)
    assert allreduce_time(16 * 2**20, 1, hw) == 0.0
    assert allreduce_time(0, 8, hw) == pytest.approx(14 * 5e-6)


def test_bubble_examples():
    assert pp_bubble_fraction(1, 7) == 0.0
    assert pp_bubble_fraction(4, 4) == pytest.approx(3 / 7)
    assert pp_bubble_fraction(8, 1) == pytest.approx(7 / 8)
    with pytest.raises(ValueError):
        pp_bubble_fraction(0, 1)


def test_parse_forms():
    assert ParallelismConfig.parse("4,2,1") == ParallelismConfig(4, 2, 1)
    assert ParallelismConfig.parse("dp1-tp2-pp4") == ParallelismConfig(1, 2, 4)
    with pytest.raises(ConfigError):
        ParallelismConfig.parse("4,2")
    with pytest.raises(ConfigError):
        ParallelismConfig(0, 1, 1)


def test_hardware_validation(tmp_path):
    with pytest.raises(ConfigError, match="mem_efficiency"):
        HardwareSpec("x", 1, 1e9, 1e9, 1e9, 1e9, 0.0, mem_efficiency=1.5)
    path = tmp_path / "hw.json"
    path.write_text(json.dumps({"box": {"num_gpus": 2, "hbm_capacity": 1e9}}))
    with pytest.raises(ConfigError, match="missing"):
        load_hardware_file(path)


def test_hardware_override_unknown(h200):
    with pytest.raises(ConfigError, match="bogus"):
        h200.with_overrides(bogus=1)


@given(st.sampled_from([1, 2, 4, 8]), st.sampled_from(["ds-llama-8b", "ds-qwen-32b", "llama-405b", "ds-r1-671b"]))
def test_weight_shards_conserved(n, name):
    from infersim.catalog import bundled_catalog

    model = bundled_catalog()[name]
    from infersim.parallelism import bundled_hardware

    hw = bundled_hardware()["h200-node"]
    for cfg in enumerate_configs(n):
        rep = placement(model, hw, cfg)
        assert rep.weight_bytes_per_gpu * cfg.shards == pytest.approx(weight_bytes(model), rel=1e-12)


@given(st.sampled_from(["ds-llama-8b", "ds-qwen-14b", "ds-qwen-32b", "ds-llama-70b"]),
       st.sampled_from([1, 2, 4, 8]))
def test_pool_non_decreasing_in_tp(name, pp):
    from infersim.catalog import bundled_catalog
    from infersim.parallelism import bundled_hardware

    model = bundled_catalog()[name]
    hw = bundled_hardware()["h200-node"].with_overrides(num_gpus=64)
    pools = [placement(model, hw, ParallelismConfig(1, tp, pp)).kv_pool_tokens_per_replica
             for tp in (1, 2, 4, 8)]
    assert pools == sorted(pools)


@given(st.floats(0, 1e9), st.floats(0, 1e9), st.integers(2, 64))
def test_allreduce_monotone(b1, b2, tp):
    from infersim.parallelism import bundled_hardware

    hw = bundled_hardware()["h200-node"]
    lo, hi = sorted((b1, b2))
    assert allreduce_time(lo, tp, hw) <= allreduce_time(hi, tp, hw)
    assert allreduce_time(lo, tp, hw) <= allreduce_time(lo, tp + 1, hw)


@given(st.integers(1, 64))
def test_bubble_vanishes(pp):
    assert pp_bubble_fraction(pp, 10**9) < 1e-7
