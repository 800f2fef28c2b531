
import pytest
from _scenarios import random_tiny_scenario, tiny_hardware, tiny_model

from infersim.engine import Scenario, SimulationError, run
from infersim.oracle import oracle_run
from infersim.parallelism import ParallelismConfig
from infersim.scheduler import SchedulerConfig
from infersim.workload import WorkloadSpec


def outcome(fn, sc):
    try:
        return fn(sc)
    except SimulationError:
        return "error"


@pytest.mark.parametrize("seed", range(100, 130))
def test_oracle_matches_engine(seed):
    sc = random_tiny_scenario(seed)
    engine = outcome(lambda s: run(s)[1], sc)
    assert engine == outcome(oracle_run, sc)


def test_oracle_field_for_field_on_preempting_case():
    sc = Scenario(model=tiny_model(), hardware=tiny_hardware(6), parallelism=ParallelismConfig(1, 1, 1),
                  scheduler=SchedulerConfig(max_num_seqs=4, max_num_batched_tokens=32),
                  workload=WorkloadSpec.fixed(6, 20, 40))
    engine = run(sc)[1]
    ref = oracle_run(sc)
    assert engine.total_preemptions > 0
    assert engine.requests == ref.requests
    assert engine.replicas == ref.replicas


def test_oracle_empty_workload_guard():
    sc = Scenario(model=tiny_model(), hardware=tiny_hardware(6), parallelism=ParallelismConfig(1, 1, 1),
                  scheduler=SchedulerConfig(), workload=WorkloadSpec.fixed(1, 1, 1))
    object.__setattr__(sc.workload, "num_requests", 0)
    with pytest.raises(ValueError, match="non-empty"):
        oracle_run(sc)


@pytest.mark.parametrize("n, isl, osl", [(33, 1, 1), (2, 2000, 100)])
def test_oracle_size_guard(n, isl, osl):
    sc = Scenario(model=tiny_model(), hardware=tiny_hardware(400), parallelism=ParallelismConfig(1, 1, 1),
                  scheduler=SchedulerConfig(), workload=WorkloadSpec.fixed(n, isl, osl))
    with pytest.raises(ValueError, match="limited"):
        oracle_run(sc)


def test_oracle_reports_unservable_request():
    sc = Scenario(model=tiny_model(), hardware=tiny_hardware(2), parallelism=ParallelismConfig(1, 1, 1),
                  scheduler=SchedulerConfig(), workload=WorkloadSpec.fixed(1, 30, 10))
    with pytest.raises(SimulationError):
        oracle_run(sc)
