"""Sweep max_num_seqs on a KV-starved 8B replica and report the latency trade-off."""

import os
from pathlib import Path

from infersim.engine import sweep
from infersim.experiments import CAPACITY_TRAP_SEQS, capacity_trap_scenario
from infersim.report import RunResult, report


def main() -> None:
    points = sweep(capacity_trap_scenario(), "max_num_seqs", CAPACITY_TRAP_SEQS)
    print(f"{'max_num_seqs':>12}{'preempt':>9}{'max kv':>8}{'TTFT s':>9}{'TPOT ms':>9}{'E2E s':>9}")
    for p in points:
        s = p.summary
        print(f"{p.value:>12}{s.total_preemptions:>9}{s.max_kv_util:>8.2f}{s.ttft.mean:>9.2f}"
              f"{s.tpot.mean * 1e3:>9.2f}{s.e2e.mean:>9.1f}")
    out = Path(os.environ.get("INFERSIM_OUT", "infersim-out")) / "capacity-trap"
    report([RunResult(f"max_num_seqs={p.value}", p.telemetry, p.summary, p.value) for p in points],
           out, axis="max_num_seqs")
    print(f"report written to {out}")


if __name__ == "__main__":
    main()
