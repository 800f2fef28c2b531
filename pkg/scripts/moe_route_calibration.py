"""Recalibrate the MoE routing latency: 671B (1,2,4) versus (1,8,1) across candidate values."""

import argparse

from infersim.engine import run
from infersim.experiments import moe_route_scenario
from infersim.parallelism import ParallelismConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--latencies", default="0,5e-6,1e-5,2e-5,4e-5", help="seconds per MoE layer per step")
    ap.add_argument("--requests", type=int, default=3000)
    args = ap.parse_args()

    pp_heavy, tp_only = ParallelismConfig(1, 2, 4), ParallelismConfig(1, 8, 1)
    print(f"{'route s':>9}{'(1,2,4) s':>12}{'(1,8,1) s':>12}{'ratio':>8}")
    for lat in (float(x) for x in args.latencies.split(",")):
        a = run(moe_route_scenario(pp_heavy, lat, args.requests))[1].makespan
        b = run(moe_route_scenario(tp_only, lat, args.requests))[1].makespan
        print(f"{lat:>9.0e}{a:>12.0f}{b:>12.0f}{b / a:>8.2f}")


if __name__ == "__main__":
    main()
