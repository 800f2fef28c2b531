"""Show where KV capacity first runs out on 405B as the batch grows, and project KV growth."""

import argparse

from infersim.catalog import bundled_catalog
from infersim.engine import run
from infersim.experiments import cliff_scenario
from infersim.planner import kv_projection


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batches", default="500,1000,2000,4000,5000")
    ap.add_argument("--model", default="llama-405b")
    args = ap.parse_args()

    print(f"{'batch':>6}{'first saturation s':>20}{'phase':>9}")
    for bs in (int(b) for b in args.batches.split(",")):
        _, s = run(cliff_scenario(bs, args.model))
        rep = s.replicas[0]
        t = rep.first_saturation_time
        print(f"{bs:>6}{'-' if t is None else f'{t:.1f}':>20}{rep.first_saturation_phase or '-':>9}")

    proj = kv_projection(bundled_catalog()["ds-llama-8b"], 20_000_000, points=5)
    print("\n8B KV footprint by generated tokens")
    for tokens, nbytes in proj.points:
        print(f"{tokens:>12,} tokens  {nbytes / 1e12:8.3f} TB")


if __name__ == "__main__":
    main()
