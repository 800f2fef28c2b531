"""Run every bundled experiment in sequence."""

import runpy
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
SCRIPTS = ("capacity_trap.py", "dp_scaling.py", "reasoning_cliff.py", "crossover.py", "moe_route_calibration.py")

if __name__ == "__main__":
    for name in SCRIPTS:
        print(f"\n=== {name}")
        sys.argv = [name]
        runpy.run_path(str(HERE / name), run_name="__main__")
