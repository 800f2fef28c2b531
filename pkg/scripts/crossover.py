"""Simulate every (dp, tp, pp) split of 8 GPUs for each studied model and compare with the planner."""

import argparse
import json
import os
from pathlib import Path

from infersim.experiments import CROSSOVER_MODELS, CROSSOVER_REQUESTS, crossover


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", default=",".join(CROSSOVER_MODELS))
    ap.add_argument("--requests", type=int, default=CROSSOVER_REQUESTS)
    ap.add_argument("--gpus", type=int, default=8)
    args = ap.parse_args()

    out = Path(os.environ.get("INFERSIM_OUT", "infersim-out")) / "crossover"
    out.mkdir(parents=True, exist_ok=True)
    for model in args.models.split(","):
        res = crossover(model, args.gpus, args.requests)
        planned = {str(e.config): e.est_makespan for e in res.plan}
        print(f"\n{model}  (simulated best {res.best()}, planner top {res.plan[0].config})")
        print(f"  {'config':<14}{'sim makespan s':>16}{'plan estimate s':>18}{'preemptions':>13}")
        rows = []
        for cfg in res.ranked() + [c for c, m in res.makespans.items() if m is None]:
            m = res.makespans[cfg]
            pre = res.summaries[cfg].total_preemptions if cfg in res.summaries else None
            est = planned[str(cfg)]
            print(f"  {str(cfg):<14}{m if m is None else round(m):>16}"
                  f"{est if est is None else round(est):>18}{pre if pre is not None else '-':>13}")
            rows.append({"config": str(cfg), "sim_makespan": m, "plan_makespan": est, "preemptions": pre})
        (out / f"{model}.json").write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
