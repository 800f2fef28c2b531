"""DP scaling under light load, and per-replica KV capacity under a saturating load."""

from infersim.engine import run
from infersim.experiments import dp_light_scenario, dp_saturating_scenario


def main() -> None:
    prev = None
    print("light load (8B, 512 requests)")
    for dp in (1, 2, 4, 8):
        tput = run(dp_light_scenario(dp))[1].tokens_per_s
        ratio = "" if prev is None else f"  x{tput / prev:.3f}"
        print(f"  dp={dp}  {tput:12.0f} tok/s{ratio}")
        prev = tput
    print("saturating load (32B, 200 requests per replica)")
    for dp in (1, 2, 4, 8):
        s = run(dp_saturating_scenario(dp))[1]
        pools = sorted({r.kv_pool_tokens for r in s.replicas})
        print(f"  dp={dp}  per-replica KV pool {pools} tokens, preemptions {s.total_preemptions}")


if __name__ == "__main__":
    main()
