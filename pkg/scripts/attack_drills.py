"""Run every bundled scenario under a range of seeds and summarize which errors each attack produced."""

from __future__ import annotations

import argparse
from collections import Counter

from vanetauth.scenario import bundled_scenarios, run_scenario
from vanetauth.simnet import SimConfig, Simulator


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--drop-rate", type=float, default=0.0)
    args = ap.parse_args()

    for name, text in bundled_scenarios().items():
        passed = 0
        labels: Counter = Counter()
        for seed in range(args.seeds):
            sim = Simulator(SimConfig(seed=seed, wireless_drop_rate=args.drop_rate))
            sim.add_ta()
            passed += run_scenario(sim, text, name).passed
            labels.update(f"{e.entity}:{e.label}" for e in sim.errors)
        top = ", ".join(f"{k} x{v}" for k, v in sorted(labels.items()))
        print(f"{name:<22} {passed}/{args.seeds} passed  [{top}]")


if __name__ == "__main__":
    main()
