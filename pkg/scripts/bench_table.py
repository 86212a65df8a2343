"""Build the authentication cost table on this host and write CSV/JSON/plot data.

    python scripts/bench_table.py --out results/            # measured costs
    python scripts/bench_table.py --reference --out results/
"""

from __future__ import annotations

import argparse
from pathlib import Path

from vanetauth import bench


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--iterations", type=int, default=1000)
    ap.add_argument("--modulus-bits", type=int, default=2048)
    ap.add_argument("--reference", action="store_true", help="evaluate with reference costs, skip timing")
    args = ap.parse_args()

    if args.reference:
        costs, measured = bench.REFERENCE_COSTS, None
    else:
        costs = bench.measure_primitives(args.iterations, args.modulus_bits)
        measured = {s: bench.measure_auth(s, args.iterations, args.modulus_bits) for s in bench.IMPLEMENTED}
    rows = bench.build_table(costs, measured=measured, modulus_bits=args.modulus_bits)
    print(costs)
    print(bench.format_table(rows))
    if measured:
        for scheme, m in measured.items():
            print(f"{scheme:<9} measured median OBU+TA {m['OBU+TA']:.4f} ms")
        print(f"speedup {measured['baseline']['OBU+TA'] / measured['proposed']['OBU+TA']:.0f}x")

    args.out.mkdir(parents=True, exist_ok=True)
    tag = "reference" if args.reference else "measured"
    bench.emit_results(rows, "csv", args.out / f"auth_costs_{tag}.csv")
    bench.emit_results(rows, "json", args.out / f"auth_costs_{tag}.json")
    (args.out / f"plot_{tag}.csv").write_text(
        "scheme,total_ms\n" + "".join(f"{s},{t}\n" for s, t in bench.plot_data(rows)))
    print(f"wrote {args.out}/")


if __name__ == "__main__":
    main()
