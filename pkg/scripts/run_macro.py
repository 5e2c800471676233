#!/usr/bin/env python3
"""Monte-Carlo scheme comparison at the default experiment settings.

Writes report.json and rounds.csv into --out and prints the aggregate
table.  Equivalent to `quotasim simulate --mode macro`, kept as a script
for quick editing during experiments.
"""

import argparse
import json
from pathlib import Path

from quotasim.model import ScenarioConfig
from quotasim.sim import report_to_dict, run_macro_experiment, write_round_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=100)
    parser.add_argument("--rounds", type=int, default=100)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--out", default="out/macro")
    args = parser.parse_args()

    config = ScenarioConfig(n_users=args.users, seed=args.seed, rounds=args.rounds)
    report = run_macro_experiment(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_round_csv(out / "rounds.csv", report)
    (out / "report.json").write_text(json.dumps(report_to_dict(report), indent=2) + "\n")

    print(f"{'scheme':>8} {'welfare':>10} {'jain':>8} {'vs-ne':>8}")
    for agg in report.aggregates:
        print(
            f"{agg.scheme:>8} {agg.welfare_mean:10.4f} {agg.jain_mean:8.4f} "
            f"{agg.ne_fraction_mean:8.4f}"
        )
    print(f"\nwrote {out/'report.json'} and {out/'rounds.csv'}")


if __name__ == "__main__":
    main()
