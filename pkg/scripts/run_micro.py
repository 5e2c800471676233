#!/usr/bin/env python3
"""Per-user scheme comparison on the fixed representative populations."""

import argparse

from quotasim.sim import UNWELCOME_USERS, WELCOME_USERS, run_micro_study


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--population", choices=("unwelcome", "welcome"), default="unwelcome",
        help="which fixed population to study",
    )
    args = parser.parse_args()

    special = WELCOME_USERS if args.population == "welcome" else UNWELCOME_USERS
    report = run_micro_study(special)

    print(f"{'user':>18} | " + " | ".join(f"{s:^19}" for s in report.schemes))
    print(f"{'':>18} | " + " | ".join(f"{'q/Q':>8} {'utility':>10}" for _ in report.schemes))
    for i in range(len(special)):
        cells = " | ".join(
            f"{report.ratios[s][i]:8.4f} {report.utilities[s][i]:10.6f}"
            for s in report.schemes
        )
        print(f"{report.labels[i]:>18} | {cells}")


if __name__ == "__main__":
    main()
