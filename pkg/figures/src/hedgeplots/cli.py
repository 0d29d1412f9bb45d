"""plot: render hedgelab summary CSVs to image files."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .charts import SchemaError, plot_cost_profit, plot_metrics


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="render grouped risk-metric bars and cost-vs-profit charts "
                    "from a hedgelab summary.csv",
    )
    parser.add_argument("--in", dest="summary", type=Path, required=True,
                        help="summary CSV (metrics schema)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--group-by", default="config_id",
                        help="column that identifies a grid point (default config_id)")
    parser.add_argument("--kind", choices=["metrics", "profit", "both"],
                        default="metrics")
    parser.add_argument("--format", choices=["png", "svg"], default="png")
    args = parser.parse_args(argv)

    try:
        written = []
        if args.kind in ("metrics", "both"):
            written += plot_metrics(args.summary, args.out, args.group_by, args.format)
        if args.kind in ("profit", "both"):
            written.append(plot_cost_profit(args.summary, args.out, args.group_by,
                                            args.format))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
