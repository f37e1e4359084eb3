"""Print the selector's decision table over a requirement grid.

    python3 scripts/selection_sweep.py --colocation 2 --csv sweep.csv
"""

import argparse
import csv
import sys
from collections import Counter
from itertools import product

from safs.kinds import Consistency, OsKind
from safs.perfmodel import load_model
from safs.selector import SelectionConfig, ServerRequirements, Unsatisfiable, select_server_type, size_bucket


def sweep(model, cfg, indices, latencies, replicas):
    for os_kind, consistency, n, index, latency in product(OsKind, Consistency, replicas, indices, latencies):
        r = ServerRequirements("s", os_kind, index, latency, consistency, n)
        try:
            d = select_server_type(r, model, cfg)
        except Unsatisfiable:
            yield r, "-", "unsatisfiable", "-"
            continue
        yield r, d.chosen.value, d.rule_fired.value, size_bucket(d.effective_requirement_index, model.baseline_index)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", help="performance model JSON")
    ap.add_argument("--colocation", type=int, default=1)
    ap.add_argument("--step", type=int, default=100)
    ap.add_argument("--max-index", type=int, default=1100)
    ap.add_argument("--csv", help="write rows to this file instead of stdout")
    args = ap.parse_args(argv)

    model = load_model(args.model)
    cfg = SelectionConfig(planned_colocation=args.colocation)
    rows = list(sweep(model, cfg, range(0, args.max_index + 1, args.step), [None, 5, 50], [1, 2, 4]))

    header = ["os_kind", "consistency", "max_replicas", "index", "latency_ms", "type", "rule", "size"]
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out)
    w.writerow(header)
    for r, chosen, rule, size in rows:
        w.writerow([r.os_kind.value, r.consistency.value, r.max_replicas, r.required_throughput_index,
                    "" if r.required_latency_ms is None else r.required_latency_ms, chosen, rule, size])
    if args.csv:
        out.close()

    counts = Counter(rule if chosen == "-" else chosen for _, chosen, rule, _ in rows)
    print(" ".join(f"{k}={v}" for k, v in sorted(counts.items())), file=sys.stderr)


if __name__ == "__main__":
    main()
