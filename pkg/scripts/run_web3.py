"""Run the bundled Web 3-tier example end to end and print the report.

Optionally repeats the run over several seeds and reports the spread of the
measured throughput per server, which shows how much the simulated jitter moves.
"""

import argparse
import json
import statistics

from safs.analysis import load_manifests
from safs.fixtures import fixture_paths
from safs.orchestrator import PipelineOptions, run_pipeline
from safs.selector import SelectionConfig, load_requirements


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--repeat", type=int, default=1, help="number of seeds to run, starting at --seed")
    ap.add_argument("--colocation", type=int, default=1)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    paths = fixture_paths("web3")
    text = paths["template"].read_text()
    reqs = load_requirements(paths["requirements"])
    manifests = load_manifests(paths["manifests"])
    cfg = SelectionConfig(planned_colocation=args.colocation)

    measured = {}
    for seed in range(args.seed, args.seed + args.repeat):
        report = run_pipeline(text, reqs, manifests, PipelineOptions(auto_approve=True, seed=seed), config=cfg)
        for v in report.verdicts:
            measured.setdefault(v.server, []).append(v.measured_index)
        if seed == args.seed:
            print(report.to_json() if args.json else report.to_text())

    if args.repeat > 1:
        summary = {
            s: {"min": min(xs), "mean": round(statistics.fmean(xs), 3), "max": max(xs)}
            for s, xs in sorted(measured.items())
        }
        print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
