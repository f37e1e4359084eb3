"""Command line interface.

Exit codes
----------
0 - success
1 - usage error
2 - pipeline error (bad input, unsatisfiable requirement, deploy failure, ...)
3 - proposal rejected at the confirmation prompt
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from safs.analysis import load_manifests
from safs.catalog import CatalogError, load_catalog
from safs.environment import Tenant
from safs.errors import SafsError
from safs.orchestrator import (
    PipelineError,
    PipelineOptions,
    ProposalRejected,
    SimulatedController,
    SimulatedRunner,
    deploy,
    propose_only,
    render_text,
    run_pipeline,
    verify_concrete,
)
from safs.perfmodel import load_model
from safs.selector import DEFAULT_LATENCY_THRESHOLD_MS, Proposal, SelectionConfig, load_requirements
from safs.template import concretize, dump_template, parse_abstract

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE, EXIT_REJECTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, *, inputs: bool = True, reqs_required: bool = True) -> None:
    if inputs:
        p.add_argument("-t", "--template", required=True, type=Path, help="template JSON")
        p.add_argument("-r", "--requirements", required=reqs_required, type=Path,
                       help="per-server requirements JSON")
        p.add_argument("-m", "--manifests", required=True, type=Path, help="image manifests JSON")
    p.add_argument("--catalog-dir", type=Path, default=os.environ.get("SAFS_CATALOG_DIR"),
                   help="catalog directory (default: $SAFS_CATALOG_DIR or bundled)")
    p.add_argument("--model", type=Path, help="performance model config JSON")
    p.add_argument("--colocation", type=int, default=1,
                   help="planned co-resident virtual servers per host")
    p.add_argument("--latency-threshold", type=float, default=DEFAULT_LATENCY_THRESHOLD_MS,
                   help="latency bound (ms) below which baremetal is chosen")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", type=Path, help="write the result document here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="safs", description="Server structure proposal and automatic verification")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("propose", help="propose a server type per server")
    _common(p)

    p = sub.add_parser("deploy", help="propose, confirm and deploy on the simulated controller")
    _common(p)
    p.add_argument("--tenant", default="default")
    p.add_argument("--auto-approve", action="store_true")

    p = sub.add_parser("verify", help="extract and run tests for a concrete template")
    _common(p, reqs_required=False)
    p.add_argument("--tenant", default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry-run", action="store_true", help="print the test plan without executing")

    p = sub.add_parser("run", help="full pipeline, steps 1-8")
    _common(p)
    p.add_argument("--tenant", default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--auto-approve", action="store_true")

    p = sub.add_parser("catalog-validate", help="load and check a catalog")
    _common(p, inputs=False)

    p = sub.add_parser("report", help="render a saved JSON report")
    p.add_argument("report_file", type=Path)
    p.add_argument("--json", action="store_true")
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is not None:
        out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def proposal_table(proposal: Proposal) -> str:
    rows = [f"{'server':<16} {'flavor':<18} {'rule':<18} rationale"]
    for d in proposal.decisions:
        rows.append(
            f"{d.server:<16} {proposal.assignments[d.server]:<18} {d.rule_fired.value:<18} {d.rationale}"
        )
        rows.extend(f"{'':<16} warning: {w}" for w in d.warnings)
    return "\n".join(rows) + "\n"


def _ask(proposal: Proposal) -> bool:
    sys.stdout.write(proposal_table(proposal))
    sys.stdout.write("Deploy this structure? [y/N] ")
    sys.stdout.flush()
    answer = sys.stdin.readline()
    return answer.strip().lower() in ("y", "yes")


def _load(args):
    catalog = load_catalog(args.catalog_dir)
    model = load_model(args.model)
    try:
        config = SelectionConfig(args.colocation, args.latency_threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return catalog, model, config


def _cmd_propose(args) -> int:
    catalog, model, config = _load(args)
    proposal, _ = propose_only(
        args.template.read_text(encoding="utf-8"),
        load_requirements(args.requirements),
        load_manifests(args.manifests),
        catalog=catalog, model=model, config=config,
    )
    if args.json:
        _emit(json.dumps(proposal.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(proposal_table(proposal), args.out)
    return EXIT_OK


def _cmd_deploy(args) -> int:
    catalog, model, config = _load(args)
    text = args.template.read_text(encoding="utf-8")
    proposal, _ = propose_only(
        text, load_requirements(args.requirements), load_manifests(args.manifests),
        catalog=catalog, model=model, config=config,
    )
    if not args.auto_approve and not _ask(proposal):
        sys.stdout.write(json.dumps(proposal.to_dict(), indent=2, sort_keys=True) + "\n")
        return EXIT_REJECTED
    concrete = concretize(parse_abstract(text), proposal.assignments)
    env = deploy(SimulatedController(), concrete, Tenant(args.tenant))
    if args.out is not None:
        args.out.write_text(dump_template(concrete), encoding="utf-8")
    if args.json:
        sys.stdout.write(json.dumps(env.to_dict(), indent=2, sort_keys=True) + "\n")
    else:
        for name, r in env.resources.items():
            kind = r.server_type.value if r.server_type else r.kind
            sys.stdout.write(f"{name:<16} {kind:<12} {r.status.value:<8} {r.endpoint}\n")
    return EXIT_OK


def _cmd_verify(args) -> int:
    catalog, model, config = _load(args)
    reqs = load_requirements(args.requirements) if args.requirements else []
    result = verify_concrete(
        args.template.read_text(encoding="utf-8"),
        load_manifests(args.manifests),
        reqs,
        PipelineOptions(auto_approve=True, tenant=args.tenant, seed=args.seed),
        catalog=catalog,
        runner=None if args.dry_run else SimulatedRunner(
            model, seed=args.seed, colocation=config.planned_colocation
        ),
        dry_run=args.dry_run,
    )
    if args.dry_run:
        _emit(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", args.out)
        return EXIT_OK
    _emit(result.to_json() if args.json or args.out else result.to_text(), args.out)
    return EXIT_OK


def _cmd_run(args) -> int:
    catalog, model, config = _load(args)
    options = PipelineOptions(auto_approve=args.auto_approve, tenant=args.tenant, seed=args.seed)
    try:
        report = run_pipeline(
            args.template.read_text(encoding="utf-8"),
            load_requirements(args.requirements),
            load_manifests(args.manifests),
            options,
            catalog=catalog, model=model, config=config,
            confirm=_ask,
        )
    except ProposalRejected as rej:
        sys.stdout.write("\nProposal rejected; nothing deployed.\n")
        sys.stdout.write(json.dumps(rej.proposal.to_dict(), indent=2, sort_keys=True) + "\n")
        return EXIT_REJECTED
    if args.out is not None:
        args.out.write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.to_json() if args.json else report.to_text())
    return EXIT_OK


def _cmd_catalog_validate(args) -> int:
    c = load_catalog(args.catalog_dir)
    summary = {
        "software": len(c.software),
        "patterns": len(c.patterns),
        "tests": len(c.tests),
        "function_groups": sorted(c.function_groups),
        "pattern_names": sorted(c.pattern_names),
    }
    if args.json:
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(
            f"catalog ok: {summary['software']} software, {summary['patterns']} pattern configs, "
            f"{summary['tests']} test cases\n"
        )
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        doc = json.loads(args.report_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.report_file} is not a JSON report: {exc}") from None
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n" if args.json else render_text(doc))
    return EXIT_OK


COMMANDS = {
    "propose": _cmd_propose,
    "deploy": _cmd_deploy,
    "verify": _cmd_verify,
    "run": _cmd_run,
    "catalog-validate": _cmd_catalog_validate,
    "report": _cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"safs: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (SafsError, CatalogError, OSError) as exc:
        print(f"safs: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
