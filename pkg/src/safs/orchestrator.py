"""End-to-end pipeline: propose, confirm, deploy, extract, execute, report.

The IaaS controller and the test runner are adapters. Anything with the
methods of :class:`IaaSController` / :class:`TestRunner` can be plugged in;
the bundled simulated versions keep everything in memory and are
deterministic for a given seed.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

from safs.analysis import (
    ImageManifest,
    InstalledProfile,
    analyze_images,
    infer_deployment_config,
    prefix_resolutions,
)
from safs.catalog import Catalog, load_catalog, match_patterns
from safs.environment import DeployedEnvironment, DeployedResource, Endpoint, Status, Tenant
from safs.errors import SafsError
from safs.extractor import PlanItem, Scope, TestPlan, extract_test_plan, resolve_test_targets
from safs.kinds import ServerType
from safs.perfmodel import PerformanceModel
from safs.selector import (
    Proposal,
    Rule,
    SelectionConfig,
    ServerRequirements,
    propose_structure,
)
from safs.template import (
    ConcreteTemplate,
    InvalidTemplate,
    build_topology,
    concretize,
    dump_template,
    parse_abstract,
    parse_concrete,
    validate_template,
)

log = logging.getLogger(__name__)

THROUGHPUT = "throughput_index"


class DeployError(SafsError):
    def __init__(self, message: str, environment: DeployedEnvironment):
        super().__init__(message)
        self.environment = environment


class RunnerError(SafsError):
    pass


class PipelineError(SafsError):
    """An upstream failure, tagged with the pipeline step it happened in."""

    def __init__(self, step: int, name: str, cause: Exception):
        super().__init__(f"step {step} ({name}) failed: {cause}")
        self.step = step
        self.name = name
        self.cause = cause


class ProposalRejected(Exception):
    """The user declined the proposed structure; nothing was deployed."""

    def __init__(self, proposal: Proposal):
        super().__init__("proposal rejected by user")
        self.proposal = proposal


# -- adapters --------------------------------------------------------------


class IaaSController(Protocol):
    def deploy(self, ct: ConcreteTemplate, tenant: Tenant) -> DeployedEnvironment: ...

    def teardown(self, tenant: Tenant) -> None: ...

    def status(self, tenant: Tenant) -> DeployedEnvironment | None: ...


class TestRunner(Protocol):
    def execute(self, item: PlanItem, env: DeployedEnvironment) -> TestResult: ...


class SimulatedController:
    """In-memory controller. Endpoints are assigned in resource-name order.

    ``fail`` names resources whose provisioning should fail.
    """

    def __init__(self, fail: Iterable[str] = (), port_base: int = 8000):
        self.fail = frozenset(fail)
        self.port_base = port_base
        self.calls: list[tuple[str, str]] = []
        self._envs: dict[str, DeployedEnvironment] = {}

    @property
    def deploy_calls(self) -> int:
        return sum(1 for op, _ in self.calls if op == "deploy")

    def deploy(self, ct: ConcreteTemplate, tenant: Tenant) -> DeployedEnvironment:
        self.calls.append(("deploy", tenant.id))
        resources = {}
        for i, name in enumerate(sorted(ct.resources)):
            r = ct.resources[name]
            resources[name] = DeployedResource(
                endpoint=Endpoint(name, f"{name}.{tenant.id}.sim", self.port_base + i),
                server_type=r.server_type,
                status=Status.FAILED if name in self.fail else Status.ACTIVE,
                kind=r.kind,
            )
        env = DeployedEnvironment(tenant, resources)
        self._envs[tenant.id] = env
        if env.failed:
            raise DeployError(f"provisioning failed for {env.failed}", env)
        return env

    def teardown(self, tenant: Tenant) -> None:
        self.calls.append(("teardown", tenant.id))
        self._envs.pop(tenant.id, None)

    def status(self, tenant: Tenant) -> DeployedEnvironment | None:
        self.calls.append(("status", tenant.id))
        return self._envs.get(tenant.id)


class ResultStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    test: str
    target: str
    status: ResultStatus
    metrics: Mapping[str, float] = field(default_factory=dict)
    log: str = ""
    scope: Scope = Scope.SERVER
    servers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "metrics", dict(sorted(self.metrics.items())))
        if any(v < 0 for v in self.metrics.values()):
            raise ValueError("metrics must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "test": self.test,
            "target": self.target,
            "status": self.status.value,
            "metrics": dict(self.metrics),
            "log": self.log,
            "scope": self.scope.value,
            "servers": list(self.servers),
        }


def _target_label(item: PlanItem) -> str:
    return ",".join(str(e) for e in item.targets)


class SimulatedRunner:
    """Synthesizes throughput from the performance model.

    A server of type X measures ``capacity_index(X, n)`` times ``1 + u`` with
    ``u`` drawn from ``[0, jitter)`` by an RNG seeded from (seed, test, server).
    The jitter is one-sided so a server never measures below its model
    capacity. ``unreachable`` names resources whose endpoints refuse
    connections; ``failing`` names tests that report a failed check.
    """

    def __init__(
        self,
        model: PerformanceModel,
        seed: int = 0,
        jitter: float = 0.02,
        colocation: int = 1,
        unreachable: Iterable[str] = (),
        failing: Iterable[str] = (),
    ):
        self.model = model
        self.seed = seed
        self.jitter = jitter
        self.colocation = colocation
        self.unreachable = frozenset(unreachable)
        self.failing = frozenset(failing)

    def throughput(self, test: str, server: str, server_type: ServerType) -> float:
        n = 1 if server_type is ServerType.BAREMETAL else self.colocation
        ratio, _ = self.model.lookup(server_type, n)
        u = random.Random(f"{self.seed}|{test}|{server}").random()
        return round(self.model.baseline_index * ratio * (1.0 + self.jitter * u), 3)

    def execute(self, item: PlanItem, env: DeployedEnvironment) -> TestResult:
        touched = {e.resource for e in item.targets} | set(item.attributed)
        for name in sorted(touched):
            res = env.resources.get(name)
            if res is None or res.status is not Status.ACTIVE or name in self.unreachable:
                raise RunnerError(f"{name} unreachable")
        per_server = {}
        for s in item.attributed:
            st = env.resources[s].server_type
            if st is None:
                raise RunnerError(f"{s} has no server type")
            per_server[s] = self.throughput(item.test.name, s, st)
        if item.scope is Scope.SERVER:
            metrics = {THROUGHPUT: per_server[item.server]}
        else:
            metrics = {f"{THROUGHPUT}:{s}": v for s, v in per_server.items()}
            if per_server:
                metrics[THROUGHPUT] = min(per_server.values())
        status = ResultStatus.FAIL if item.test.name in self.failing else ResultStatus.PASS
        return TestResult(
            item.test.name,
            _target_label(item),
            status,
            metrics,
            log=f"simulated {item.test.name} via {_target_label(item)}",
            scope=item.scope,
            servers=item.attributed,
        )


# -- steps -----------------------------------------------------------------


def deploy(controller: IaaSController, ct: ConcreteTemplate, tenant: Tenant) -> DeployedEnvironment:
    diags = validate_template(ct)
    if diags:
        raise InvalidTemplate("; ".join(map(str, diags)))
    return controller.deploy(ct, tenant)


def _result_order(r: TestResult) -> tuple:
    return r.test, r.target, r.servers


def run_tests(
    runner: TestRunner,
    plan: TestPlan,
    env: DeployedEnvironment,
    workers: int = 1,
) -> list[TestResult]:
    """Execute every plan item; a runner error marks that item and moves on."""

    def one(item: PlanItem) -> TestResult:
        try:
            return runner.execute(item, env)
        except RunnerError as exc:
            return TestResult(
                item.test.name, _target_label(item), ResultStatus.ERROR,
                log=str(exc), scope=item.scope, servers=item.attributed,
            )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, plan.items))
    else:
        results = [one(item) for item in plan.items]
    return sorted(results, key=_result_order)


class Verdict(str, Enum):
    MET = "met"
    NOT_MET = "not-met"
    UNVERIFIED = "unverified"


@dataclass(frozen=True)
class ServerVerdict:
    server: str
    verdict: Verdict
    required_index: float
    measured_index: float | None
    results: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "server": self.server,
            "verdict": self.verdict.value,
            "required_index": self.required_index,
            "measured_index": self.measured_index,
            "results": self.results,
        }


@dataclass(frozen=True)
class VerificationReport:
    tenant: str
    proposal: Mapping[str, Any]
    plan: Mapping[str, Any]
    results: tuple[TestResult, ...]
    verdicts: tuple[ServerVerdict, ...]
    warnings: tuple[str, ...] = ()
    context: Mapping[str, Any] = field(default_factory=dict)

    def verdict(self, server: str) -> Verdict:
        for v in self.verdicts:
            if v.server == server:
                return v.verdict
        raise KeyError(server)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tenant": self.tenant,
            "proposal": self.proposal,
            "plan": self.plan,
            "results": [r.to_dict() for r in self.results],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "warnings": list(self.warnings),
            "context": dict(self.context),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        return render_text(self.to_dict())


def _measured(r: TestResult, server: str) -> float | None:
    if r.scope is Scope.SERVER:
        return r.metrics.get(THROUGHPUT)
    return r.metrics.get(f"{THROUGHPUT}:{server}")


def collect_report(
    proposal: Proposal,
    plan: TestPlan,
    results: Sequence[TestResult],
    reqs: Iterable[ServerRequirements],
    *,
    tenant: Tenant | str = "default",
    warnings: Iterable[str] = (),
    context: Mapping[str, Any] | None = None,
) -> VerificationReport:
    """Judge every server that has requirements against its measurements.

    A server is met when every result bearing on it passed and its lowest
    measured throughput reaches the per-instance requirement the selector
    worked with. Servers no result touches are reported as unverified.
    """
    tenant_id = tenant.id if isinstance(tenant, Tenant) else tenant
    notes = list(warnings)
    for d in proposal.decisions:
        notes.extend(f"{d.server}: {w}" for w in d.warnings)
        if d.rule_fired is Rule.LATENCY_BAREMETAL:
            notes.append(f"{d.server}: latency rule fired with a configured threshold")
    for r in results:
        if r.status is not ResultStatus.PASS:
            notes.append(f"{r.status.value}: {r.test} on {r.target or '-'}: {r.log}")

    effective = {d.server: d.effective_requirement_index for d in proposal.decisions}
    verdicts = []
    for req in sorted(reqs, key=lambda q: q.server):
        s = req.server
        required = effective.get(s, req.effective_index)
        mine = [r for r in results if s in r.servers]
        values = [v for v in (_measured(r, s) for r in mine if r.status is ResultStatus.PASS) if v is not None]
        measured = min(values) if values else None
        if not mine:
            verdict = Verdict.UNVERIFIED
            notes.append(f"{s}: no test results, verdict unverified")
        elif any(r.status is not ResultStatus.PASS for r in mine):
            verdict = Verdict.NOT_MET
        elif measured is None:
            verdict = Verdict.UNVERIFIED
            notes.append(f"{s}: no throughput measurement, verdict unverified")
        else:
            verdict = Verdict.MET if measured >= required else Verdict.NOT_MET
        verdicts.append(ServerVerdict(s, verdict, required, measured, len(mine)))

    return VerificationReport(
        tenant=tenant_id,
        proposal=proposal.to_dict(),
        plan=plan.to_dict(),
        results=tuple(results),
        verdicts=tuple(verdicts),
        warnings=tuple(notes),
        context=dict(context or {}),
    )


def render_text(report: Mapping[str, Any]) -> str:
    """Human-readable form of a report dict (as produced by ``to_dict``)."""
    lines = [f"Verification report for tenant {report['tenant']}", ""]
    ctx = report.get("context", {})
    if ctx.get("deployment_config") is not None:
        lines.append(f"Deployment config: {ctx['deployment_config']}")
        lines.append(f"Connection patterns: {', '.join(ctx.get('patterns') or []) or '(none)'}")
        lines.append("")
    lines.append("Proposed structure:")
    for d in report["proposal"]["decisions"]:
        flavor = report["proposal"]["assignments"].get(d["server"], "")
        lines.append(f"  {d['server']:<16} {flavor:<18} [{d['rule_fired']}] {d['rationale']}")
    lines.append("")
    lines.append(f"Test results ({len(report['results'])}):")
    for r in report["results"]:
        tp = r["metrics"].get(THROUGHPUT)
        tp_txt = f" throughput={tp:g}" if tp is not None else ""
        lines.append(f"  {r['status']:<6} {r['test']:<28} -> {r['target']}{tp_txt}")
    lines.append("")
    lines.append("Verdicts:")
    for v in report["verdicts"]:
        measured = "-" if v["measured_index"] is None else f"{v['measured_index']:g}"
        lines.append(
            f"  {v['server']:<16} {v['verdict']:<10} required={v['required_index']:g} measured={measured}"
        )
    if report.get("warnings"):
        lines.append("")
        lines.append("Warnings:")
        lines.extend(f"  - {w}" for w in report["warnings"])
    return "\n".join(lines) + "\n"


# -- pipeline --------------------------------------------------------------


@dataclass(frozen=True)
class PipelineOptions:
    auto_approve: bool = False
    tenant: str = "default"
    seed: int = 0
    workers: int = 1


@contextmanager
def _step(number: int, name: str):
    log.debug("step %d: %s", number, name)
    try:
        yield
    except SafsError as exc:
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(number, name, exc) from exc


def run_pipeline(
    abstract: str | bytes,
    reqs: Sequence[ServerRequirements],
    manifests: Mapping[str, ImageManifest] | Iterable[ImageManifest],
    options: PipelineOptions = PipelineOptions(),
    *,
    catalog: Catalog | None = None,
    model: PerformanceModel | None = None,
    config: SelectionConfig | None = None,
    controller: IaaSController | None = None,
    runner: TestRunner | None = None,
    confirm: Callable[[Proposal], bool] | None = None,
) -> VerificationReport:
    """Run all eight steps; raises ProposalRejected if the user says no."""
    catalog = catalog if catalog is not None else load_catalog()
    model = model if model is not None else PerformanceModel()
    config = config if config is not None else SelectionConfig()
    controller = controller if controller is not None else SimulatedController()
    if runner is None:
        runner = SimulatedRunner(model, seed=options.seed, colocation=config.planned_colocation)
    tenant = Tenant(options.tenant)
    if not options.auto_approve and confirm is None:
        raise ValueError("a confirm callback is required unless auto_approve is set")

    with _step(1, "parse"):
        abstract_t = parse_abstract(abstract)
        graph = build_topology(abstract_t)
    with _step(2, "analyze"):
        profiles = analyze_images(abstract_t, manifests, catalog)
    with _step(3, "propose"):
        proposal = propose_structure(abstract_t, reqs, profiles, model, config)
    if not options.auto_approve and not confirm(proposal):
        raise ProposalRejected(proposal)
    with _step(4, "concretize"):
        concrete = concretize(abstract_t, proposal.assignments)
    with _step(5, "deploy"):
        env = deploy(controller, concrete, tenant)
    with _step(6, "extract"):
        dc = infer_deployment_config(graph, profiles)
        patterns = match_patterns(catalog, dc.groups)
        plan = extract_test_plan(profiles, patterns, catalog)
        plan = resolve_test_targets(plan, graph, env, profiles)
    with _step(7, "execute"):
        results = run_tests(runner, plan, env, workers=options.workers)
    with _step(8, "report"):
        notes = [
            f"{server}: {r.software!r} matched software group {r.software_group} by name prefix"
            for server, r in prefix_resolutions(profiles)
        ]
        components = graph.components()
        if len(components) > 1:
            notes.append(f"topology is not connected: components {components}")
        context = {
            "deployment_config": str(dc),
            "patterns": patterns,
            "profiles": [p.to_dict() for p in profiles],
            "topology": {
                "nodes": list(graph.nodes),
                "edges": sorted(list(e) for e in graph.edges),
                "lb_groups": {k: list(v) for k, v in graph.lb_groups.items()},
                "connected": len(components) <= 1,
            },
            "concrete_template": json.loads(dump_template(concrete)),
            "environment": env.to_dict(),
        }
        return collect_report(
            proposal, plan, results, reqs, tenant=tenant, warnings=notes, context=context
        )


def propose_only(
    abstract: str | bytes,
    reqs: Sequence[ServerRequirements],
    manifests: Mapping[str, ImageManifest] | Iterable[ImageManifest],
    *,
    catalog: Catalog | None = None,
    model: PerformanceModel | None = None,
    config: SelectionConfig | None = None,
) -> tuple[Proposal, list[InstalledProfile]]:
    """Steps 1-3 only."""
    catalog = catalog if catalog is not None else load_catalog()
    model = model if model is not None else PerformanceModel()
    config = config if config is not None else SelectionConfig()
    with _step(1, "parse"):
        t = parse_abstract(abstract)
        build_topology(t)
    with _step(2, "analyze"):
        profiles = analyze_images(t, manifests, catalog)
    with _step(3, "propose"):
        return propose_structure(t, reqs, profiles, model, config), profiles


def verify_concrete(
    concrete: str | bytes,
    manifests: Mapping[str, ImageManifest] | Iterable[ImageManifest],
    reqs: Sequence[ServerRequirements] = (),
    options: PipelineOptions = PipelineOptions(auto_approve=True),
    *,
    catalog: Catalog | None = None,
    controller: IaaSController | None = None,
    runner: TestRunner | None = None,
    dry_run: bool = False,
) -> VerificationReport | TestPlan:
    """Steps 5-8 for an already concrete template.

    With ``dry_run`` the extracted plan is returned untargeted and nothing is
    deployed.
    """
    catalog = catalog if catalog is not None else load_catalog()
    with _step(1, "parse"):
        ct = parse_concrete(concrete)
        abstract_t = ct.strip_flavors()
        graph = build_topology(abstract_t)
    with _step(2, "analyze"):
        profiles = analyze_images(abstract_t, manifests, catalog)
        dc = infer_deployment_config(graph, profiles)
        patterns = match_patterns(catalog, dc.groups)
        plan = extract_test_plan(profiles, patterns, catalog)
    if dry_run:
        return plan
    controller = controller if controller is not None else SimulatedController()
    runner = runner if runner is not None else SimulatedRunner(PerformanceModel(), seed=options.seed)
    tenant = Tenant(options.tenant)
    with _step(5, "deploy"):
        env = deploy(controller, ct, tenant)
    with _step(6, "extract"):
        plan = resolve_test_targets(plan, graph, env, profiles)
    with _step(7, "execute"):
        results = run_tests(runner, plan, env, workers=options.workers)
    proposal = Proposal(ct.flavors(), ())
    context = {"deployment_config": str(dc), "patterns": patterns, "environment": env.to_dict()}
    return collect_report(proposal, plan, results, reqs, tenant=tenant, context=context)
