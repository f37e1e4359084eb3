"""Server type selection and structure proposal.

Prices rank container < vm < baremetal, so a server only leaves the container
tier when a container cannot meet its requirements:

1. The effective requirement is the throughput index, divided by the allowed
   replica count when the server tolerates eventual consistency.
2. Baremetal if the effective requirement exceeds what the cheapest
   OS-compatible virtual server delivers at the planned co-location, or
   the latency bound is tighter than the baremetal latency threshold.
3. VM if the OS is non-Linux or a customized Linux.
4. Container otherwise.

The phrase "and are not uniform management servers" attached to the container
rule in the source method is not given an operational meaning here; every
normal-Linux server that passes rules 2-3 becomes a container.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from safs.analysis import InstalledProfile
from safs.errors import SafsError
from safs.kinds import PRICE_ORDER, Consistency, OsKind, ServerType
from safs.perfmodel import PerformanceModel
from safs.template import AbstractTemplate

DEFAULT_LATENCY_THRESHOLD_MS = 10.0


class SelectionError(SafsError):
    pass


class MissingRequirement(SelectionError):
    pass


class RequirementsFormatError(SelectionError):
    pass


class Unsatisfiable(SelectionError):
    def __init__(self, server: str, effective: float, capacity: float):
        super().__init__(
            f"server {server!r}: effective requirement {effective:g} exceeds the capacity "
            f"of a dedicated baremetal server ({capacity:g})"
        )
        self.server = server


class Rule(str, Enum):
    PERF_BAREMETAL = "perf_baremetal"
    LATENCY_BAREMETAL = "latency_baremetal"
    OS_VM = "os_vm"
    DEFAULT_CONTAINER = "default_container"


RULE_TYPE = {
    Rule.PERF_BAREMETAL: ServerType.BAREMETAL,
    Rule.LATENCY_BAREMETAL: ServerType.BAREMETAL,
    Rule.OS_VM: ServerType.VM,
    Rule.DEFAULT_CONTAINER: ServerType.CONTAINER,
}


@dataclass(frozen=True)
class ServerRequirements:
    server: str
    os_kind: OsKind | None = None
    required_throughput_index: float = 0.0
    required_latency_ms: float | None = None
    consistency: Consistency = Consistency.STRONG
    max_replicas: int = 1

    def __post_init__(self):
        if self.os_kind is not None:
            object.__setattr__(self, "os_kind", OsKind(self.os_kind))
        object.__setattr__(self, "consistency", Consistency(self.consistency))
        idx = self.required_throughput_index
        if isinstance(idx, bool) or not isinstance(idx, (int, float)) or idx < 0:
            raise RequirementsFormatError(
                f"{self.server}: required_throughput_index must be >= 0, got {idx!r}"
            )
        lat = self.required_latency_ms
        if lat is not None and (isinstance(lat, bool) or not isinstance(lat, (int, float)) or lat <= 0):
            raise RequirementsFormatError(
                f"{self.server}: required_latency_ms must be positive, got {lat!r}"
            )
        r = self.max_replicas
        if isinstance(r, bool) or not isinstance(r, int) or r < 1:
            raise RequirementsFormatError(f"{self.server}: max_replicas must be >= 1, got {r!r}")

    @property
    def effective_index(self) -> float:
        if self.consistency is Consistency.EVENTUAL:
            return self.required_throughput_index / self.max_replicas
        return float(self.required_throughput_index)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ServerRequirements:
        known = {
            "server", "os_kind", "required_throughput_index",
            "required_latency_ms", "consistency", "max_replicas",
        }
        extra = set(d) - known
        if extra or "server" not in d:
            raise RequirementsFormatError(
                f"bad requirements entry {dict(d)!r}: needs 'server', "
                f"unsupported fields {sorted(extra)}"
            )
        try:
            return cls(**d)
        except ValueError as exc:
            raise RequirementsFormatError(f"{d.get('server')}: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "server": self.server,
            "os_kind": self.os_kind.value if self.os_kind else None,
            "required_throughput_index": self.required_throughput_index,
            "required_latency_ms": self.required_latency_ms,
            "consistency": self.consistency.value,
            "max_replicas": self.max_replicas,
        }


def parse_requirements(text: str) -> list[ServerRequirements]:
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RequirementsFormatError(f"requirements are not valid JSON: {exc}") from None
    if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
        raise RequirementsFormatError("requirements must be a JSON array of objects")
    return [ServerRequirements.from_dict(r) for r in rows]


def load_requirements(path: str | os.PathLike) -> list[ServerRequirements]:
    return parse_requirements(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SelectionConfig:
    planned_colocation: int = 1
    latency_baremetal_threshold_ms: float = DEFAULT_LATENCY_THRESHOLD_MS
    price_order: tuple[ServerType, ...] = field(default=PRICE_ORDER, init=False)

    def __post_init__(self):
        if self.planned_colocation < 1:
            raise ValueError("planned_colocation must be >= 1")
        if not self.latency_baremetal_threshold_ms > 0:
            raise ValueError("latency_baremetal_threshold_ms must be positive")


@dataclass(frozen=True)
class Decision:
    server: str
    chosen: ServerType
    effective_requirement_index: float
    rule_fired: Rule
    rationale: str
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "server": self.server,
            "chosen": self.chosen.value,
            "effective_requirement_index": self.effective_requirement_index,
            "rule_fired": self.rule_fired.value,
            "rationale": self.rationale,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class Proposal:
    assignments: Mapping[str, str]
    decisions: tuple[Decision, ...]

    def decision_for(self, server: str) -> Decision:
        for d in self.decisions:
            if d.server == server:
                return d
        raise KeyError(server)

    def to_dict(self) -> dict[str, Any]:
        return {
            "assignments": dict(sorted(self.assignments.items())),
            "decisions": [d.to_dict() for d in self.decisions],
        }


def _capacity(m: PerformanceModel, t: ServerType, n: int, warnings: list[str]) -> float:
    ratio, warning = m.lookup(t, n)
    if warning and warning not in warnings:
        warnings.append(warning)
    return m.baseline_index * ratio


def select_server_type(
    req: ServerRequirements,
    m: PerformanceModel,
    cfg: SelectionConfig = SelectionConfig(),
) -> Decision:
    if req.os_kind is None:
        raise MissingRequirement(f"server {req.server!r}: OS kind not known")
    warnings: list[str] = []
    trace: list[str] = []
    eff = req.effective_index
    if req.consistency is Consistency.EVENTUAL and req.max_replicas > 1:
        trace.append(
            f"eventual consistency: {req.required_throughput_index:g} spread over "
            f"{req.max_replicas} replicas -> {eff:g} per instance"
        )
    else:
        trace.append(f"effective requirement {eff:g}")

    bm_cap = _capacity(m, ServerType.BAREMETAL, 1, warnings)
    if eff > bm_cap:
        raise Unsatisfiable(req.server, eff, bm_cap)

    virtual = ServerType.CONTAINER if req.os_kind is OsKind.NORMAL_LINUX else ServerType.VM
    n = cfg.planned_colocation
    v_cap = _capacity(m, virtual, n, warnings)
    threshold = cfg.latency_baremetal_threshold_ms
    if eff > v_cap:
        rule = Rule.PERF_BAREMETAL
        trace.append(f"exceeds {virtual.value} capacity {v_cap:g} at {n} per host -> baremetal")
    elif req.required_latency_ms is not None and req.required_latency_ms < threshold:
        rule = Rule.LATENCY_BAREMETAL
        trace.append(
            f"latency bound {req.required_latency_ms:g} ms below threshold {threshold:g} ms "
            "(configurable default, not a measured value) -> baremetal"
        )
    elif req.os_kind is not OsKind.NORMAL_LINUX:
        rule = Rule.OS_VM
        trace.append(f"os {req.os_kind.value} needs a full guest kernel -> vm")
    else:
        rule = Rule.DEFAULT_CONTAINER
        trace.append(f"fits container capacity {v_cap:g}, normal Linux -> container")
    return Decision(req.server, RULE_TYPE[rule], eff, rule, "; ".join(trace), tuple(warnings))


def size_bucket(effective_index: float, baseline_index: float) -> str:
    if 3 * effective_index <= baseline_index:
        return "small"
    if 3 * effective_index <= 2 * baseline_index:
        return "medium"
    return "large"


def propose_structure(
    t: AbstractTemplate,
    reqs: Iterable[ServerRequirements],
    profiles: Iterable[InstalledProfile],
    m: PerformanceModel,
    cfg: SelectionConfig = SelectionConfig(),
) -> Proposal:
    by_server: dict[str, ServerRequirements] = {}
    for r in reqs:
        if r.server in by_server:
            raise RequirementsFormatError(f"duplicate requirements for {r.server!r}")
        by_server[r.server] = r
    servers = t.servers
    stray = sorted(set(by_server) - set(servers))
    if stray:
        raise RequirementsFormatError(f"requirements name unknown server(s) {stray}")
    missing = [s for s in servers if s not in by_server]
    if missing:
        raise MissingRequirement(f"no requirements for server(s) {missing}")
    os_from_profile = {p.server: p.os_kind for p in profiles}

    decisions = []
    assignments = {}
    for s in servers:
        req = by_server[s]
        if req.os_kind is None:
            if os_from_profile.get(s) is None:
                raise MissingRequirement(
                    f"server {s!r}: OS kind given neither in requirements nor in manifest"
                )
            req = replace(req, os_kind=os_from_profile[s])
        d = select_server_type(req, m, cfg)
        decisions.append(d)
        assignments[s] = f"{d.chosen.value}.{size_bucket(d.effective_requirement_index, m.baseline_index)}"
    return Proposal(assignments, tuple(decisions))
