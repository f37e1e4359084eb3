"""Verification test plan extraction and target resolution.

Per-server tests come from every tier a resolved software belongs to
(the software itself, its software group, its function group). Environment
tests come from matched connection patterns, e.g. TPC-C for a Web 3-tier
layout, and run once per environment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable

from safs.analysis import InstalledProfile
from safs.catalog import Catalog, TestCaseEntry, Tier, tests_for_tier
from safs.environment import DeployedEnvironment, Endpoint
from safs.errors import SafsError
from safs.template import TopologyGraph


class UnresolvedTarget(SafsError):
    pass


class Scope(str, Enum):
    SERVER = "server"
    ENVIRONMENT = "environment"


@dataclass(frozen=True)
class PlanItem:
    test: TestCaseEntry
    scope: Scope
    server: str | None
    source: str
    participants: tuple[str, ...] = ()
    targets: tuple[Endpoint, ...] = ()

    @property
    def key(self) -> tuple[str, str]:
        return self.test.name, self.server if self.scope is Scope.SERVER else "<environment>"

    @property
    def attributed(self) -> tuple[str, ...]:
        """Servers whose verdict this item's outcome bears on."""
        return (self.server,) if self.scope is Scope.SERVER else self.participants

    def to_dict(self) -> dict[str, Any]:
        return {
            "test": self.test.to_dict(),
            "scope": self.scope.value,
            "server": self.server,
            "participants": list(self.participants),
            "source": self.source,
            "targets": [str(e) for e in self.targets],
            "target_resources": [e.resource for e in self.targets],
        }


@dataclass(frozen=True)
class TestPlan:
    __test__ = False

    items: tuple[PlanItem, ...] = ()

    def __post_init__(self):
        items = tuple(self.items)
        keys = [i.key for i in items]
        if len(set(keys)) != len(keys):
            raise ValueError("plan items must be unique by (test, scope target)")
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def to_dict(self) -> dict[str, Any]:
        return {"items": [i.to_dict() for i in self.items]}


_SERVER_TIERS = (Tier.SOFTWARE, Tier.SOFTWARE_GROUP, Tier.FUNCTION_GROUP)


def extract_test_plan(
    profiles: Iterable[InstalledProfile], patterns: Iterable[str], c: Catalog
) -> TestPlan:
    profiles = sorted(profiles, key=lambda p: p.server)
    items: dict[tuple[str, str], PlanItem] = {}
    for p in profiles:
        for r in p.resolved:
            if not r.known:
                continue
            keys = {
                Tier.SOFTWARE: r.software,
                Tier.SOFTWARE_GROUP: r.software_group,
                Tier.FUNCTION_GROUP: r.function_group,
            }
            for tier in _SERVER_TIERS:
                for test in tests_for_tier(c, tier, keys[tier]):
                    item = PlanItem(
                        test, Scope.SERVER, p.server,
                        source=f"{r.software} -> {tier.value} {keys[tier]}",
                    )
                    items.setdefault(item.key, item)
    participants = tuple(p.server for p in profiles if p.function_groups)
    for pattern in sorted(set(patterns)):
        for test in tests_for_tier(c, Tier.CONNECTION_PATTERN, pattern):
            item = PlanItem(
                test, Scope.ENVIRONMENT, None,
                source=f"connection_pattern {pattern}",
                participants=participants,
            )
            items.setdefault(item.key, item)
    return TestPlan(tuple(items.values()))


def _endpoint(env: DeployedEnvironment, name: str) -> Endpoint:
    if name not in env.resources:
        raise UnresolvedTarget(f"resource {name!r} is not deployed in tenant {env.tenant.id!r}")
    return env.endpoint(name)


def resolve_test_targets(
    plan: TestPlan,
    g: TopologyGraph,
    env: DeployedEnvironment,
    profiles: Iterable[InstalledProfile] | None = None,
) -> TestPlan:
    """Fill in test targets; servers behind a load balancer are tested through it.

    Environment tests enter through the load balancer(s), else the first
    Web server, else every server. Existing targets are recomputed, so
    resolving twice gives the same plan.
    """
    web = sorted(
        p.server for p in (profiles or ()) if "Web" in p.function_groups
    )
    if g.lb_groups:
        entry = sorted(g.lb_groups)
    elif web:
        entry = web[:1]
    else:
        entry = [n for n in g.nodes if n not in g.lb_groups]
    out = []
    for item in plan.items:
        if item.scope is Scope.SERVER:
            if item.server not in g.nodes:
                raise UnresolvedTarget(f"server {item.server!r} is not in the topology")
            names = g.balancers_of(item.server) or [item.server]
            # the server itself must exist even when tested through a balancer
            _endpoint(env, item.server)
        else:
            names = entry
        out.append(replace(item, targets=tuple(_endpoint(env, n) for n in names)))
    return TestPlan(tuple(out))
