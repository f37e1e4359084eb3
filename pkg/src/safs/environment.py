"""Deployed-environment records shared by the extractor and the orchestrator."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Any, Mapping

from safs.kinds import ServerType


class Status(str, Enum):
    ACTIVE = "active"
    FAILED = "failed"


@dataclass(frozen=True)
class Tenant:
    id: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id.strip():
            raise ValueError("tenant id must be a nonempty string")


@dataclass(frozen=True, order=True)
class Endpoint:
    resource: str
    host: str
    port: int

    def __str__(self) -> str:
        return f"{self.host}:{self.port}"

    def to_dict(self) -> dict[str, Any]:
        return {"resource": self.resource, "host": self.host, "port": self.port}


@dataclass(frozen=True)
class DeployedResource:
    endpoint: Endpoint
    server_type: ServerType | None  # None for load balancers
    status: Status = Status.ACTIVE
    kind: str = "server"


@dataclass(frozen=True)
class DeployedEnvironment:
    tenant: Tenant
    resources: Mapping[str, DeployedResource]

    def __post_init__(self):
        res = dict(sorted(self.resources.items()))
        endpoints = [(r.endpoint.host, r.endpoint.port) for r in res.values()]
        if len(set(endpoints)) != len(endpoints):
            raise ValueError("deployed endpoints must be unique")
        object.__setattr__(self, "resources", MappingProxyType(res))

    def __eq__(self, other):
        if not isinstance(other, DeployedEnvironment):
            return NotImplemented
        return (self.tenant, dict(self.resources)) == (other.tenant, dict(other.resources))

    def __hash__(self):
        return hash((self.tenant, tuple(self.resources.items())))

    def endpoint(self, name: str) -> Endpoint:
        return self.resources[name].endpoint

    @property
    def failed(self) -> list[str]:
        return [n for n, r in self.resources.items() if r.status is Status.FAILED]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tenant": self.tenant.id,
            "resources": {
                n: {
                    "kind": r.kind,
                    "endpoint": str(r.endpoint),
                    "server_type": r.server_type.value if r.server_type else None,
                    "status": r.status.value,
                }
                for n, r in self.resources.items()
            },
        }
