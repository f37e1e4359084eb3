"""Infrastructure templates: parse, validate, emit, and derive the topology.

The document format is a small Heat-inspired JSON schema::

    {"version": 1,
     "resources": {
        "web": {"kind": "server", "image": "lamp-img", "software": [...], "flavor": "vm.small"},
        "lb":  {"kind": "loadbalancer", "members": ["web"]}},
     "links": [["web", "db"]]}

``flavor`` is only allowed in concrete templates; ``software``, when present,
overrides whatever the image manifest says is installed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Mapping

import networkx as nx

from safs.errors import SafsError
from safs.kinds import SIZES, ServerType

SERVER = "server"
LOADBALANCER = "loadbalancer"
KINDS = (SERVER, LOADBALANCER)

FLAVOR_RE = re.compile(
    r"^(?P<type>{})\.(?P<size>{})$".format(
        "|".join(t.value for t in ServerType), "|".join(SIZES)
    )
)

_SERVER_FIELDS = {"kind", "image", "software", "flavor"}
_LB_FIELDS = {"kind", "members"}


class TemplateError(SafsError):
    pass


class TemplateSyntaxError(TemplateError):
    """The document is not JSON or not shaped like a template at all."""


class SchemaError(TemplateError):
    def __init__(self, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class InvalidTemplate(TemplateError):
    pass


class MissingAssignment(TemplateError):
    pass


class UnknownServer(TemplateError):
    pass


class BadFlavor(TemplateError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    resource: str
    rule: str
    message: str = ""

    def __str__(self) -> str:
        return f"{self.resource}: {self.rule}" + (f" ({self.message})" if self.message else "")


@dataclass(frozen=True)
class Resource:
    kind: str
    image: str | None = None
    software_override: tuple[str, ...] | None = None
    members: tuple[str, ...] = ()
    flavor: str | None = None

    @property
    def is_server(self) -> bool:
        return self.kind == SERVER

    @property
    def server_type(self) -> ServerType | None:
        m = FLAVOR_RE.match(self.flavor or "")
        return ServerType(m.group("type")) if m else None


@dataclass(frozen=True)
class AbstractTemplate:
    version: int = 1
    resources: Mapping[str, Resource] = field(default_factory=dict)
    links: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "resources", MappingProxyType(dict(self.resources)))
        object.__setattr__(self, "links", tuple(tuple(link) for link in self.links))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (self.version, dict(self.resources), self.links) == (
            other.version,
            dict(other.resources),
            other.links,
        )

    def __hash__(self):
        return hash((self.version, tuple(sorted(self.resources.items())), self.links))

    @property
    def servers(self) -> list[str]:
        return sorted(n for n, r in self.resources.items() if r.is_server)

    @property
    def loadbalancers(self) -> list[str]:
        return sorted(n for n, r in self.resources.items() if r.kind == LOADBALANCER)

    def strip_flavors(self) -> AbstractTemplate:
        return AbstractTemplate(
            self.version,
            {n: replace(r, flavor=None) for n, r in self.resources.items()},
            self.links,
        )


class ConcreteTemplate(AbstractTemplate):
    """An abstract template whose servers all carry a flavor."""

    def flavors(self) -> dict[str, str]:
        return {n: self.resources[n].flavor for n in self.servers}


@dataclass(frozen=True)
class TopologyGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    lb_groups: Mapping[str, tuple[str, ...]]

    def neighbors(self, node: str) -> list[str]:
        out = set()
        for a, b in self.edges:
            if a == node:
                out.add(b)
            elif b == node:
                out.add(a)
        return sorted(out)

    def balancers_of(self, server: str) -> list[str]:
        return sorted(lb for lb, members in self.lb_groups.items() if server in members)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def components(self) -> list[list[str]]:
        return sorted(sorted(c) for c in nx.connected_components(self.to_networkx()))


# -- parsing ---------------------------------------------------------------


def _load_json(text: str | bytes) -> Any:
    try:
        return json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TemplateSyntaxError(f"template is not valid JSON: {exc}") from None


def _str_list(value: Any, what: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"{what} must be a list of strings")
    return tuple(value)


def _parse_resource(name: str, body: Any) -> Resource:
    if not isinstance(body, dict):
        raise SchemaError(f"resource {name!r} must be an object")
    kind = body.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"resource {name!r} has unknown kind {kind!r}")
    allowed = _SERVER_FIELDS if kind == SERVER else _LB_FIELDS
    extra = sorted(set(body) - allowed)
    if extra:
        raise SchemaError(f"resource {name!r} has unsupported fields {extra}")
    if kind == LOADBALANCER:
        return Resource(kind, members=_str_list(body.get("members", []), f"{name}.members"))
    image = body.get("image")
    if image is not None and not isinstance(image, str):
        raise SchemaError(f"{name}.image must be a string")
    software = body.get("software")
    if software is not None:
        software = _str_list(software, f"{name}.software")
    flavor = body.get("flavor")
    if flavor is not None and not isinstance(flavor, str):
        raise SchemaError(f"{name}.flavor must be a string")
    return Resource(kind, image=image, software_override=software, flavor=flavor)


def _parse_structure(text: str | bytes, cls: type[AbstractTemplate]) -> AbstractTemplate:
    doc = _load_json(text)
    if not isinstance(doc, dict):
        raise TemplateSyntaxError("template document must be a JSON object")
    extra = sorted(set(doc) - {"version", "resources", "links"})
    if extra:
        raise SchemaError(f"unsupported top-level fields {extra}")
    version = doc.get("version", 1)
    if not isinstance(version, int) or isinstance(version, bool):
        raise SchemaError("version must be an integer")
    resources = doc.get("resources", {})
    if not isinstance(resources, dict):
        raise SchemaError("resources must be an object")
    links = doc.get("links", [])
    if not isinstance(links, list) or not all(
        isinstance(link, list) and len(link) == 2 and all(isinstance(e, str) for e in link)
        for link in links
    ):
        raise SchemaError("links must be a list of [name, name] pairs")
    parsed = {name: _parse_resource(name, body) for name, body in resources.items()}
    return cls(version, parsed, tuple(tuple(link) for link in links))


def _raise_on(diags: list[Diagnostic]) -> None:
    if diags:
        raise SchemaError("; ".join(map(str, diags)), diags)


def parse_abstract(text: str | bytes) -> AbstractTemplate:
    """Parse an abstract template document; flavors are rejected."""
    t = _parse_structure(text, AbstractTemplate)
    _raise_on(validate_template(t))
    return t


def parse_concrete(text: str | bytes) -> ConcreteTemplate:
    t = _parse_structure(text, ConcreteTemplate)
    _raise_on(validate_template(t))
    return t


def validate_template(t: AbstractTemplate) -> list[Diagnostic]:
    """Check structural invariants; concreteness is decided by the type of ``t``.

    Returns one :class:`Diagnostic` per violation, empty when valid.
    """
    concrete = isinstance(t, ConcreteTemplate)
    diags: list[Diagnostic] = []
    res = t.resources
    for name in sorted(res):
        r = res[name]
        if not name or not name.strip():
            diags.append(Diagnostic(name, "empty-name"))
        if r.kind not in KINDS:
            diags.append(Diagnostic(name, "unknown-kind", str(r.kind)))
            continue
        if r.is_server:
            if not r.image:
                diags.append(Diagnostic(name, "missing-image"))
            if r.members:
                diags.append(Diagnostic(name, "server-with-members"))
            if concrete:
                if r.flavor is None:
                    diags.append(Diagnostic(name, "missing-flavor"))
                elif not FLAVOR_RE.match(r.flavor):
                    diags.append(Diagnostic(name, "bad-flavor", r.flavor))
            elif r.flavor is not None:
                diags.append(Diagnostic(name, "flavor-in-abstract", r.flavor))
        else:
            if r.image or r.flavor or r.software_override is not None:
                diags.append(Diagnostic(name, "loadbalancer-server-fields"))
            for member in r.members:
                if member not in res:
                    diags.append(Diagnostic(member, "lb-member-unknown", f"member of {name}"))
                elif not res[member].is_server:
                    diags.append(Diagnostic(member, "lb-member-not-server", f"member of {name}"))
    for a, b in t.links:
        for end in (a, b):
            if end not in res:
                diags.append(Diagnostic(end, "dangling-link", f"{a} <-> {b}"))
        if a == b:
            diags.append(Diagnostic(a, "self-link"))
    return diags


def build_topology(t: AbstractTemplate) -> TopologyGraph:
    diags = validate_template(t)
    if diags:
        raise InvalidTemplate("; ".join(map(str, diags)))
    edges = {tuple(sorted(link)) for link in t.links}
    lb_groups = {}
    for lb in t.loadbalancers:
        members = tuple(sorted(set(t.resources[lb].members)))
        lb_groups[lb] = members
        edges.update(tuple(sorted((lb, m))) for m in members)
    return TopologyGraph(
        nodes=tuple(sorted(t.resources)),
        edges=frozenset(edges),
        lb_groups=MappingProxyType(lb_groups),
    )


# -- emission --------------------------------------------------------------


def _resource_doc(r: Resource) -> dict[str, Any]:
    if r.kind == LOADBALANCER:
        return {"kind": r.kind, "members": list(r.members)}
    doc: dict[str, Any] = {"kind": r.kind, "image": r.image}
    if r.software_override is not None:
        doc["software"] = list(r.software_override)
    if r.flavor is not None:
        doc["flavor"] = r.flavor
    return doc


def dump_template(t: AbstractTemplate) -> str:
    """Serialize deterministically: sorted keys, two-space indent, trailing newline."""
    doc = {
        "version": t.version,
        "resources": {n: _resource_doc(r) for n, r in t.resources.items()},
        "links": [list(link) for link in t.links],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def concretize(t: AbstractTemplate, assignments: Mapping[str, str]) -> ConcreteTemplate:
    servers = set(t.servers)
    unknown = sorted(set(assignments) - servers)
    if unknown:
        raise UnknownServer(f"flavor assigned to non-server or unknown resource(s): {unknown}")
    missing = sorted(servers - set(assignments))
    if missing:
        raise MissingAssignment(f"no flavor assigned to server(s): {missing}")
    bad = sorted(n for n, f in assignments.items() if not FLAVOR_RE.match(f))
    if bad:
        raise BadFlavor(
            "flavor must look like <type>.<size>: "
            + ", ".join(f"{n}={assignments[n]!r}" for n in bad)
        )
    resources = {
        n: replace(r, flavor=assignments[n]) if r.is_server else r
        for n, r in t.resources.items()
    }
    return ConcreteTemplate(t.version, resources, t.links)


def emit_concrete(t: AbstractTemplate, assignments: Mapping[str, str]) -> str:
    return dump_template(concretize(t, assignments))
