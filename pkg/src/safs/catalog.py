"""Test case DB: software relations, connection patterns and test cases.

Three JSON array files live in a catalog directory:

* ``software.json``  -- function group / software group / software rows
* ``patterns.json``  -- connection pattern name + deployment config
* ``testcases.json`` -- test cases attached to one tier of the taxonomy

The bundled defaults reproduce the reference tables (12 software rows, four
Web 3-tier deployment configs, four test cases).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from safs.errors import SafsError

SOFTWARE_FILE = "software.json"
PATTERNS_FILE = "patterns.json"
TESTCASES_FILE = "testcases.json"

DeploymentConfigSet = frozenset[frozenset[str]]


class CatalogError(SafsError):
    pass


class CatalogIOError(CatalogError):
    pass


class CatalogFormatError(CatalogError):
    pass


class ReferentialError(CatalogError):
    pass


class Tier(str, Enum):
    FUNCTION_GROUP = "function_group"
    SOFTWARE_GROUP = "software_group"
    SOFTWARE = "software"
    CONNECTION_PATTERN = "connection_pattern"


class Subject(str, Enum):
    FUNCTION = "function"
    DATA = "data"
    PERFORMANCE = "performance"


class Provenance(str, Enum):
    EXACT = "exact"
    PREFIX = "prefix"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SoftwareEntry:
    function_group: str
    software_group: str
    software: str


@dataclass(frozen=True)
class ConnectionPatternDef:
    pattern: str
    deployment_config: DeploymentConfigSet


@dataclass(frozen=True)
class TestCaseEntry:
    __test__ = False  # keep pytest from collecting this

    name: str
    tier: Tier
    tier_key: str
    subject: Subject

    def to_dict(self) -> dict[str, str]:
        return {
            "name": self.name,
            "tier": self.tier.value,
            "tier_key": self.tier_key,
            "subject": self.subject.value,
        }


@dataclass(frozen=True)
class Resolution:
    """Outcome of looking a software name up in the catalog."""

    software: str
    software_group: str | None
    function_group: str | None
    provenance: Provenance

    @property
    def known(self) -> bool:
        return self.provenance is not Provenance.UNKNOWN


def freeze_config(groups: Iterable[Iterable[str]]) -> DeploymentConfigSet:
    return frozenset(frozenset(g) for g in groups)


def format_config(dc: DeploymentConfigSet) -> str:
    """Render like ``{AP, Web}{DB}``; sorted so the text is stable."""
    inner = sorted("{" + ", ".join(sorted(g)) + "}" for g in dc)
    return "".join(inner)


@dataclass(frozen=True)
class Catalog:
    software: tuple[SoftwareEntry, ...] = ()
    patterns: tuple[ConnectionPatternDef, ...] = ()
    tests: tuple[TestCaseEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "software", tuple(self.software))
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "tests", tuple(self.tests))
        self._check()

    def _check(self) -> None:
        seen: dict[str, SoftwareEntry] = {}
        group_owner: dict[str, str] = {}
        for e in self.software:
            if e.software in seen:
                raise ReferentialError(f"duplicate software {e.software!r}")
            seen[e.software] = e
            owner = group_owner.setdefault(e.software_group, e.function_group)
            if owner != e.function_group:
                raise ReferentialError(
                    f"software group {e.software_group!r} belongs to both "
                    f"{owner!r} and {e.function_group!r}"
                )
        pairs = set()
        for p in self.patterns:
            if not p.deployment_config or not all(p.deployment_config):
                raise ReferentialError(f"pattern {p.pattern!r} has an empty deployment config")
            key = (p.pattern, p.deployment_config)
            if key in pairs:
                raise ReferentialError(
                    f"duplicate config {format_config(p.deployment_config)} for {p.pattern!r}"
                )
            pairs.add(key)
        keys = {
            Tier.FUNCTION_GROUP: self.function_groups,
            Tier.SOFTWARE_GROUP: set(group_owner),
            Tier.SOFTWARE: set(seen),
            Tier.CONNECTION_PATTERN: self.pattern_names,
        }
        for t in self.tests:
            if t.tier_key not in keys[t.tier]:
                raise ReferentialError(
                    f"test {t.name!r} references unknown {t.tier.value} {t.tier_key!r}"
                )

    @property
    def function_groups(self) -> set[str]:
        return {e.function_group for e in self.software}

    @property
    def pattern_names(self) -> set[str]:
        return {p.pattern for p in self.patterns}


# -- loading ---------------------------------------------------------------


def default_catalog_dir() -> Path:
    return Path(str(resources.files("safs") / "data" / "catalog"))


def _read_array(path: Path) -> list[Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogIOError(f"cannot read {path}: {exc}") from None
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogFormatError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, list) or not all(isinstance(row, dict) for row in data):
        raise CatalogFormatError(f"{path}: expected a JSON array of objects")
    return data


def _fields(row: dict, path: Path, names: tuple[str, ...]) -> tuple:
    if set(row) != set(names):
        raise CatalogFormatError(f"{path}: row {row!r} must have exactly fields {list(names)}")
    return tuple(row[n] for n in names)


def _software(rows: list[dict], path: Path) -> list[SoftwareEntry]:
    out = []
    for row in rows:
        vals = _fields(row, path, ("function_group", "software_group", "software"))
        if not all(isinstance(v, str) and v for v in vals):
            raise CatalogFormatError(f"{path}: fields must be nonempty strings in {row!r}")
        out.append(SoftwareEntry(*vals))
    return out


def _patterns(rows: list[dict], path: Path) -> list[ConnectionPatternDef]:
    out = []
    for row in rows:
        name, dc = _fields(row, path, ("pattern", "deployment_config"))
        if not isinstance(name, str) or not isinstance(dc, list):
            raise CatalogFormatError(f"{path}: bad pattern row {row!r}")
        if not all(isinstance(g, list) and all(isinstance(x, str) for x in g) for g in dc):
            raise CatalogFormatError(f"{path}: deployment_config must be a list of string lists")
        out.append(ConnectionPatternDef(name, freeze_config(dc)))
    return out


def _tests(rows: list[dict], path: Path) -> list[TestCaseEntry]:
    out = []
    for row in rows:
        name, tier, key, subject = _fields(row, path, ("name", "tier", "tier_key", "subject"))
        try:
            out.append(TestCaseEntry(name, Tier(tier), key, Subject(subject)))
        except ValueError as exc:
            raise CatalogFormatError(f"{path}: {exc}") from None
    return out


def load_catalog(
    catalog_dir: str | os.PathLike | None = None,
    *,
    software: str | os.PathLike | None = None,
    patterns: str | os.PathLike | None = None,
    testcases: str | os.PathLike | None = None,
) -> Catalog:
    """Load a catalog from a directory; individual files may be overridden.

    With no arguments the bundled default catalog is loaded.
    """
    base = Path(catalog_dir) if catalog_dir is not None else default_catalog_dir()
    sw_path = Path(software) if software else base / SOFTWARE_FILE
    pat_path = Path(patterns) if patterns else base / PATTERNS_FILE
    tc_path = Path(testcases) if testcases else base / TESTCASES_FILE
    return Catalog(
        software=_software(_read_array(sw_path), sw_path),
        patterns=_patterns(_read_array(pat_path), pat_path),
        tests=_tests(_read_array(tc_path), tc_path),
    )


# -- lookups ---------------------------------------------------------------


def resolve_software(c: Catalog, name: str) -> Resolution:
    """Exact match, else the software group named by the first word of ``name``."""
    for e in c.software:
        if e.software == name:
            return Resolution(name, e.software_group, e.function_group, Provenance.EXACT)
    head = name.split()[0] if name.split() else ""
    for e in c.software:
        if e.software_group == head:
            return Resolution(name, e.software_group, e.function_group, Provenance.PREFIX)
    return Resolution(name, None, None, Provenance.UNKNOWN)


def match_patterns(c: Catalog, dc: Iterable[Iterable[str]]) -> list[str]:
    target = freeze_config(dc)
    return sorted({p.pattern for p in c.patterns if p.deployment_config == target})


def tests_for_tier(c: Catalog, tier: Tier | str, key: str) -> list[TestCaseEntry]:
    tier = Tier(tier)
    return [t for t in c.tests if t.tier is tier and t.tier_key == key]
