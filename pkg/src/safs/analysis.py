"""Installed-software analysis and deployment-config inference.

Image manifests stand in for inspecting a deployed volume: each one names an
image, its OS kind and the software found on it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from safs.catalog import (
    Catalog,
    DeploymentConfigSet,
    Provenance,
    Resolution,
    format_config,
    resolve_software,
)
from safs.errors import SafsError
from safs.kinds import OsKind
from safs.template import AbstractTemplate, TopologyGraph

OS_FUNCTION_GROUP = "OS"


class AnalysisError(SafsError):
    pass


class MissingManifest(AnalysisError):
    pass


class ManifestFormatError(AnalysisError):
    pass


@dataclass(frozen=True)
class ImageManifest:
    image: str
    os_kind: OsKind
    software: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ImageManifest:
        try:
            image = d["image"]
            os_kind = OsKind(d["os_kind"])
        except (KeyError, ValueError) as exc:
            raise ManifestFormatError(f"bad manifest {dict(d)!r}: {exc}") from None
        software = d.get("software", [])
        if not isinstance(image, str) or not image:
            raise ManifestFormatError("manifest image must be a nonempty string")
        if not isinstance(software, list) or not all(isinstance(s, str) for s in software):
            raise ManifestFormatError(f"manifest {image}: software must be a list of strings")
        return cls(image, os_kind, tuple(software))


@dataclass(frozen=True)
class InstalledProfile:
    server: str
    os_kind: OsKind | None
    software: tuple[str, ...]
    resolved: tuple[Resolution, ...]

    @property
    def function_groups(self) -> frozenset[str]:
        """Non-OS function groups present on this server."""
        return frozenset(
            r.function_group
            for r in self.resolved
            if r.known and r.function_group != OS_FUNCTION_GROUP
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "server": self.server,
            "os_kind": self.os_kind.value if self.os_kind else None,
            "software": list(self.software),
            "resolved": [
                {
                    "software": r.software,
                    "software_group": r.software_group,
                    "function_group": r.function_group,
                    "provenance": r.provenance.value,
                }
                for r in self.resolved
            ],
        }


@dataclass(frozen=True)
class DeploymentConfig:
    groups: DeploymentConfigSet

    def __str__(self) -> str:
        return format_config(self.groups)

    def to_list(self) -> list[list[str]]:
        return sorted(sorted(g) for g in self.groups)


def index_manifests(manifests: Iterable[ImageManifest]) -> dict[str, ImageManifest]:
    out: dict[str, ImageManifest] = {}
    for m in manifests:
        if m.image in out:
            raise ManifestFormatError(f"duplicate manifest for image {m.image!r}")
        out[m.image] = m
    return out


def parse_manifests(text: str) -> dict[str, ImageManifest]:
    try:
        rows = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestFormatError(f"manifests are not valid JSON: {exc}") from None
    if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
        raise ManifestFormatError("manifests must be a JSON array of objects")
    return index_manifests(ImageManifest.from_dict(r) for r in rows)


def load_manifests(path: str | os.PathLike) -> dict[str, ImageManifest]:
    return parse_manifests(Path(path).read_text(encoding="utf-8"))


def analyze_images(
    t: AbstractTemplate,
    manifests: Mapping[str, ImageManifest] | Iterable[ImageManifest],
    catalog: Catalog,
) -> list[InstalledProfile]:
    """One profile per server, in server-name order.

    A template ``software`` override replaces the manifest's list; the OS kind
    still comes from the manifest when the image is known, else it stays None
    and must be supplied by the server's requirements.
    """
    if not isinstance(manifests, Mapping):
        manifests = index_manifests(manifests)
    profiles = []
    for name in t.servers:
        res = t.resources[name]
        manifest = manifests.get(res.image)
        if res.software_override is not None:
            software = res.software_override
        elif manifest is not None:
            software = manifest.software
        else:
            raise MissingManifest(
                f"server {name!r}: no manifest for image {res.image!r} and no software override"
            )
        profiles.append(
            InstalledProfile(
                server=name,
                os_kind=manifest.os_kind if manifest else None,
                software=tuple(software),
                resolved=tuple(resolve_software(catalog, s) for s in software),
            )
        )
    return profiles


def infer_deployment_config(
    g: TopologyGraph, profiles: Iterable[InstalledProfile]
) -> DeploymentConfig:
    by_server = {p.server: p for p in profiles}
    servers = [n for n in g.nodes if n not in g.lb_groups]
    missing = [s for s in servers if s not in by_server]
    if missing:
        raise ValueError(f"no installed profile for server(s) {missing}")
    groups = {by_server[s].function_groups for s in servers}
    return DeploymentConfig(frozenset(grp for grp in groups if grp))


def prefix_resolutions(profiles: Iterable[InstalledProfile]) -> list[tuple[str, Resolution]]:
    return [
        (p.server, r) for p in profiles for r in p.resolved if r.provenance is Provenance.PREFIX
    ]
