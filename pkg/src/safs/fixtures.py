"""Access to the bundled example inputs."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

FIXTURES = ("web3",)


def fixture_dir(name: str = "web3") -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {list(FIXTURES)}")
    return Path(str(resources.files("safs") / "data" / "fixtures" / name))


def fixture_paths(name: str = "web3") -> dict[str, Path]:
    d = fixture_dir(name)
    return {
        "template": d / "template.json",
        "requirements": d / "requirements.json",
        "manifests": d / "manifests.json",
    }
