"""Enumerations shared across the pipeline."""

from __future__ import annotations

from enum import Enum


class ServerType(str, Enum):
    BAREMETAL = "baremetal"
    CONTAINER = "container"
    VM = "vm"


# Cheapest first.
PRICE_ORDER: tuple[ServerType, ...] = (ServerType.CONTAINER, ServerType.VM, ServerType.BAREMETAL)


class OsKind(str, Enum):
    NORMAL_LINUX = "normal_linux"
    CUSTOM_LINUX = "custom_linux"
    NON_LINUX = "non_linux"


class Consistency(str, Enum):
    STRONG = "strong"
    EVENTUAL = "eventual"


SIZES: tuple[str, ...] = ("small", "medium", "large")
