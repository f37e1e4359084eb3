"""Relative server performance by type and number of co-located instances.

A ratio ``r(type, n)`` is the per-instance performance of one of ``n`` servers
sharing a physical host, relative to a dedicated baremetal host. Only the
single-instance ratios (container 0.75, vm 0.60) are measured values; the
curves for n = 2..4 are overridable defaults chosen so that degradation is
monotone but not inverse-proportional (``n * r(n) >= r(1)``).

Config file format::

    {"baseline_index": 1000.0,
     "ratios": {"container": [0.75, 0.42, 0.29, 0.22], "vm": [0.60, 0.33, 0.23, 0.17]}}
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

from safs.errors import SafsError
from safs.kinds import ServerType

DEFAULT_BASELINE_INDEX = 1000.0
DEFAULT_RATIOS: Mapping[ServerType, tuple[float, ...]] = MappingProxyType(
    {
        ServerType.BAREMETAL: (1.0,),
        ServerType.CONTAINER: (0.75, 0.42, 0.29, 0.22),
        ServerType.VM: (0.60, 0.33, 0.23, 0.17),
    }
)


class InvalidModel(SafsError):
    pass


class UnsupportedColocation(SafsError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


def check_curve(curve: tuple[float, ...]) -> str | None:
    """Return why ``curve`` is not an admissible ratio curve, or None."""
    if not curve:
        return "curve is empty"
    for i, r in enumerate(curve, start=1):
        if not isinstance(r, (int, float)) or isinstance(r, bool) or not 0.0 < r <= 1.0:
            return f"ratio at n={i} is {r!r}, must be in (0, 1]"
    for i in range(1, len(curve)):
        if not curve[i] < curve[i - 1]:
            return f"ratio not strictly decreasing at n={i + 1}"
    for i, r in enumerate(curve, start=1):
        if i * r < curve[0]:
            return f"aggregate {i}*{r} below single-instance ratio {curve[0]}"
    return None


@dataclass(frozen=True)
class PerformanceModel:
    baseline_index: float = DEFAULT_BASELINE_INDEX
    ratios: Mapping[ServerType, tuple[float, ...]] = field(
        default_factory=lambda: dict(DEFAULT_RATIOS)
    )

    def __post_init__(self):
        b = self.baseline_index
        if isinstance(b, bool) or not isinstance(b, (int, float)) or not b > 0:
            raise InvalidModel(f"baseline_index must be positive, got {b!r}")
        ratios = {ServerType(k): tuple(v) for k, v in self.ratios.items()}
        missing = set(ServerType) - set(ratios)
        if missing:
            raise InvalidModel(f"no ratios for {sorted(t.value for t in missing)}")
        if ratios[ServerType.BAREMETAL] != (1.0,):
            raise InvalidModel("baremetal ratio must be exactly [1.0] (single instance only)")
        for t, curve in ratios.items():
            problem = check_curve(curve)
            if problem:
                raise InvalidModel(f"{t.value}: {problem}")
        object.__setattr__(self, "baseline_index", float(b))
        object.__setattr__(self, "ratios", MappingProxyType(ratios))

    def __hash__(self):
        return hash((self.baseline_index, tuple(sorted(self.ratios.items()))))

    def __eq__(self, other):
        if not isinstance(other, PerformanceModel):
            return NotImplemented
        return (self.baseline_index, dict(self.ratios)) == (other.baseline_index, dict(other.ratios))

    def lookup(self, server_type: ServerType | str, n: int = 1) -> tuple[float, str | None]:
        """Per-instance ratio plus a warning message when it was extrapolated."""
        server_type = ServerType(server_type)
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ValueError(f"instance count must be an integer >= 1, got {n!r}")
        if server_type is ServerType.BAREMETAL and n > 1:
            raise UnsupportedColocation("baremetal servers cannot be co-located")
        curve = self.ratios[server_type]
        if n <= len(curve):
            return curve[n - 1], None
        top = len(curve)
        value = curve[-1] * top / n
        return value, (
            f"{server_type.value} ratio for {n} co-located instances extrapolated "
            f"from n={top} by equal division"
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "baseline_index": self.baseline_index,
            "ratios": {t.value: list(c) for t, c in sorted(self.ratios.items())},
        }


def load_model(source: str | os.PathLike | Mapping[str, Any] | None = None) -> PerformanceModel:
    """Build a model from defaults, a config mapping, or a JSON config file.

    Unspecified types keep their default curves.
    """
    if source is None:
        return PerformanceModel()
    if isinstance(source, Mapping):
        cfg = source
    else:
        try:
            cfg = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidModel(f"cannot load model config {source}: {exc}") from None
    if not isinstance(cfg, Mapping):
        raise InvalidModel("model config must be an object")
    extra = set(cfg) - {"baseline_index", "ratios"}
    if extra:
        raise InvalidModel(f"unsupported model config fields {sorted(extra)}")
    ratios = dict(DEFAULT_RATIOS)
    given = cfg.get("ratios", {})
    if not isinstance(given, Mapping):
        raise InvalidModel("ratios must be an object")
    for key, curve in given.items():
        try:
            t = ServerType(key)
        except ValueError:
            raise InvalidModel(f"unknown server type {key!r}") from None
        if not isinstance(curve, (list, tuple)):
            raise InvalidModel(f"ratios for {key} must be a list")
        ratios[t] = tuple(curve)
    return PerformanceModel(cfg.get("baseline_index", DEFAULT_BASELINE_INDEX), ratios)


def relative_performance(m: PerformanceModel, server_type: ServerType | str, n: int = 1) -> float:
    value, warning = m.lookup(server_type, n)
    if warning:
        warnings.warn(warning, ExtrapolationWarning, stacklevel=2)
    return value


def capacity_index(m: PerformanceModel, server_type: ServerType | str, n: int = 1) -> float:
    value, warning = m.lookup(server_type, n)
    if warning:
        warnings.warn(warning, ExtrapolationWarning, stacklevel=2)
    return m.baseline_index * value
