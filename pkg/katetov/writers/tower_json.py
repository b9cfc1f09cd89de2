"""JSON writers for towers, K-objects and run reports.

Output is deterministic: keys sorted, elements in structure order, so the same
run writes byte-identical files.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping

from ..engines.kobject import KObjectResult
from ..engines.tower import TowerHandle
from ..parsers.json_format import FORMAT_VERSION, descriptor_to_json, encode_element, structure_to_json

logger = logging.getLogger(__name__)


def dumps(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def write_json(output_path: Path, data: Any) -> bool:
    """Write ``data`` as JSON.

    Returns:
        True if successful, False otherwise
    """
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(dumps(data), encoding="utf-8")
    except OSError as exc:
        logger.error("cannot write %s: %s", output_path, exc)
        return False
    return True


def k_object_to_json(k_result: KObjectResult) -> Dict[str, Any]:
    return {
        "base": structure_to_json(k_result.base),
        "structure": structure_to_json(k_result.structure),
        "eta": [encode_element(v) for v in k_result.eta.images],
        "descriptors": [descriptor_to_json(d, k_result.base) for d in k_result.descriptors],
    }


def tower_to_json(t: TowerHandle, depth: int, *, include_levels: bool = True) -> Dict[str, Any]:
    """Seed, depth and level sizes; with ``include_levels`` also every level and its descriptors."""
    t.expand(depth)
    out: Dict[str, Any] = {
        "format": FORMAT_VERSION,
        "class": t.tag.kind.value,
        "params": t.tag.params(),
        "seed": structure_to_json(t.seed),
        "depth": depth,
        "sizes": t.sizes()[: depth + 1],
    }
    if include_levels:
        levels = []
        for n in range(1, depth + 1):
            step = t.step(n - 1)
            levels.append({
                "level": n,
                "structure": structure_to_json(step.structure),
                "descriptors": [descriptor_to_json(d, step.base) for d in step.descriptors],
            })
        out["levels"] = levels
    return out


def write_tower_json(output_path: Path, t: TowerHandle, depth: int, *, include_levels: bool = True) -> bool:
    return write_json(output_path, tower_to_json(t, depth, include_levels=include_levels))


def write_report(output_path: Path, command: str, exit_code: int, payload: Mapping[str, Any]) -> bool:
    """The machine-readable sidecar of a CLI run."""
    report = {"format": FORMAT_VERSION, "command": command, "exit_code": exit_code, **payload}
    return write_json(output_path, report)
