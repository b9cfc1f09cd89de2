"""Graphviz DOT export of finite structures and tower levels."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional

import networkx as nx

from ..engines.structures import FiniteStructure, to_networkx
from ..engines.tower import TowerHandle

logger = logging.getLogger(__name__)


def _quote(x: object) -> str:
    return '"' + str(x).replace("\\", "\\\\").replace('"', '\\"') + '"'


def structure_to_dot(s: FiniteStructure, *, name: str = "S", fresh: Optional[set] = None) -> str:
    """DOT text for ``s``.

    Graphs are undirected, digraphs and tournaments directed, orders are drawn
    as Hasse diagrams, metric spaces as complete graphs labelled with distances
    and Boolean algebras as their atoms. Elements in ``fresh`` are drawn filled.
    """
    tag = s.tag
    fresh = fresh or set()
    undirected = tag.is_graph_like or tag.is_metric or tag.is_boolean
    lines: List[str] = [f"{'graph' if undirected else 'digraph'} {_quote(name)} {{"]
    lines.append(f"  label={_quote(str(tag))};")
    for x in s.elements:
        style = " [style=filled]" if x in fresh else ""
        lines.append(f"  {_quote(x)}{style};")
    if tag.is_graph_like:
        for u, v in sorted(tuple(sorted(e, key=s.index_of)) for e in s.relation):
            lines.append(f"  {_quote(u)} -- {_quote(v)};")
    elif tag.is_directed:
        for u, v in sorted(s.relation, key=lambda p: (s.index_of(p[0]), s.index_of(p[1]))):
            lines.append(f"  {_quote(u)} -> {_quote(v)};")
    elif tag.is_order:
        hasse = nx.transitive_reduction(to_networkx(s))
        for u, v in sorted(hasse.edges, key=lambda p: (s.index_of(p[0]), s.index_of(p[1]))):
            lines.append(f"  {_quote(u)} -> {_quote(v)};")
    elif tag.is_metric:
        for i, u in enumerate(s.elements):
            for j in range(i + 1, s.size):
                lines.append(f"  {_quote(u)} -- {_quote(s.elements[j])} [label={_quote(s.distances[i][j])}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def tower_level_to_dot(t: TowerHandle, level: int) -> str:
    """One level, with the elements first appearing there filled."""
    lvl = t.level(level)
    fresh = set() if t.tag.is_boolean else set(t.fresh_elements(level))
    return structure_to_dot(lvl, name=f"level {level}", fresh=fresh)


def write_dot(output_path: Path, text: str) -> bool:
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        output_path.write_text(text, encoding="utf-8")
    except OSError as exc:
        logger.error("cannot write %s: %s", output_path, exc)
        return False
    return True
