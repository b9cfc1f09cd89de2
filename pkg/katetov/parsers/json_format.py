"""JSON loaders for structures, towers, partial maps, endomorphism lists and descriptors.

Element ids are JSON integers, strings or nested lists (read back as tuples).
Metric distances are written as ``"p/q"`` strings so they stay exact.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from ..errors import ContractError, FormatError
from ..engines.kobject import KElement, New, Old
from ..engines.limits import PartialMap
from ..engines.metric import KatetovFunction, katetov_function
from ..engines.structures import (
    ClassKind,
    ClassTag,
    FiniteStructure,
    Morphism,
    MorphismKind,
    boolean_algebra,
    check_morphism,
    digraph,
    graph,
    linear_order,
    metric_space,
    poset,
    tournament,
    validate,
)
from ..engines.tower import TowerAddress, TowerHandle

FORMAT_VERSION = 1

JsonPath = Union[str, Path]


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

def decode_element(raw: Any) -> Any:
    """JSON value -> element id; lists become tuples."""
    if isinstance(raw, bool) or raw is None or isinstance(raw, (float, dict)):
        raise FormatError(f"element ids are integers, strings or lists, got {raw!r}")
    if isinstance(raw, list):
        return tuple(decode_element(v) for v in raw)
    return raw


def encode_element(x: Any) -> Any:
    if isinstance(x, tuple):
        return [encode_element(v) for v in x]
    return x


def decode_distance(raw: Any) -> Fraction:
    if isinstance(raw, bool) or not isinstance(raw, (int, str)):
        raise FormatError(f"distances are integers or 'p/q' strings, got {raw!r}")
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"bad distance {raw!r}: {exc}") from exc


def encode_distance(d: Fraction) -> str:
    return str(d)


def read_json(path: JsonPath) -> Any:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc


def _require(data: Mapping[str, Any], key: str, what: str) -> Any:
    if not isinstance(data, Mapping):
        raise FormatError(f"{what} must be a JSON object")
    if key not in data:
        raise FormatError(f"{what} is missing {key!r}")
    return data[key]


# ---------------------------------------------------------------------------
# Structures
# ---------------------------------------------------------------------------

def tag_from_json(data: Mapping[str, Any]) -> ClassTag:
    name = _require(data, "class", "structure")
    try:
        if name == ClassKind.KN_FREE.value:
            return ClassTag.kn_free(_require(data, "n", "kn-free structure"))
        if name == ClassKind.METRIC.value:
            return ClassTag.metric(_require(data, "q", "metric structure"))
        return ClassTag.parse(name)
    except ContractError as exc:
        raise FormatError(str(exc)) from exc


def structure_from_json(data: Mapping[str, Any]) -> FiniteStructure:
    """Build and validate a structure; any violated axiom is a FormatError."""
    tag = tag_from_json(data)
    kind = tag.kind
    try:
        if tag.is_boolean:
            s = boolean_algebra(decode_element(a) for a in _require(data, "atoms", "Boolean algebra"))
        else:
            elems = [decode_element(x) for x in data.get("elements", [])]
            if tag.is_graph_like:
                edges = [[decode_element(v) for v in e] for e in data.get("edges", [])]
                s = graph(elems, edges, n=tag.n if kind is ClassKind.KN_FREE else None)
            elif kind is ClassKind.DIGRAPH:
                s = digraph(elems, [tuple(decode_element(v) for v in a) for a in data.get("arcs", [])])
            elif kind is ClassKind.TOURNAMENT:
                s = tournament(elems, [tuple(decode_element(v) for v in a) for a in data.get("arcs", [])])
            elif kind is ClassKind.POSET:
                s = poset(elems, [tuple(decode_element(v) for v in p) for p in data.get("order", [])])
            elif kind is ClassKind.LINEAR_ORDER:
                s = linear_order(elems)
            else:
                rows = [[decode_distance(v) for v in row] for row in data.get("distances", [])]
                s = metric_space(elems, rows, tag.q)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"malformed {tag} structure: {exc}") from exc
    report = validate(s)
    if not report:
        raise FormatError(f"not a valid {tag} structure: {report.first_error}")
    return s


def structure_to_json(s: FiniteStructure) -> Dict[str, Any]:
    tag = s.tag
    out: Dict[str, Any] = {"class": tag.kind.value, **tag.params()}
    if tag.is_boolean:
        out["atoms"] = [encode_element(a) for a in s.elements]
        return out
    out["elements"] = [encode_element(x) for x in s.elements]
    pos = s.position
    if tag.is_graph_like:
        edges = sorted(sorted(pos[v] for v in e) for e in s.relation)
        out["edges"] = [[encode_element(s.elements[i]) for i in e] for e in edges]
    elif tag.is_directed:
        arcs = sorted((pos[a], pos[b]) for a, b in s.relation)
        out["arcs"] = [[encode_element(s.elements[i]), encode_element(s.elements[j])] for i, j in arcs]
    elif tag.kind is ClassKind.POSET:
        pairs = sorted((pos[a], pos[b]) for a, b in s.relation if a != b)
        out["order"] = [[encode_element(s.elements[i]), encode_element(s.elements[j])] for i, j in pairs]
    elif tag.is_metric:
        out["distances"] = [[encode_distance(d) for d in row] for row in s.distances]
    return out


def load_structure(path: JsonPath) -> FiniteStructure:
    return structure_from_json(read_json(path))


# ---------------------------------------------------------------------------
# Morphisms and endomorphism lists
# ---------------------------------------------------------------------------

def _kind(raw: Optional[str], default: MorphismKind) -> MorphismKind:
    if raw is None:
        return default
    try:
        return MorphismKind(raw)
    except ValueError as exc:
        raise FormatError(f"unknown morphism kind {raw!r}") from exc


def morphism_from_json(
    data: Union[Mapping[str, Any], Sequence[Any]],
    source: FiniteStructure,
    target: FiniteStructure,
) -> Morphism:
    """``{"images": [...], "kind": ...}`` or a bare image list, aligned with the source elements."""
    if isinstance(data, Mapping):
        images = _require(data, "images", "morphism")
        kind = _kind(data.get("kind"), MorphismKind.HOMOMORPHISM)
    else:
        images, kind = data, MorphismKind.HOMOMORPHISM
    if len(images) != source.size:
        raise FormatError(f"morphism lists {len(images)} images for {source.size} elements")
    f = Morphism(source, target, tuple(decode_element(v) for v in images), kind)
    report = check_morphism(f)
    if not report:
        raise FormatError(f"not a {kind.value}: {report.first_error}")
    return f


def morphism_to_json(f: Morphism) -> Dict[str, Any]:
    return {"kind": f.kind.value, "images": [encode_element(v) for v in f.images]}


def endos_from_json(data: Any, base: FiniteStructure) -> List[Morphism]:
    maps = data.get("maps") if isinstance(data, Mapping) else data
    if not isinstance(maps, list) or not maps:
        raise FormatError("an endomorphism file needs a non-empty list of maps")
    return [morphism_from_json(m, base, base) for m in maps]


def load_endos(path: JsonPath, base: FiniteStructure) -> List[Morphism]:
    return endos_from_json(read_json(path), base)


def endos_to_json(maps: Sequence[Morphism]) -> Dict[str, Any]:
    return {"format": FORMAT_VERSION, "maps": [morphism_to_json(f) for f in maps]}


# ---------------------------------------------------------------------------
# Tower addresses and partial maps
# ---------------------------------------------------------------------------

def address_from_json(raw: Any) -> TowerAddress:
    if not isinstance(raw, list) or len(raw) != 2 or isinstance(raw[0], bool) or not isinstance(raw[0], int):
        raise FormatError(f"a tower address is [level, element], got {raw!r}")
    return TowerAddress(raw[0], decode_element(raw[1]))


def address_to_json(a: TowerAddress) -> List[Any]:
    return [a.level, encode_element(a.element)]


def partial_map_from_json(data: Mapping[str, Any]) -> PartialMap:
    pairs = _require(data, "pairs", "partial map")
    if not isinstance(pairs, list):
        raise FormatError("partial map 'pairs' must be a list")
    domain, images = [], []
    for p in pairs:
        if not isinstance(p, list) or len(p) != 2:
            raise FormatError(f"a partial map pair is [source, image], got {p!r}")
        domain.append(address_from_json(p[0]))
        images.append(address_from_json(p[1]))
    return PartialMap(tuple(domain), tuple(images), _kind(data.get("kind"), MorphismKind.EMBEDDING))


def partial_map_to_json(m: PartialMap) -> Dict[str, Any]:
    return {
        "kind": m.kind.value,
        "pairs": [[address_to_json(a), address_to_json(b)] for a, b in m.pairs()],
    }


def load_partial_map(path: JsonPath) -> PartialMap:
    return partial_map_from_json(read_json(path))


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------

def _encode_payload(payload: Any, base: FiniteStructure) -> Any:
    if isinstance(payload, KatetovFunction):
        return [encode_distance(v) for v in payload.values]
    if isinstance(payload, frozenset):
        return [encode_element(x) for x in sorted(payload, key=base.index_of)]
    if isinstance(payload, tuple):
        return [_encode_payload(p, base) for p in payload]
    return encode_element(payload)


def descriptor_to_json(d: KElement, base: FiniteStructure) -> Dict[str, Any]:
    if isinstance(d, Old):
        return {"old": encode_element(d.element)}
    return {"new": _encode_payload(d.payload, base)}


def descriptor_from_json(data: Mapping[str, Any], base: FiniteStructure) -> KElement:
    """Inverse of :func:`descriptor_to_json` for K of ``base``."""
    if not isinstance(data, Mapping) or len(data) != 1 or not ({"old", "new"} & set(data)):
        raise FormatError(f"a descriptor is {{'old': x}} or {{'new': payload}}, got {data!r}")
    if "old" in data:
        x = decode_element(data["old"])
        if x not in base:
            raise FormatError(f"Old({x!r}) names no element of the base")
        return Old(x)
    raw = data["new"]
    tag = base.tag
    try:
        if tag.is_metric:
            return New(katetov_function(base, [decode_distance(v) for v in raw]))
        if tag.is_graph_like:
            return New(frozenset(decode_element(x) for x in raw))
        if tag.kind is ClassKind.TOURNAMENT:
            return New(tuple(decode_element(x) for x in raw))
        if tag.is_boolean:
            i, a = raw
            return New((i, decode_element(a)))
        left, right = raw
        return New((frozenset(decode_element(x) for x in left), frozenset(decode_element(x) for x in right)))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"malformed {tag} payload {raw!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Towers
# ---------------------------------------------------------------------------

def tower_from_json(data: Mapping[str, Any], *, max_elements: Optional[int] = None) -> TowerHandle:
    """Rebuild a tower from its seed and check the recorded level sizes."""
    seed = structure_from_json(_require(data, "seed", "tower"))
    depth = _require(data, "depth", "tower")
    if isinstance(depth, bool) or not isinstance(depth, int) or depth < 0:
        raise FormatError(f"tower depth must be a non-negative integer, got {depth!r}")
    kwargs = {} if max_elements is None else {"max_elements": max_elements}
    t = TowerHandle(seed, **kwargs)
    t.expand(depth)
    recorded = data.get("sizes")
    if recorded is not None and list(recorded) != t.sizes()[: depth + 1]:
        raise FormatError(f"recorded level sizes {recorded} do not match the rebuilt tower {t.sizes()}")
    return t


def load_tower(path: JsonPath, *, max_elements: Optional[int] = None) -> TowerHandle:
    return tower_from_json(read_json(path), max_elements=max_elements)
