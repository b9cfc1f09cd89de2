"""Services on the limit presented by a tower.

Partial maps between towers, the back-and-forth identification of two
towers, extension of partial morphisms to truncated endomorphisms, the
embedding of End(C) into End of the limit, and the pointwise-topology probe.

Everything works on truncations: a truncation of depth d is the set of
canonical points at levels <= d.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..errors import CapacityError, ContractError, DepthExhaustedError, StructuralError
from ..validator import ValidationResult
from .classes import boolean_retraction, check_k_applicable, k_morphism, k_object
from .structures import (
    ClassKind,
    FiniteStructure,
    Morphism,
    MorphismKind,
    check_morphism,
    compose,
    generated_subalgebra,
    pair_type,
    substructure,
    weakest,
)
from .tower import TowerAddress, TowerHandle, find_witness

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Partial maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialMap:
    domain: Tuple[TowerAddress, ...]
    images: Tuple[TowerAddress, ...]
    kind: MorphismKind = MorphismKind.EMBEDDING

    def __post_init__(self) -> None:
        if len(self.domain) != len(self.images):
            raise StructuralError("a partial map needs one image per domain point")

    @property
    def size(self) -> int:
        return len(self.domain)

    def pairs(self) -> List[Tuple[TowerAddress, TowerAddress]]:
        return list(zip(self.domain, self.images))


def _top(addresses: Sequence[TowerAddress]) -> int:
    return max((a.level for a in addresses), default=0)


def _induced(t1: TowerHandle, t2: TowerHandle, m: PartialMap) -> Morphism:
    """The map between the finite substructures spanned by domain and images."""
    top1, top2 = _top(m.domain), _top(m.images)
    xs = [t1.resolve(a, top1) for a in m.domain]
    ys = [t2.resolve(a, top2) for a in m.images]
    if len(set(xs)) != len(xs):
        raise StructuralError("domain of the partial map repeats a point")
    sub_a, _ = substructure(t1.level(top1), xs)
    sub_b, _ = substructure(t2.level(top2), set(ys))
    mapping = dict(zip(xs, ys))
    return Morphism(sub_a, sub_b, tuple(mapping[x] for x in sub_a.elements), m.kind)


def check_partial_map(t1: TowerHandle, t2: TowerHandle, m: PartialMap) -> ValidationResult:
    """Valid when the induced map of finite substructures has the declared kind."""
    if t1.tag != t2.tag:
        return ValidationResult.fail(f"towers of different classes: {t1.tag} and {t2.tag}")
    if t1.tag.is_boolean:
        return ValidationResult.fail("partial maps on Boolean towers are not supported")
    try:
        return check_morphism(_induced(t1, t2, m))
    except StructuralError as exc:
        return ValidationResult.fail(str(exc))


# ---------------------------------------------------------------------------
# Back and forth
# ---------------------------------------------------------------------------

def _least_unused(t: TowerHandle, used: set) -> TowerAddress:
    n = 0
    while True:
        try:
            fresh = t.fresh_elements(n)
        except CapacityError as exc:
            raise DepthExhaustedError(
                f"every point below level {n} of the {t.tag} tower is already used", depth=n - 1
            ) from exc
        for x in fresh:
            a = TowerAddress(n, x)
            if a not in used:
                return a
        n += 1


def _type_over(t: TowerHandle, point: TowerAddress, anchors: Sequence[TowerAddress]) -> Tuple[Any, ...]:
    common = max(point.level, _top(anchors))
    lvl = t.level(common)
    x = t.resolve(point, common)
    return tuple(pair_type(lvl, x, t.resolve(a, common)) for a in anchors)


def _match(
    src: TowerHandle,
    dst: TowerHandle,
    src_points: Sequence[TowerAddress],
    dst_points: Sequence[TowerAddress],
    point: TowerAddress,
    margin: int,
) -> TowerAddress:
    """Image in ``dst`` of a new ``src`` point, given the identification so far."""
    types = _type_over(src, point, src_points)
    try:
        witness = find_witness(dst, dst_points, types, margin=margin)
    except CapacityError as exc:
        if isinstance(exc, DepthExhaustedError):
            raise
        raise DepthExhaustedError(str(exc), depth=_top(dst_points) + margin) from exc
    return dst.canonical(witness)


def back_and_forth(
    t1: TowerHandle, t2: TowerHandle, seed_map: PartialMap, steps: int, *, margin: int = 1
) -> PartialMap:
    """Extend a partial isomorphism by ``steps`` points, alternating forth and back.

    Each step takes the least canonical point not yet used on its side and
    matches it with the least realizing point on the other side.

    Raises:
        ContractError: different classes, or ``seed_map`` is not a partial isomorphism.
        DepthExhaustedError: a witness lies beyond the budget.
    """
    if t1.tag != t2.tag:
        raise ContractError(f"back-and-forth needs towers of one class, got {t1.tag} and {t2.tag}")
    seed_iso = PartialMap(seed_map.domain, seed_map.images, MorphismKind.EMBEDDING)
    report = check_partial_map(t1, t2, seed_iso)
    if not report:
        raise ContractError(f"seed map is not a partial isomorphism: {report.first_error}")
    left = [t1.canonical(a) for a in seed_map.domain]
    right = [t2.canonical(a) for a in seed_map.images]
    for i in range(steps):
        if i % 2 == 0:
            x = _least_unused(t1, set(left))
            y = _match(t1, t2, left, right, x, margin)
        else:
            y = _least_unused(t2, set(right))
            x = _match(t2, t1, right, left, y, margin)
        left.append(x)
        right.append(y)
        logger.debug("back-and-forth step %d: %s <-> %s", i + 1, x, y)
    return PartialMap(tuple(left), tuple(right), MorphismKind.ISOMORPHISM)


# ---------------------------------------------------------------------------
# K^ω on morphisms
# ---------------------------------------------------------------------------

@dataclass
class KOmegaLadder:
    """K^i(f) for i <= depth between the towers over source(f) and target(f)."""

    source: TowerHandle
    target: TowerHandle
    maps: List[Morphism]

    @property
    def depth(self) -> int:
        return len(self.maps) - 1

    def extend_to(self, depth: int) -> None:
        while self.depth < depth:
            i = self.depth
            self.maps.append(
                k_morphism(
                    self.maps[i],
                    source_k=self.source.step(i),
                    target_k=self.target.step(i),
                    max_elements=self.source.max_elements,
                )
            )

    def at(self, level: int) -> Morphism:
        self.extend_to(level)
        return self.maps[level]

    def squares_commute(self) -> ValidationResult:
        """η ∘ K^i(f) = K^{i+1}(f) ∘ η at every rung."""
        for i in range(self.depth):
            left = compose(self.target.link(i), self.maps[i])
            right = compose(self.maps[i + 1], self.source.link(i))
            if left.images != right.images:
                return ValidationResult.fail(f"naturality square {i} -> {i + 1} does not commute")
        return ValidationResult.ok()


def k_omega_morphism(
    f: Morphism,
    depth: int,
    *,
    source: Optional[TowerHandle] = None,
    target: Optional[TowerHandle] = None,
) -> KOmegaLadder:
    """The ladder K⁰(f) = f, K¹(f), ..., K^depth(f)."""
    check_k_applicable(f)
    source = source or TowerHandle(f.source)
    target = target or TowerHandle(f.target)
    if source.seed != f.source or target.seed != f.target:
        raise ContractError("ladder towers must be seeded with the source and target of f")
    ladder = KOmegaLadder(source, target, [f])
    try:
        ladder.extend_to(depth)
    except CapacityError:
        logger.warning("K^ω ladder for %s stopped at depth %d", f.source.tag, ladder.depth)
        raise
    return ladder


# ---------------------------------------------------------------------------
# Truncated endomorphisms
# ---------------------------------------------------------------------------

@dataclass
class EndoTruncation:
    """A homomorphism from the depth-``depth_in`` truncation into the tower."""

    tower: TowerHandle
    depth_in: int
    depth_out: int
    table: Dict[TowerAddress, TowerAddress] = field(default_factory=dict)
    kind: MorphismKind = MorphismKind.HOMOMORPHISM

    def apply(self, a: TowerAddress) -> TowerAddress:
        c = self.tower.canonical(a)
        try:
            return self.table[c]
        except KeyError:
            raise StructuralError(f"{a} lies outside the depth-{self.depth_in} truncation") from None

    def as_partial_map(self) -> PartialMap:
        keys = sorted(self.table, key=self.tower.sort_key)
        return PartialMap(tuple(keys), tuple(self.table[k] for k in keys), self.kind)

    def check(self) -> ValidationResult:
        """The table is a morphism of its declared kind on the truncation."""
        if self.tower.tag.is_boolean:
            return _check_boolean_truncation(self)
        return check_partial_map(self.tower, self.tower, self.as_partial_map())

    def same_table(self, other: EndoTruncation) -> bool:
        return self.table == other.table


def _check_boolean_truncation(e: EndoTruncation) -> ValidationResult:
    t = e.tower
    top = max(e.depth_in, e.depth_out)
    width = t.level(top).full
    resolved = {t.resolve(k, top): t.resolve(v, top) for k, v in e.table.items()}
    for x, fx in resolved.items():
        complement = width & ~x
        if complement in resolved and resolved[complement] != width & ~fx:
            return ValidationResult.fail(f"complement not preserved at {x}")
        for y, fy in resolved.items():
            if (x | y) in resolved and resolved[x | y] != fx | fy:
                return ValidationResult.fail(f"join not preserved at {x}, {y}")
    return ValidationResult.ok()


def compose_truncations(outer: EndoTruncation, inner: EndoTruncation) -> EndoTruncation:
    """outer ∘ inner wherever inner lands inside outer's truncation."""
    if outer.tower is not inner.tower:
        raise ContractError("truncations live on different towers")
    table = {}
    for p, q in inner.table.items():
        if q in outer.table:
            table[p] = outer.table[q]
    depth_out = max((a.level for a in table.values()), default=0)
    return EndoTruncation(inner.tower, inner.depth_in, depth_out, table, weakest(outer.kind, inner.kind))


def _identification(
    host: TowerHandle,
    part: FiniteStructure,
    top: int,
    margin: int,
) -> Tuple[TowerHandle, Optional[Dict[TowerAddress, TowerAddress]], Dict[TowerAddress, TowerAddress]]:
    """Tower over ``part`` with the seeded partial iso into ``host`` (part-side -> host-side).

    Returns ``(tower, None, {})`` when ``part`` is the host's own seed, in which case
    the identification is the identity.
    """
    if top == 0 and part == host.seed:
        return host, None, {}
    tower = TowerHandle(part, max_elements=host.max_elements)
    forward = {TowerAddress(0, x): host.canonical(TowerAddress(top, x)) for x in part.elements}
    return tower, forward, {v: k for k, v in forward.items()}


def extend_partial_morphism(t: TowerHandle, f: PartialMap, depth: int, *, margin: int = 1) -> EndoTruncation:
    """Extend a partial morphism inside ``t`` to a homomorphism of a truncation.

    The domain and image are presented as towers K^ω(A), K^ω(B); the result is
    t ∘ K^ω(f) ∘ s⁻¹ where s and t are back-and-forth identifications of those
    towers with ``t``. The truncation depth actually used is at least the
    level of every domain point.

    Raises:
        ContractError: the map is invalid or its kind is not allowed for the class.
        DepthExhaustedError: an identification ran past the budget.
    """
    if t.tag.is_boolean:
        raise ContractError("partial maps on Boolean towers are not supported; use embed_endomorphisms")
    report = check_partial_map(t, t, f)
    if not report:
        raise ContractError(f"not a partial {f.kind.value}: {report.first_error}")
    f_map = _induced(t, t, f)
    check_k_applicable(f_map)
    top_a, top_b = _top(f.domain), _top(f.images)
    depth = max([depth] + [t.canonical(a).level for a in f.domain])

    ta, s_fwd, s_back = _identification(t, f_map.source, top_a, margin)
    tb, t_fwd, t_back = _identification(t, f_map.target, top_b, margin)

    points = t.points(depth)
    if s_fwd is not None:
        # back steps: pull every truncation point into the domain tower
        for p in points:
            if p in s_back:
                continue
            q = _match(t, ta, list(s_back), list(s_fwd), p, margin)
            s_fwd[q] = p
            s_back[p] = q

    ladder = k_omega_morphism(f_map, 0, source=ta, target=tb)
    table: Dict[TowerAddress, TowerAddress] = {}
    for p in points:
        q = p if s_fwd is None else s_back[p]
        e = ladder.at(q.level)(q.element)
        r = tb.canonical(TowerAddress(q.level, e))
        if t_fwd is None:
            out = r
        else:
            if r not in t_fwd:
                # forth step for the point the ladder produced
                w = _match(tb, t, list(t_fwd), list(t_back), r, margin)
                t_fwd[r] = w
                t_back[w] = r
            out = t_fwd[r]
        table[p] = t.canonical(out)
    depth_out = max((a.level for a in table.values()), default=0)
    logger.info("extended a partial %s to %d points (depth %d -> %d)", f.kind.value, len(table), depth, depth_out)
    return EndoTruncation(t, depth, depth_out, table, f.kind)


def embed_endomorphisms(c: FiniteStructure, maps: Sequence[Morphism], depth: int, *, tower: Optional[TowerHandle] = None) -> List[EndoTruncation]:
    """g ↦ K^ω(g), truncated at ``depth``, for endomorphisms of the seed ``c``."""
    t = tower or TowerHandle(c)
    if t.seed != c:
        raise ContractError("the tower must be seeded with C")
    points = t.points(depth)
    out = []
    for g in maps:
        if g.source != c or g.target != c:
            raise ContractError("embed_endomorphisms needs maps C -> C")
        ladder = k_omega_morphism(g, depth, source=t, target=t)
        top = ladder.at(depth)
        table = {}
        for p in points:
            x = t.resolve(p, depth)
            table[p] = t.canonical(TowerAddress(depth, top.apply(x)))
        out.append(EndoTruncation(t, depth, depth, table, g.kind))
    return out


# ---------------------------------------------------------------------------
# Pointwise topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    holds: bool
    hypothesis_met: bool
    stable_from: Optional[int]
    k_stable_from: Optional[int]


def _stable_from(values: Sequence[Any], limit: Any, min_tail: int) -> Optional[int]:
    """Least n with values[m] == limit for every m >= n, or None.

    A final run shorter than ``min_tail`` counts as no stable tail.
    """
    n = len(values)
    while n > 0 and values[n - 1] == limit:
        n -= 1
    return n if len(values) - n >= min_tail else None


def continuity_probe(
    f: Morphism,
    f_seq: Sequence[Morphism],
    generators: Sequence[Any],
    *,
    min_tail: int = 2,
) -> ProbeResult:
    """If fₙ agrees with f on S from n₀ on, K(fₙ) agrees with K(f) on K(⟨S⟩) from n₀ on.

    Agreement "from n₀ on" is read off the finite window ``f_seq``: the
    agreeing tail must hold at least ``min_tail`` maps.

    Raises:
        ContractError: ``min_tail`` below 1.
    """
    if min_tail < 1:
        raise ContractError(f"min_tail must be at least 1, got {min_tail}")
    x = f.source
    if x.tag.is_boolean:
        sub, incl = generated_subalgebra(x, generators)
    else:
        sub, incl = substructure(x, generators)
    ka = k_object(sub)
    ky = k_object(f.target)

    def restricted(g: Morphism) -> Tuple[Any, ...]:
        return tuple(g.apply(v) for v in incl.images)

    def lifted(g: Morphism) -> Tuple[Any, ...]:
        return k_morphism(compose(g, incl), source_k=ka, target_k=ky).images

    base = restricted(f)
    stable = _stable_from([restricted(g) for g in f_seq], base, min_tail)
    k_base = lifted(f)
    k_stable = _stable_from([lifted(g) for g in f_seq], k_base, min_tail)
    if stable is None:
        return ProbeResult(True, False, None, k_stable)
    return ProbeResult(k_stable is not None and k_stable <= stable, True, stable, k_stable)


# ---------------------------------------------------------------------------
# Retractions K(L) -> L at truncation
# ---------------------------------------------------------------------------

def _required(t: TowerHandle, level: int, x: Any) -> Callable[[FiniteStructure, Any], bool]:
    """Positive relations the image of a New point of level+1 must satisfy."""
    step = t.step(level)
    lvl = step.structure
    link = step.eta
    olds = [link(v) for v in step.base.elements]
    if t.tag.is_graph_like:
        needed = [v for v in olds if lvl.related(v, x)]
        return lambda s, y: all(s.related(v, y) for v in needed)
    ups = [v for v in olds if v != x and (v, x) in lvl.relation]
    downs = [v for v in olds if v != x and (x, v) in lvl.relation]
    return lambda s, y: all((v, y) in s.relation for v in ups) and all((y, v) in s.relation for v in downs)


def retraction(t: TowerHandle, level: int) -> Morphism:
    """The retraction r: K(L) -> L truncated to an idempotent endomorphism of level ``level + 1``.

    The full r leaves the truncation: a New point of level ``level + 1`` may
    only find its image among the fresh points of that same level, so the
    map is returned as level+1 -> level+1. It fixes the η-image of level
    ``level`` pointwise (r ∘ η = η) and r ∘ r = r. A New point goes to the
    least-address point realizing its relations to the old points, possibly
    itself; for Boolean towers ⟨0,a⟩ ↦ η(a) and ⟨1,a⟩ ↦ 0.

    Raises:
        ContractError: the class has no retraction here (Kn-free, tournament,
            linear order, metric).
    """
    if t.tag.is_boolean:
        step = t.step(level)
        return compose(step.eta, boolean_retraction(step))
    if t.tag.kind not in (ClassKind.GRAPH, ClassKind.DIGRAPH, ClassKind.POSET):
        raise ContractError(f"no retraction offered for {t.tag}")
    step = t.step(level)
    top = level + 1
    lvl = t.level(top)
    candidates = [t.resolve(p, top) for p in t.points(top)]
    images = []
    for x in lvl.elements:
        if step.is_old(x):
            images.append(x)
            continue
        ok = _required(t, level, x)
        match = next((y for y in candidates if ok(lvl, y)), None)
        if match is None:
            raise DepthExhaustedError(f"no retraction image for {x!r} up to level {top}", depth=top)
        images.append(match)
    return Morphism(lvl, lvl, tuple(images), MorphismKind.HOMOMORPHISM)
