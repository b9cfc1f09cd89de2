"""Free amalgams, one-point pushouts of graphs and the generic Katětov functor.

Pushouts are taken in the category of graphs and all homomorphisms. Along a
one-point extension g: A₀ ↪· A₂ the pushout of f: A₀ -> A₁ is A₁ plus one
new vertex whose neighbours are the f-images of the new vertex's neighbours.
Universality is certified on bounded cocones only.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, FrozenSet, Iterator, List, Set, Tuple

from ..errors import CapacityError, ContractError
from ..validator import ValidationResult
from .kobject import KObjectResult, New, Old
from .structures import (
    ClassKind,
    FiniteStructure,
    Morphism,
    MorphismKind,
    OnePointExtension,
    check_morphism,
    compose,
    enumerate_morphisms,
    enumerate_one_point_extensions,
    fresh_element,
    graph,
    identity,
    inverse,
    pair_type,
    validate_extension,
)
from .tower import reachability_chain

logger = logging.getLogger(__name__)

FREE_AMALGAMATION = (ClassKind.GRAPH, ClassKind.KN_FREE, ClassKind.DIGRAPH)


@dataclass(frozen=True)
class AmalgamResult:
    structure: FiniteStructure
    left: Morphism
    right: Morphism


def free_amalgam(j1: Morphism, j2: Morphism) -> AmalgamResult:
    """B₁ ⊔_A B₂ with relations exactly the union of both sides.

    Element ids are integers: A first, then the new elements of B₁, then those of B₂.

    Raises:
        ContractError: the class has no free amalgamation, or j1, j2 are not
            embeddings of one common A.
    """
    a = j1.source
    if a.tag.kind not in FREE_AMALGAMATION:
        raise ContractError(f"{a.tag} has no free amalgamation")
    if j2.source != a:
        raise ContractError("free amalgam needs two embeddings of the same structure")
    for j in (j1, j2):
        report = check_morphism(j.with_kind(MorphismKind.EMBEDDING))
        if not report:
            raise ContractError(f"not an embedding: {report.first_error}")

    left_ids = {y: i for i, y in enumerate(j1.images)}
    right_ids = {y: i for i, y in enumerate(j2.images)}
    nxt = a.size
    for y in j1.target.elements:
        if y not in left_ids:
            left_ids[y] = nxt
            nxt += 1
    for y in j2.target.elements:
        if y not in right_ids:
            right_ids[y] = nxt
            nxt += 1

    rel: Set[Any] = set()
    for side, ids_of in ((j1.target, left_ids), (j2.target, right_ids)):
        for r in side.relation:
            if a.tag.is_graph_like:
                rel.add(frozenset(ids_of[v] for v in r))
            else:
                rel.add((ids_of[r[0]], ids_of[r[1]]))
    c = FiniteStructure(a.tag, tuple(range(nxt)), frozenset(rel))
    left = Morphism(j1.target, c, tuple(left_ids[y] for y in j1.target.elements), MorphismKind.EMBEDDING)
    right = Morphism(j2.target, c, tuple(right_ids[y] for y in j2.target.elements), MorphismKind.EMBEDDING)
    return AmalgamResult(c, left, right)


@dataclass(frozen=True)
class PushoutSquare:
    """p ∘ f = q ∘ g with p: A₁ ↪ B and q: A₂ -> B."""

    f: Morphism
    g: Morphism
    b: FiniteStructure
    p: Morphism
    q: Morphism

    def commutes(self) -> bool:
        return compose(self.p, self.f).images == compose(self.q, self.g).images


def _require_graphs(*maps: Morphism) -> None:
    for m in maps:
        if m.source.tag.kind is not ClassKind.GRAPH:
            raise ContractError(f"pushouts are built for graphs with homomorphisms, not {m.source.tag}")


def one_point_pushout(f: Morphism, g: Morphism) -> PushoutSquare:
    """Pushout of a homomorphism f: A₀ -> A₁ along a one-point extension g: A₀ ↪· A₂.

    Raises:
        ContractError: not graphs, f not a homomorphism, or g not one-point.
    """
    _require_graphs(f, g)
    if f.source != g.source:
        raise ContractError("f and g must share their source")
    report = check_morphism(f.with_kind(MorphismKind.HOMOMORPHISM))
    if not report:
        raise ContractError(f"f is not a homomorphism: {report.first_error}")
    a0, a1, a2 = f.source, f.target, g.target
    image = set(g.images)
    new = [x for x in a2.elements if x not in image]
    if len(new) != 1:
        raise ContractError("g must add exactly one vertex")
    (x,) = new
    e = OnePointExtension(a0, a2, g.with_kind(MorphismKind.EMBEDDING), x)
    report = validate_extension(e)
    if not report:
        raise ContractError(f"g is not a one-point extension: {report.first_error}")

    x_hat = fresh_element(a1)
    edges = set(a1.relation)
    for a, ga in zip(a0.elements, g.images):
        if a2.related(x, ga):
            edges.add(frozenset((x_hat, f(a))))
    b = graph(a1.elements + (x_hat,), edges)
    p = Morphism(a1, b, a1.elements, MorphismKind.EMBEDDING)
    back = {ga: a for a, ga in zip(a0.elements, g.images)}
    q = Morphism(a2, b, tuple(x_hat if y == x else f(back[y]) for y in a2.elements), MorphismKind.HOMOMORPHISM)
    return PushoutSquare(f, g, b, p, q)


def mixed_pushout(f: Morphism, g: Morphism) -> PushoutSquare:
    """Pushout along any embedding, as a composite of one-point squares."""
    _require_graphs(f, g)
    if f.source != g.source:
        raise ContractError("f and g must share their source")
    report = check_morphism(g.with_kind(MorphismKind.EMBEDDING))
    if not report:
        raise ContractError(f"g is not an embedding: {report.first_error}")
    chain = reachability_chain(g.with_kind(MorphismKind.EMBEDDING))
    if not chain:
        q = compose(f, inverse(g.with_kind(MorphismKind.ISOMORPHISM)))
        return PushoutSquare(f, g, f.target, identity(f.target), q)
    p: Morphism = identity(f.target)
    current = f
    for k, e in enumerate(chain, start=1):
        square = one_point_pushout(current, e.inclusion)
        p = compose(square.p, p)
        current = square.q
        logger.debug("pushout step %d/%d: |B| = %d", k, len(chain), square.b.size)
    q = Morphism(g.target, current.target, current.images, MorphismKind.HOMOMORPHISM)
    return PushoutSquare(f, g, current.target, p.with_kind(MorphismKind.EMBEDDING), q)


def _graphs_on(n: int) -> Iterator[FiniteStructure]:
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield graph(range(n), [pairs[i] for i in range(len(pairs)) if mask >> i & 1])


def check_universality(square: PushoutSquare, *, extra: int = 0) -> ValidationResult:
    """Every commuting cocone into a graph on at most |B| + extra vertices factors uniquely through B.

    The mediator is forced on p(A₁) ∪ q(A₂); it is unique when these cover B
    and exists when the forced map is a well-defined homomorphism.
    """
    if not square.commutes():
        return ValidationResult.fail("square does not commute")
    b = square.b
    covered = set(square.p.images) | set(square.q.images)
    if covered != set(b.elements):
        return ValidationResult.fail("p and q are not jointly surjective; mediators are not unique")
    a1, a2 = square.f.target, square.g.target
    fixed = {square.g(a): square.f(a) for a in square.f.source.elements}
    free = [y for y in a2.elements if y not in fixed]
    checked = 0
    for n in range(1, b.size + extra + 1):
        for d in _graphs_on(n):
            for p2 in enumerate_morphisms(a1, d):
                # q2 is forced on g(A₀) by commutativity; only the new points vary
                for choice in itertools.product(d.elements, repeat=len(free)):
                    values = {y: p2(fixed[y]) for y in fixed}
                    values.update(zip(free, choice))
                    q2 = Morphism(a2, d, tuple(values[y] for y in a2.elements))
                    if not check_morphism(q2):
                        continue
                    checked += 1
                    forced = {}
                    for m, cocone in ((square.p, p2), (square.q, q2)):
                        for y, by in zip(m.source.elements, m.images):
                            if forced.setdefault(by, cocone(y)) != cocone(y):
                                return ValidationResult.fail(f"cocone into {n} vertices has no mediator at {by!r}")
                    u = Morphism(b, d, tuple(forced[v] for v in b.elements))
                    if not check_morphism(u):
                        return ValidationResult.fail(f"forced mediator into {n} vertices is not a homomorphism")
    logger.debug("universality: %d cocones checked", checked)
    return ValidationResult.ok()


# ---------------------------------------------------------------------------
# Generic K
# ---------------------------------------------------------------------------

def generic_k(a: FiniteStructure, *, cap: int = 5) -> KObjectResult:
    """K(A) as the iterated pushout of A's one-point extensions, one per iso type over A."""
    if a.tag.kind is not ClassKind.GRAPH:
        raise ContractError("generic K is built for graphs only")
    if a.size > cap:
        raise CapacityError(f"generic K is capped at {cap} vertices, got {a.size}", size=a.size, limit=cap)
    extensions = enumerate_one_point_extensions(a)
    into = identity(a).with_kind(MorphismKind.EMBEDDING)
    descriptors: List[Any] = [Old(x) for x in a.elements]
    for e in extensions:
        square = one_point_pushout(into, e.inclusion)
        into = compose(square.p, into).with_kind(MorphismKind.EMBEDDING)
        neighbours = frozenset(x for x, t in zip(a.elements, e.type_over_base()) if t)
        descriptors.append(New(neighbours))
    structure = into.target
    logger.debug("generic K: %d extensions, %d vertices", len(extensions), structure.size)
    return KObjectResult(a, structure, into, tuple(descriptors))


def realized_extension_types(k_result: KObjectResult) -> FrozenSet[Tuple[Any, ...]]:
    """Types over A of the points of K(A) outside η(A)."""
    k = k_result.structure
    olds = list(k_result.eta.images)
    old_set = set(olds)
    return frozenset(
        tuple(pair_type(k, y, v) for v in olds) for y in k.elements if y not in old_set
    )


def extension_equivalent(left: KObjectResult, right: KObjectResult) -> bool:
    return left.base == right.base and realized_extension_types(left) == realized_extension_types(right)
