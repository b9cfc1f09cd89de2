"""Hand-crafted Katětov functors: K on objects, K on morphisms, η and resolution.

For every class, K(A) consists of the Old elements (a copy of A, listed
first in A's order) and New elements, one per payload, listed in
lexicographic order of payloads under A's element order. Element ids of
K(A) are the integers ``0..N-1`` in that order.

Payloads:
    graph, kn-free   frozenset S            New(S) adjacent exactly to S
    digraph          (In, Out) disjoint     In -> New(S) -> Out
    linear order     cut (U, V)             U < New(U, V) < V
    poset            (U, V) disjoint, U <= V
    tournament       tuple s, |s| <= |A|    v -> New(s) iff v occurs in s
    boolean algebra  (i, a), i in {0, 1}    atoms of B({0,1} x A)
    metric           KatetovFunction        sup metric, hats are the Old points
"""
from __future__ import annotations

import itertools
import logging
from typing import Any, FrozenSet, List, Optional, Sequence, Set, Tuple

from ..errors import CapacityError, ContractError, StructuralError
from ..settings import DEFAULT_LEVEL_BUDGET
from . import metric
from .kobject import KElement, KObjectResult, New, Old
from .structures import (
    ClassKind,
    FiniteStructure,
    Morphism,
    MorphismKind,
    OnePointExtension,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Sizes and ordering helpers
# ---------------------------------------------------------------------------

def predicted_size(a: FiniteStructure) -> int:
    """Size of K(A) checked against the budget before anything is built.

    Exact for graphs, digraphs, linear orders, tournaments and Boolean
    algebras; a lower bound for Kn-free graphs and posets (which are also
    checked while enumerating); the candidate count for metric spaces.
    """
    k = a.size
    kind = a.tag.kind
    if kind is ClassKind.GRAPH:
        return (1 << k) + k
    if kind is ClassKind.KN_FREE:
        return 2 * k + 1
    if kind is ClassKind.DIGRAPH:
        return 3 ** k + k
    if kind is ClassKind.LINEAR_ORDER:
        return 2 * k + 1
    if kind is ClassKind.POSET:
        return (1 << k) + k
    if kind is ClassKind.TOURNAMENT:
        return sum(k ** j for j in range(k + 1)) + k
    if kind is ClassKind.BOOLEAN_ALGEBRA:
        return 2 * k
    return (a.tag.q + 1) ** k


def _refuse(a: FiniteStructure, size: int, limit: int) -> CapacityError:
    return CapacityError(
        f"K of a {a.size}-element {a.tag} structure has at least {size} elements (budget {limit})",
        size=size,
        limit=limit,
    )


def _subset_key(a: FiniteStructure, subset: FrozenSet[Any]) -> Tuple[int, ...]:
    return tuple(sorted(a.index_of(x) for x in subset))


def _mask_to_set(a: FiniteStructure, mask: int) -> FrozenSet[Any]:
    return frozenset(a.elements[i] for i in range(a.size) if mask >> i & 1)


def _chain(a: FiniteStructure) -> List[Any]:
    """Elements of a linear order from bottom to top."""
    return sorted(a.elements, key=lambda x: len(a.predecessors[x]))


def _order_masks(a: FiniteStructure) -> Tuple[List[int], List[int]]:
    """Bitmasks of the elements above and below each element (inclusive)."""
    above = [0] * a.size
    below = [0] * a.size
    for x, y in a.relation:
        i, j = a.index_of(x), a.index_of(y)
        above[i] |= 1 << j
        below[j] |= 1 << i
    return above, below


# ---------------------------------------------------------------------------
# Payload enumeration per class
# ---------------------------------------------------------------------------

def _graph_payloads(a: FiniteStructure) -> List[FrozenSet[Any]]:
    masks = sorted(range(1 << a.size), key=lambda m: tuple(i for i in range(a.size) if m >> i & 1))
    return [_mask_to_set(a, m) for m in masks]


def _kn_free_payloads(a: FiniteStructure, max_elements: int) -> List[FrozenSet[Any]]:
    """Subsets whose induced subgraph is K_{n-1}-free, in lexicographic order."""
    forbidden = a.tag.n - 1
    adj = a.successors
    elems = a.elements
    out: List[FrozenSet[Any]] = []

    def has_clique(candidates: List[Any], size: int) -> bool:
        if size == 0:
            return True
        for i, u in enumerate(candidates):
            rest = [w for w in candidates[i + 1:] if w in adj[u]]
            if has_clique(rest, size - 1):
                return True
        return False

    chosen: List[Any] = []

    def extend(start: int) -> None:
        out.append(frozenset(chosen))
        if len(out) + a.size > max_elements:
            raise _refuse(a, len(out) + a.size, max_elements)
        for i in range(start, len(elems)):
            v = elems[i]
            common = [u for u in chosen if u in adj[v]]
            if has_clique(common, forbidden - 1):
                continue
            chosen.append(v)
            extend(i + 1)
            chosen.pop()

    extend(0)
    return out


def _digraph_payloads(a: FiniteStructure) -> List[Tuple[FrozenSet[Any], FrozenSet[Any]]]:
    payloads = []
    for roles in itertools.product((0, 1, 2), repeat=a.size):
        ins = frozenset(x for x, r in zip(a.elements, roles) if r == 1)
        outs = frozenset(x for x, r in zip(a.elements, roles) if r == 2)
        payloads.append((ins, outs))
    payloads.sort(key=lambda p: (_subset_key(a, p[0]), _subset_key(a, p[1])))
    return payloads


def _linear_payloads(a: FiniteStructure) -> List[Tuple[FrozenSet[Any], FrozenSet[Any]]]:
    chain = _chain(a)
    return [(frozenset(chain[:i]), frozenset(chain[i:])) for i in range(len(chain) + 1)]


def _poset_payloads(a: FiniteStructure, max_elements: int) -> List[Tuple[FrozenSet[Any], FrozenSet[Any]]]:
    above, _ = _order_masks(a)
    k = a.size
    everything = (1 << k) - 1
    pairs: List[Tuple[int, int]] = []
    for u_mask in range(1 << k):
        up = everything
        for i in range(k):
            if u_mask >> i & 1:
                up &= above[i]
        up &= ~u_mask
        sub = up
        while True:
            pairs.append((u_mask, sub))
            if len(pairs) + k > max_elements:
                raise _refuse(a, len(pairs) + k, max_elements)
            if sub == 0:
                break
            sub = (sub - 1) & up

    def bits(m: int) -> Tuple[int, ...]:
        return tuple(i for i in range(k) if m >> i & 1)

    pairs.sort(key=lambda p: (bits(p[0]), bits(p[1])))
    return [(_mask_to_set(a, u), _mask_to_set(a, v)) for u, v in pairs]


def _tournament_payloads(a: FiniteStructure) -> List[Tuple[Any, ...]]:
    out: List[Tuple[Any, ...]] = []
    for length in range(a.size + 1):
        out.extend(itertools.product(a.elements, repeat=length))
    return out


# ---------------------------------------------------------------------------
# K on objects
# ---------------------------------------------------------------------------

def k_object(a: FiniteStructure, *, max_elements: int = DEFAULT_LEVEL_BUDGET) -> KObjectResult:
    """Build K(A), η_A and the descriptor index.

    Raises:
        CapacityError: K(A) would exceed ``max_elements`` elements.
    """
    tag = a.tag
    if tag.is_metric:
        return metric.sphere_k_object(a, max_elements=max_elements)
    size = predicted_size(a)
    if size > max_elements:
        raise _refuse(a, size, max_elements)
    if tag.is_boolean:
        return _boolean_k_object(a)

    kind = tag.kind
    k = a.size
    old: Tuple[KElement, ...] = tuple(Old(x) for x in a.elements)
    if tag.is_graph_like:
        payloads: Sequence[Any] = (
            _graph_payloads(a) if kind is ClassKind.GRAPH else _kn_free_payloads(a, max_elements)
        )
    elif kind is ClassKind.DIGRAPH:
        payloads = _digraph_payloads(a)
    elif kind is ClassKind.LINEAR_ORDER:
        payloads = _linear_payloads(a)
    elif kind is ClassKind.POSET:
        payloads = _poset_payloads(a, max_elements)
    else:
        payloads = _tournament_payloads(a)

    descriptors = old + tuple(New(p) for p in payloads)
    pos = a.position
    ids = range(len(descriptors))

    def oid(x: Any) -> int:
        return pos[x]

    rel: Set[Any] = set()
    if tag.is_graph_like:
        for edge in a.relation:
            rel.add(frozenset(oid(x) for x in edge))
        for j, s in enumerate(payloads, start=k):
            for x in s:
                rel.add(frozenset((oid(x), j)))
    elif kind is ClassKind.DIGRAPH:
        rel.update((oid(x), oid(y)) for x, y in a.relation)
        for j, (ins, outs) in enumerate(payloads, start=k):
            rel.update((oid(x), j) for x in ins)
            rel.update((j, oid(y)) for y in outs)
    elif kind is ClassKind.LINEAR_ORDER:
        chain = _chain(a)
        # New(cut i) sits just below chain[i]
        line: List[int] = []
        for i in range(len(chain) + 1):
            line.append(k + i)
            if i < len(chain):
                line.append(oid(chain[i]))
        rel.update((line[i], line[j]) for i in range(len(line)) for j in range(i, len(line)))
    elif kind is ClassKind.POSET:
        rel.update(_poset_k_relation(a, payloads))
    else:
        rel.update(_tournament_k_relation(a, payloads))

    structure = FiniteStructure(tag, tuple(ids), frozenset(rel))
    eta = Morphism(a, structure, tuple(range(k)), MorphismKind.EMBEDDING)
    logger.debug("K(%s): %d -> %d elements", tag, k, structure.size)
    return KObjectResult(a, structure, eta, descriptors)


def _poset_k_relation(a: FiniteStructure, payloads: Sequence[Tuple[FrozenSet[Any], FrozenSet[Any]]]) -> Set[Tuple[int, int]]:
    above, below = _order_masks(a)
    k = a.size
    pos = a.position
    rel: Set[Tuple[int, int]] = set()
    rel.update((pos[x], pos[y]) for x, y in a.relation)

    def mask(s: FrozenSet[Any]) -> int:
        m = 0
        for x in s:
            m |= 1 << pos[x]
        return m

    u_masks = [mask(u) for u, _ in payloads]
    v_masks = [mask(v) for _, v in payloads]
    # elements above some v in V
    v_up = []
    for vm in v_masks:
        up = 0
        for i in range(k):
            if vm >> i & 1:
                up |= above[i]
        v_up.append(up)

    for j, (um, vm) in enumerate(zip(u_masks, v_masks)):
        nj = k + j
        rel.add((nj, nj))
        for i in range(k):
            if above[i] & um:
                rel.add((i, nj))
            if below[i] & vm:
                rel.add((nj, i))
    for j1 in range(len(payloads)):
        up = v_up[j1]
        if not up:
            continue
        for j2 in range(len(payloads)):
            if j1 != j2 and up & u_masks[j2]:
                rel.add((k + j1, k + j2))
    return rel


def _tournament_k_relation(a: FiniteStructure, payloads: Sequence[Tuple[Any, ...]]) -> Set[Tuple[int, int]]:
    k = a.size
    pos = a.position
    rel: Set[Tuple[int, int]] = set((pos[x], pos[y]) for x, y in a.relation)
    for j, s in enumerate(payloads, start=k):
        members = set(s)
        for x in a.elements:
            rel.add((pos[x], j) if x in members else (j, pos[x]))
    for j1, j2 in itertools.combinations(range(len(payloads)), 2):
        s, t = payloads[j1], payloads[j2]
        if len(s) != len(t):
            forward = len(s) < len(t)
        else:
            i = next(i for i in range(len(s)) if s[i] != t[i])
            forward = (s[i], t[i]) in a.relation
        rel.add((k + j1, k + j2) if forward else (k + j2, k + j1))
    return rel


def _boolean_k_object(a: FiniteStructure) -> KObjectResult:
    k = a.size
    descriptors = tuple(New((i, x)) for i in (0, 1) for x in a.elements)
    structure = FiniteStructure(a.tag, tuple(range(2 * k)))
    eta = Morphism(a, structure, tuple((1 << j) | (1 << (k + j)) for j in range(k)), MorphismKind.EMBEDDING)
    return KObjectResult(a, structure, eta, descriptors)


def boolean_retraction(k_result: KObjectResult) -> Morphism:
    """r: K(B(A)) -> B(A) with ⟨0,a⟩ ↦ a and ⟨1,a⟩ ↦ 0, so that r ∘ η = id."""
    a = k_result.base
    images = tuple(a.bit(d.payload[1]) if d.payload[0] == 0 else 0 for d in k_result.descriptors)
    return Morphism(k_result.structure, a, images, MorphismKind.HOMOMORPHISM)


# ---------------------------------------------------------------------------
# K on morphisms
# ---------------------------------------------------------------------------

def check_k_applicable(f: Morphism) -> None:
    """Raise ContractError unless K is defined on f for its class."""
    tag = f.source.tag
    if f.kind is MorphismKind.HOMOMORPHISM and not tag.allows_homomorphisms:
        raise ContractError(f"{tag} is a category of embeddings; K is not defined on homomorphisms")
    if tag.kind is ClassKind.DIGRAPH and not f.is_injective:
        raise ContractError("K on digraphs needs an injective map: a collapse can turn an in/out pair into a 2-cycle")


def push_descriptor(descriptor: KElement, f: Morphism) -> KElement:
    """The image of one element of K(A) under K(f), as a descriptor over f.target."""
    tag = f.source.tag
    if tag.is_boolean:
        raise ContractError("Boolean atoms of K(A) map to joins, not to single descriptors")
    if tag.is_metric:
        return metric.push_sphere_descriptor(descriptor, f)
    if isinstance(descriptor, Old):
        return Old(f(descriptor.element))
    p = descriptor.payload
    kind = tag.kind
    if tag.is_graph_like:
        return New(frozenset(f(x) for x in p))
    if kind is ClassKind.TOURNAMENT:
        return New(tuple(f(x) for x in p))
    if kind is ClassKind.DIGRAPH:
        ins, outs = frozenset(f(x) for x in p[0]), frozenset(f(x) for x in p[1])
        if ins & outs:
            raise ContractError("digraph payload collapsed: in-set and out-set meet")
        return New((ins, outs))
    if kind is ClassKind.POSET:
        ups, downs = frozenset(f(x) for x in p[0]), frozenset(f(x) for x in p[1])
        meet = ups & downs
        if meet:
            (x,) = tuple(meet)
            return Old(x)
        return New((ups, downs))
    return _push_cut(p, f)


def _push_cut(cut: Tuple[FrozenSet[Any], FrozenSet[Any]], f: Morphism) -> KElement:
    target = f.target
    lower, upper = cut
    if f.is_injective:
        images = {f(v) for v in upper}
        w = frozenset(b for b in target.elements if any((y, b) in target.relation for y in images))
        return New((frozenset(target.elements) - w, w))
    if not upper:
        return New((frozenset(target.elements), frozenset()))
    source = f.source
    least = min(upper, key=lambda x: len(source.predecessors[x]))
    return Old(f(least))


def k_morphism(
    f: Morphism,
    *,
    source_k: Optional[KObjectResult] = None,
    target_k: Optional[KObjectResult] = None,
    max_elements: int = DEFAULT_LEVEL_BUDGET,
) -> Morphism:
    """K(f): K(A) -> K(B), of the same kind as f.

    Raises:
        ContractError: K is not defined on f's kind for this class.
    """
    check_k_applicable(f)
    source_k = source_k or k_object(f.source, max_elements=max_elements)
    target_k = target_k or k_object(f.target, max_elements=max_elements)
    if source_k.base != f.source or target_k.base != f.target:
        raise ContractError("K-object results do not match the morphism's source and target")
    if f.source.tag.is_boolean:
        width = f.target.size
        images = []
        for d in source_k.descriptors:
            i, x = d.payload
            images.append(f(x) << (i * width))
        return Morphism(source_k.structure, target_k.structure, tuple(images), f.kind)
    images = tuple(target_k.element_for(push_descriptor(d, f)) for d in source_k.descriptors)
    return Morphism(source_k.structure, target_k.structure, images, f.kind)


# ---------------------------------------------------------------------------
# Resolution of one-point extensions
# ---------------------------------------------------------------------------

def descriptor_for_type(a: FiniteStructure, types: Sequence[Any]) -> KElement:
    """The New element of K(A) realizing the given pair types over A's elements."""
    tag = a.tag
    kind = tag.kind
    elems = a.elements
    if tag.is_metric:
        return New(metric.KatetovFunction(a, tuple(types)))
    if tag.is_graph_like:
        return New(frozenset(x for x, t in zip(elems, types) if t))
    if kind is ClassKind.TOURNAMENT:
        return New(tuple(x for x, t in zip(elems, types) if t[1]))
    if kind is ClassKind.DIGRAPH:
        return New((frozenset(x for x, t in zip(elems, types) if t[1]), frozenset(x for x, t in zip(elems, types) if t[0])))
    if kind in (ClassKind.POSET, ClassKind.LINEAR_ORDER):
        below = frozenset(x for x, t in zip(elems, types) if t[1])
        above = frozenset(x for x, t in zip(elems, types) if t[0])
        return New((below, above))
    raise ContractError("Boolean extensions are resolved by their splitting pattern")


def resolve_extension(e: OnePointExtension, k_result: Optional[KObjectResult] = None) -> Morphism:
    """Embedding g: e.extension ↪ K(A) with g ∘ e.inclusion = η_A."""
    a = e.base
    k_result = k_result or k_object(a)
    if a.tag.is_metric:
        return metric.realize_metric_extension(e, k_result)
    if a.tag.is_boolean:
        return _resolve_boolean(e, k_result)
    descriptor = descriptor_for_type(a, e.type_over_base())
    new_id = k_result.element_for(descriptor)
    back = {image: x for x, image in zip(a.elements, e.inclusion.images)}
    images = []
    for y in e.extension.elements:
        if y == e.new_element:
            images.append(new_id)
        elif y in back:
            images.append(k_result.element_for(Old(back[y])))
        else:
            raise StructuralError(f"{y!r} is neither the new element nor in the image of the base")
    return Morphism(e.extension, k_result.structure, tuple(images), MorphismKind.EMBEDDING)


def _resolve_boolean(e: OnePointExtension, k_result: KObjectResult) -> Morphism:
    a = e.base
    k = a.size
    x = e.new_element
    images = [0] * e.extension.size
    for j, cell in enumerate(e.inclusion.images):
        zero, one = 1 << j, 1 << (k + j)
        split = bool(cell & x) and bool(cell & ~x)
        for i in range(e.extension.size):
            if cell >> i & 1:
                if not split:
                    images[i] = zero | one
                else:
                    images[i] = zero if x >> i & 1 else one
    return Morphism(e.extension, k_result.structure, tuple(images), MorphismKind.EMBEDDING)
