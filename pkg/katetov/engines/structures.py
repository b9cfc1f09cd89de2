"""Finite structures, morphisms and one-point extensions.

Covers the seven discrete classes (graphs, Kn-free graphs, digraphs, linear
orders, posets, tournaments, Boolean algebras) plus q-discretized rational
metric spaces. Everything here is immutable and brute force: the module is
the test oracle the functor, tower and limit code is checked against.

Conventions:
    - Element ids are hashable tokens; the order of ``FiniteStructure.elements``
      is the total order every enumeration derives from.
    - Graph edges are stored as 2-element frozensets, digraph and tournament
      arcs as ordered pairs, order relations as reflexive ``(x, y)`` pairs
      meaning ``x <= y``.
    - A Boolean algebra is stored by its atoms. Carrier elements are bitsets
      (ints) over the atom order, and Boolean morphisms send each atom to a
      bitset of target atoms.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, FrozenSet, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from ..errors import CapacityError, ContractError, StructuralError
from ..validator import ValidationResult

logger = logging.getLogger(__name__)

Element = Hashable

DEFAULT_ISO_CAP = 9
DEFAULT_EXTENSION_CAP = 9


# ---------------------------------------------------------------------------
# Class tags
# ---------------------------------------------------------------------------

class ClassKind(str, Enum):
    GRAPH = "graph"
    KN_FREE = "kn-free"
    DIGRAPH = "digraph"
    LINEAR_ORDER = "linear-order"
    POSET = "poset"
    TOURNAMENT = "tournament"
    BOOLEAN_ALGEBRA = "boolean-algebra"
    METRIC = "metric"


@dataclass(frozen=True)
class ClassTag:
    """Which class a structure belongs to, with its parameter if any."""

    kind: ClassKind
    param: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is ClassKind.KN_FREE:
            if not isinstance(self.param, int) or self.param < 3:
                raise ContractError(f"kn-free needs n >= 3, got {self.param!r}")
        elif self.kind is ClassKind.METRIC:
            if not isinstance(self.param, int) or self.param < 1:
                raise ContractError(f"metric needs a positive denominator q, got {self.param!r}")
        elif self.param is not None:
            raise ContractError(f"{self.kind.value} takes no parameter, got {self.param!r}")

    @classmethod
    def graph(cls) -> ClassTag:
        return cls(ClassKind.GRAPH)

    @classmethod
    def kn_free(cls, n: int) -> ClassTag:
        return cls(ClassKind.KN_FREE, n)

    @classmethod
    def digraph(cls) -> ClassTag:
        return cls(ClassKind.DIGRAPH)

    @classmethod
    def linear_order(cls) -> ClassTag:
        return cls(ClassKind.LINEAR_ORDER)

    @classmethod
    def poset(cls) -> ClassTag:
        return cls(ClassKind.POSET)

    @classmethod
    def tournament(cls) -> ClassTag:
        return cls(ClassKind.TOURNAMENT)

    @classmethod
    def boolean_algebra(cls) -> ClassTag:
        return cls(ClassKind.BOOLEAN_ALGEBRA)

    @classmethod
    def metric(cls, q: int) -> ClassTag:
        return cls(ClassKind.METRIC, q)

    @classmethod
    def parse(cls, name: str, param: Optional[int] = None) -> ClassTag:
        """Build a tag from its CLI/JSON name."""
        try:
            kind = ClassKind(name)
        except ValueError as exc:
            known = ", ".join(k.value for k in ClassKind)
            raise ContractError(f"unknown class {name!r} (known: {known})") from exc
        if kind in (ClassKind.KN_FREE, ClassKind.METRIC):
            return cls(kind, param)
        return cls(kind)

    @property
    def n(self) -> int:
        if self.kind is not ClassKind.KN_FREE:
            raise ContractError(f"{self} has no clique parameter")
        return int(self.param)  # type: ignore[arg-type]

    @property
    def q(self) -> int:
        if self.kind is not ClassKind.METRIC:
            raise ContractError(f"{self} has no denominator")
        return int(self.param)  # type: ignore[arg-type]

    @property
    def is_graph_like(self) -> bool:
        return self.kind in (ClassKind.GRAPH, ClassKind.KN_FREE)

    @property
    def is_directed(self) -> bool:
        return self.kind in (ClassKind.DIGRAPH, ClassKind.TOURNAMENT)

    @property
    def is_order(self) -> bool:
        return self.kind in (ClassKind.POSET, ClassKind.LINEAR_ORDER)

    @property
    def is_boolean(self) -> bool:
        return self.kind is ClassKind.BOOLEAN_ALGEBRA

    @property
    def is_metric(self) -> bool:
        return self.kind is ClassKind.METRIC

    @property
    def allows_homomorphisms(self) -> bool:
        """Kn-free graphs and tournaments are categories of embeddings only."""
        return self.kind not in (ClassKind.KN_FREE, ClassKind.TOURNAMENT)

    def params(self) -> Dict[str, int]:
        if self.kind is ClassKind.KN_FREE:
            return {"n": self.n}
        if self.kind is ClassKind.METRIC:
            return {"q": self.q}
        return {}

    def __str__(self) -> str:
        if self.kind is ClassKind.KN_FREE:
            return f"kn-free({self.param})"
        if self.kind is ClassKind.METRIC:
            return f"metric(q={self.param})"
        return self.kind.value


# ---------------------------------------------------------------------------
# Structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteStructure:
    """A finite model of one class.

    ``relation`` holds edges, arcs or order pairs depending on the class;
    ``distances`` is the distance matrix (metric class only), aligned with
    ``elements``.
    """

    tag: ClassTag
    elements: Tuple[Element, ...]
    relation: FrozenSet[Any] = frozenset()
    distances: Tuple[Tuple[Fraction, ...], ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.elements)) != len(self.elements):
            raise StructuralError(f"duplicate element ids in {self.tag} structure")
        if self.tag.is_metric:
            n = len(self.elements)
            if len(self.distances) != n or any(len(row) != n for row in self.distances):
                raise StructuralError("distance matrix shape does not match the element count")
        elif self.distances:
            raise StructuralError(f"{self.tag} structures carry no distances")

    # -- basic access -------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)

    def __contains__(self, x: object) -> bool:
        return x in self.position

    @cached_property
    def position(self) -> Dict[Element, int]:
        return {x: i for i, x in enumerate(self.elements)}

    def index_of(self, x: Element) -> int:
        try:
            return self.position[x]
        except (KeyError, TypeError):
            raise StructuralError(f"element {x!r} is not in this {self.tag} structure") from None

    # -- relations ------------------------------------------------------------

    def related(self, x: Element, y: Element) -> bool:
        if self.tag.is_graph_like:
            return frozenset((x, y)) in self.relation
        return (x, y) in self.relation

    @cached_property
    def successors(self) -> Dict[Element, FrozenSet[Element]]:
        """Elements related to x, excluding x itself (neighbours for graphs)."""
        out: Dict[Element, set] = {x: set() for x in self.elements}
        if self.tag.is_graph_like:
            for edge in self.relation:
                if len(edge) == 2:
                    a, b = tuple(edge)
                    out[a].add(b)
                    out[b].add(a)
        elif not self.tag.is_boolean and not self.tag.is_metric:
            for a, b in self.relation:
                if a != b:
                    out[a].add(b)
        return {x: frozenset(v) for x, v in out.items()}

    @cached_property
    def predecessors(self) -> Dict[Element, FrozenSet[Element]]:
        inn: Dict[Element, set] = {x: set() for x in self.elements}
        for x, ys in self.successors.items():
            for y in ys:
                inn[y].add(x)
        return {x: frozenset(v) for x, v in inn.items()}

    def dist(self, x: Element, y: Element) -> Fraction:
        return self.distances[self.index_of(x)][self.index_of(y)]

    # -- Boolean carrier ------------------------------------------------------

    @property
    def full(self) -> int:
        return (1 << len(self.elements)) - 1

    def bit(self, atom: Element) -> int:
        return 1 << self.index_of(atom)

    def atoms_of(self, bits: int) -> Tuple[Element, ...]:
        return tuple(a for i, a in enumerate(self.elements) if bits >> i & 1)

    def carrier(self) -> Iterator[int]:
        return iter(range(self.full + 1))

    def describe(self) -> str:
        return f"{self.tag} structure with {self.size} {'atoms' if self.tag.is_boolean else 'elements'}"


def pair_type(s: FiniteStructure, x: Element, y: Element) -> Any:
    """Quantifier-free type of the ordered pair (x, y) for x != y.

    An injective map between structures of one class is an embedding exactly
    when it preserves pair types.
    """
    tag = s.tag
    if tag.is_graph_like:
        return frozenset((x, y)) in s.relation
    if tag.is_directed or tag.is_order:
        return ((x, y) in s.relation, (y, x) in s.relation)
    if tag.is_metric:
        return s.dist(x, y)
    raise ContractError("Boolean algebras have no pair types; use carrier bitsets")


def realized_type(s: FiniteStructure, x: Element, anchors: Sequence[Element]) -> Tuple[Any, ...]:
    """Type of x over the anchors, as the tuple of pair types."""
    return tuple(pair_type(s, x, a) for a in anchors)


def element_signature(s: FiniteStructure, x: Element) -> Any:
    """Isomorphism-invariant label used to prune permutation search."""
    if s.tag.is_metric:
        i = s.index_of(x)
        return tuple(sorted(s.distances[i]))
    if s.tag.is_boolean:
        return 0
    if s.tag.is_graph_like:
        return len(s.successors[x])
    return (len(s.successors[x]), len(s.predecessors[x]))


# -- constructors -------------------------------------------------------------

def graph(elements: Iterable[Element], edges: Iterable[Iterable[Element]] = (), *, n: Optional[int] = None) -> FiniteStructure:
    """Graph (or Kn-free graph when ``n`` is given)."""
    tag = ClassTag.kn_free(n) if n is not None else ClassTag.graph()
    return FiniteStructure(tag, tuple(elements), frozenset(frozenset(e) for e in edges))


def digraph(elements: Iterable[Element], arcs: Iterable[Tuple[Element, Element]] = ()) -> FiniteStructure:
    return FiniteStructure(ClassTag.digraph(), tuple(elements), frozenset(tuple(a) for a in arcs))


def tournament(elements: Iterable[Element], arcs: Iterable[Tuple[Element, Element]] = ()) -> FiniteStructure:
    return FiniteStructure(ClassTag.tournament(), tuple(elements), frozenset(tuple(a) for a in arcs))


def poset(elements: Iterable[Element], pairs: Iterable[Tuple[Element, Element]] = ()) -> FiniteStructure:
    """Poset from ``x <= y`` pairs; reflexive pairs are added."""
    elems = tuple(elements)
    rel = {(x, x) for x in elems} | {tuple(p) for p in pairs}
    return FiniteStructure(ClassTag.poset(), elems, frozenset(rel))


def linear_order(elements: Iterable[Element]) -> FiniteStructure:
    """Chain in the given order."""
    elems = tuple(elements)
    rel = frozenset((elems[i], elems[j]) for i in range(len(elems)) for j in range(i, len(elems)))
    return FiniteStructure(ClassTag.linear_order(), elems, rel)


def boolean_algebra(atoms: Iterable[Element]) -> FiniteStructure:
    return FiniteStructure(ClassTag.boolean_algebra(), tuple(atoms))


def metric_space(elements: Iterable[Element], matrix: Sequence[Sequence[Any]], q: int) -> FiniteStructure:
    """Metric space on the 1/q grid; matrix entries may be ints, strings or Fractions."""
    rows = tuple(tuple(Fraction(v) for v in row) for row in matrix)
    return FiniteStructure(ClassTag.metric(q), tuple(elements), distances=rows)


def empty_structure(tag: ClassTag) -> FiniteStructure:
    if tag.is_boolean:
        raise ContractError("a Boolean algebra needs at least one atom")
    return FiniteStructure(tag, (), frozenset(), () if tag.is_metric else ())


PRESETS = ("empty", "k1", "edge")


def preset(tag: ClassTag, name: str) -> FiniteStructure:
    """Named seed structures: ``empty``, ``k1`` (one element), ``edge`` (two related elements).

    The Boolean ``empty`` preset is the two-element algebra B(1), since the
    trivial algebra is excluded.
    """
    if name not in PRESETS:
        raise ContractError(f"unknown preset {name!r} (known: {', '.join(PRESETS)})")
    kind = tag.kind
    if name == "empty":
        return boolean_algebra(("a",)) if tag.is_boolean else empty_structure(tag)
    elems: Tuple[str, ...] = ("a",) if name == "k1" else ("a", "b")
    two = name == "edge"
    if tag.is_graph_like:
        return FiniteStructure(tag, elems, frozenset([frozenset(elems)]) if two else frozenset())
    if kind is ClassKind.DIGRAPH:
        return digraph(elems, [("a", "b")] if two else [])
    if kind is ClassKind.TOURNAMENT:
        return tournament(elems, [("a", "b")] if two else [])
    if kind is ClassKind.POSET:
        return poset(elems, [("a", "b")] if two else [])
    if kind is ClassKind.LINEAR_ORDER:
        return linear_order(elems)
    if kind is ClassKind.BOOLEAN_ALGEBRA:
        return boolean_algebra(elems)
    matrix = [[0, 1], [1, 0]] if two else [[0]]
    return metric_space(elems, matrix, tag.q)


def fresh_element(s: FiniteStructure, avoid: Iterable[Element] = ()) -> Element:
    """A new id: next integer for integer-labelled structures, else ``x``, ``x1``, ..."""
    taken = set(s.elements) | set(avoid)
    if all(isinstance(x, int) and not isinstance(x, bool) for x in taken):
        return max(taken, default=-1) + 1
    candidate = "x"
    counter = 0
    while candidate in taken:
        counter += 1
        candidate = f"x{counter}"
    return candidate


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def max_clique_size(s: FiniteStructure, subset: Optional[Iterable[Element]] = None) -> int:
    """Largest clique of a graph (optionally induced on ``subset``), via networkx."""
    g = to_networkx(s)
    if subset is not None:
        g = g.subgraph(list(subset))
    return max((len(c) for c in nx.find_cliques(g)), default=0)


def to_networkx(s: FiniteStructure) -> nx.Graph:
    if s.tag.is_graph_like:
        g = nx.Graph()
        g.add_nodes_from(s.elements)
        g.add_edges_from(tuple(e) for e in s.relation if len(e) == 2)
        return g
    if s.tag.is_directed or s.tag.is_order:
        d = nx.DiGraph()
        d.add_nodes_from(s.elements)
        d.add_edges_from((a, b) for a, b in s.relation if a != b)
        return d
    raise ContractError(f"{s.tag} has no graph view")


def validate(s: FiniteStructure) -> ValidationResult:
    """Check the class axioms; ``errors[0]`` names the first violated one."""
    tag = s.tag
    known = s.position

    if tag.is_boolean:
        if not s.elements:
            return ValidationResult.fail("boolean algebra needs at least one atom")
        if s.relation:
            return ValidationResult.fail("boolean algebra carries no relation payload")
        return ValidationResult.ok()

    if tag.is_metric:
        return _validate_metric(s)

    if tag.is_graph_like:
        for edge in s.relation:
            if not isinstance(edge, frozenset):
                return ValidationResult.fail(f"edge {edge!r} is not an unordered pair")
            if len(edge) == 1:
                (v,) = tuple(edge)
                return ValidationResult.fail(f"irreflexive violated: loop at {v!r}")
            if len(edge) != 2:
                return ValidationResult.fail(f"edge {set(edge)!r} is not a 2-subset")
            for v in edge:
                if v not in known:
                    return ValidationResult.fail(f"edge endpoint {v!r} is not an element")
        if tag.kind is ClassKind.KN_FREE and s.elements:
            clique = max_clique_size(s)
            if clique >= tag.n:
                return ValidationResult.fail(f"K{tag.n}-freeness violated: clique of size {clique}")
        return ValidationResult.ok()

    for pair in s.relation:
        if not (isinstance(pair, tuple) and len(pair) == 2):
            return ValidationResult.fail(f"relation member {pair!r} is not an ordered pair")
        for v in pair:
            if v not in known:
                return ValidationResult.fail(f"relation endpoint {v!r} is not an element")

    if tag.is_directed:
        for a, b in sorted(s.relation, key=lambda p: (known[p[0]], known[p[1]])):
            if a == b:
                return ValidationResult.fail(f"irreflexive violated: loop at {a!r}")
            if (b, a) in s.relation:
                return ValidationResult.fail(f"antisymmetry violated: both ({a!r},{b!r}) and ({b!r},{a!r})")
        if tag.kind is ClassKind.TOURNAMENT:
            for x, y in itertools.combinations(s.elements, 2):
                if (x, y) not in s.relation and (y, x) not in s.relation:
                    return ValidationResult.fail(f"tournament violated: no arc between {x!r} and {y!r}")
        return ValidationResult.ok()

    # orders
    for x in s.elements:
        if (x, x) not in s.relation:
            return ValidationResult.fail(f"reflexivity violated at {x!r}")
    for a, b in s.relation:
        if a != b and (b, a) in s.relation:
            return ValidationResult.fail(f"antisymmetry violated between {a!r} and {b!r}")
    succ = s.successors
    for a in s.elements:
        for b in succ[a]:
            for c in succ[b]:
                if c != a and (a, c) not in s.relation:
                    return ValidationResult.fail(f"transitivity violated: {a!r} <= {b!r} <= {c!r}")
    if tag.kind is ClassKind.LINEAR_ORDER:
        for x, y in itertools.combinations(s.elements, 2):
            if (x, y) not in s.relation and (y, x) not in s.relation:
                return ValidationResult.fail(f"totality violated: {x!r} and {y!r} incomparable")
    return ValidationResult.ok()


def _validate_metric(s: FiniteStructure) -> ValidationResult:
    d = s.distances
    n = s.size
    q = s.tag.q
    for i in range(n):
        if d[i][i] != 0:
            return ValidationResult.fail(f"d(x,x) = 0 violated at {s.elements[i]!r}")
    for i, j in itertools.combinations(range(n), 2):
        if d[i][j] != d[j][i]:
            return ValidationResult.fail(f"symmetry violated between {s.elements[i]!r} and {s.elements[j]!r}")
        if d[i][j] <= 0:
            return ValidationResult.fail(f"distinct points {s.elements[i]!r}, {s.elements[j]!r} at distance {d[i][j]}")
    for i, j, k in itertools.permutations(range(n), 3):
        if d[i][k] > d[i][j] + d[j][k]:
            return ValidationResult.fail(
                f"triangle inequality violated: d({s.elements[i]!r},{s.elements[k]!r}) = {d[i][k]} "
                f"> {d[i][j]} + {d[j][k]}"
            )
    for i, j in itertools.combinations(range(n), 2):
        value = d[i][j]
        if value > 1:
            return ValidationResult.fail(f"distance {value} outside [0, 1]")
        if (value * q).denominator != 1:
            return ValidationResult.fail(f"distance {value} is off the 1/{q} grid")
    return ValidationResult.ok()


# ---------------------------------------------------------------------------
# Morphisms
# ---------------------------------------------------------------------------

class MorphismKind(str, Enum):
    HOMOMORPHISM = "homomorphism"
    EMBEDDING = "embedding"
    ISOMORPHISM = "isomorphism"

    @property
    def rank(self) -> int:
        return {"homomorphism": 0, "embedding": 1, "isomorphism": 2}[self.value]


def weakest(*kinds: MorphismKind) -> MorphismKind:
    return min(kinds, key=lambda k: k.rank)


@dataclass(frozen=True)
class Morphism:
    """Element map ``source -> target`` stored as images aligned with ``source.elements``."""

    source: FiniteStructure
    target: FiniteStructure
    images: Tuple[Any, ...]
    kind: MorphismKind = MorphismKind.HOMOMORPHISM

    def __post_init__(self) -> None:
        if len(self.images) != self.source.size:
            raise StructuralError(
                f"morphism has {len(self.images)} images for {self.source.size} source elements"
            )

    def __call__(self, x: Element) -> Any:
        return self.images[self.source.index_of(x)]

    @cached_property
    def mapping(self) -> Dict[Element, Any]:
        return dict(zip(self.source.elements, self.images))

    @cached_property
    def is_injective(self) -> bool:
        return len(set(self.images)) == len(self.images)

    def apply(self, x: Any) -> Any:
        """Image of an element, or of a carrier bitset for Boolean algebras."""
        if self.source.tag.is_boolean:
            return carrier_image(self, x)
        return self(x)

    def with_kind(self, kind: MorphismKind) -> Morphism:
        return Morphism(self.source, self.target, self.images, kind)

    def same_map(self, other: Morphism) -> bool:
        return self.source == other.source and self.target == other.target and self.images == other.images


def carrier_image(f: Morphism, bits: int) -> int:
    out = 0
    i = 0
    while bits:
        if bits & 1:
            out |= f.images[i]
        bits >>= 1
        i += 1
    return out


def identity(s: FiniteStructure) -> Morphism:
    if s.tag.is_boolean:
        return Morphism(s, s, tuple(1 << i for i in range(s.size)), MorphismKind.ISOMORPHISM)
    return Morphism(s, s, s.elements, MorphismKind.ISOMORPHISM)


def compose(g: Morphism, f: Morphism) -> Morphism:
    """``g ∘ f``; the kind is the weaker of the two."""
    if f.target is not g.source and f.target != g.source:
        raise ContractError("cannot compose: target of f is not the source of g")
    images = tuple(g.apply(y) for y in f.images)
    return Morphism(f.source, g.target, images, weakest(f.kind, g.kind))


def inverse(f: Morphism) -> Morphism:
    if not check_morphism(f.with_kind(MorphismKind.ISOMORPHISM)):
        raise ContractError("only isomorphisms can be inverted")
    if f.source.tag.is_boolean:
        images = [0] * f.target.size
        for i, b in enumerate(f.images):
            images[b.bit_length() - 1] = 1 << i
        return Morphism(f.target, f.source, tuple(images), MorphismKind.ISOMORPHISM)
    back = {y: x for x, y in zip(f.source.elements, f.images)}
    return Morphism(f.target, f.source, tuple(back[y] for y in f.target.elements), MorphismKind.ISOMORPHISM)


def make_morphism(
    source: FiniteStructure,
    target: FiniteStructure,
    mapping: Mapping[Element, Any],
    kind: MorphismKind = MorphismKind.HOMOMORPHISM,
) -> Morphism:
    """Validating constructor: raises if the map is not of the declared kind."""
    extra = [x for x in mapping if x not in source]
    if extra:
        raise StructuralError(f"map mentions {extra[0]!r}, which is not a source element")
    missing = [x for x in source.elements if x not in mapping]
    if missing:
        raise StructuralError(f"map is not total: {missing[0]!r} has no image")
    f = Morphism(source, target, tuple(mapping[x] for x in source.elements), kind)
    report = check_morphism(f)
    if not report:
        raise ContractError(f"not a {kind.value}: {report.first_error}")
    return f


def check_morphism(f: Morphism) -> ValidationResult:
    """True iff the map satisfies its declared kind.

    Raises:
        StructuralError: an image is not an element (or carrier element) of the target.
    """
    src, tgt = f.source, f.target
    if src.tag != tgt.tag:
        return ValidationResult.fail(f"class mismatch: {src.tag} -> {tgt.tag}")
    if src.tag.is_boolean:
        return _check_boolean_morphism(f)

    for y in f.images:
        if y not in tgt:
            raise StructuralError(f"image {y!r} is not an element of the target")

    m = f.mapping
    tag = src.tag
    if tag.is_metric:
        for x, y in itertools.combinations(src.elements, 2):
            if tgt.dist(m[x], m[y]) > src.dist(x, y):
                return ValidationResult.fail(
                    f"not nonexpansive: d({x!r},{y!r}) = {src.dist(x, y)} grows to {tgt.dist(m[x], m[y])}"
                )
    elif tag.is_graph_like:
        for edge in src.relation:
            a, b = tuple(edge)
            if m[a] == m[b]:
                return ValidationResult.fail(f"edge {{{a!r},{b!r}}} collapsed to one vertex (loops forbidden)")
            if frozenset((m[a], m[b])) not in tgt.relation:
                return ValidationResult.fail(f"edge {{{a!r},{b!r}}} not preserved")
    else:
        for a, b in src.relation:
            if (m[a], m[b]) not in tgt.relation:
                return ValidationResult.fail(f"pair ({a!r},{b!r}) not preserved")

    if f.kind is MorphismKind.HOMOMORPHISM:
        return ValidationResult.ok()

    if not f.is_injective:
        return ValidationResult.fail("not injective")
    for x, y in itertools.combinations(src.elements, 2):
        if pair_type(src, x, y) != pair_type(tgt, m[x], m[y]):
            return ValidationResult.fail(f"pair ({x!r},{y!r}) is not reflected")
    if f.kind is MorphismKind.ISOMORPHISM and src.size != tgt.size:
        return ValidationResult.fail("not surjective")
    return ValidationResult.ok()


def _check_boolean_morphism(f: Morphism) -> ValidationResult:
    full = f.target.full
    seen = 0
    for atom, bits in zip(f.source.elements, f.images):
        if not isinstance(bits, int) or bits < 0 or bits > full:
            raise StructuralError(f"image of atom {atom!r} is not a carrier element of the target")
        if seen & bits:
            return ValidationResult.fail(f"image of atom {atom!r} meets an earlier image (meets not preserved)")
        seen |= bits
    if seen != full:
        return ValidationResult.fail("images do not join to the top element")
    if f.kind is MorphismKind.HOMOMORPHISM:
        return ValidationResult.ok()
    for atom, bits in zip(f.source.elements, f.images):
        if bits == 0:
            return ValidationResult.fail(f"atom {atom!r} sent to 0 (not injective)")
    if f.kind is MorphismKind.ISOMORPHISM and any(b.bit_count() != 1 for b in f.images):
        return ValidationResult.fail("not surjective")
    return ValidationResult.ok()


def enumerate_morphisms(
    source: FiniteStructure, target: FiniteStructure, kind: MorphismKind = MorphismKind.HOMOMORPHISM
) -> Iterator[Morphism]:
    """All morphisms of the given kind, by brute force (desk-scale sizes only)."""
    if source.tag.is_boolean:
        # a Boolean hom is a function from target atoms to source atoms
        for assignment in itertools.product(range(source.size), repeat=target.size):
            images = [0] * source.size
            for j, i in enumerate(assignment):
                images[i] |= 1 << j
            f = Morphism(source, target, tuple(images), kind)
            if check_morphism(f):
                yield f
        return
    for images in itertools.product(target.elements, repeat=source.size):
        f = Morphism(source, target, tuple(images), kind)
        if check_morphism(f):
            yield f


# ---------------------------------------------------------------------------
# Substructures
# ---------------------------------------------------------------------------

def substructure(s: FiniteStructure, subset: Iterable[Element]) -> Tuple[FiniteStructure, Morphism]:
    """Induced substructure on ``subset`` (kept in the order of ``s``) and its inclusion."""
    if s.tag.is_boolean:
        raise ContractError("use generated_subalgebra for Boolean algebras")
    chosen = set(subset)
    for x in chosen:
        s.index_of(x)
    elems = tuple(x for x in s.elements if x in chosen)
    if s.tag.is_metric:
        idx = [s.index_of(x) for x in elems]
        rows = tuple(tuple(s.distances[i][j] for j in idx) for i in idx)
        sub = FiniteStructure(s.tag, elems, frozenset(), rows)
    elif s.tag.is_graph_like:
        sub = FiniteStructure(s.tag, elems, frozenset(e for e in s.relation if e <= chosen))
    else:
        sub = FiniteStructure(s.tag, elems, frozenset(p for p in s.relation if p[0] in chosen and p[1] in chosen))
    return sub, Morphism(sub, s, elems, MorphismKind.EMBEDDING)


def generated_subalgebra(s: FiniteStructure, generators: Iterable[int]) -> Tuple[FiniteStructure, Morphism]:
    """Subalgebra generated by carrier elements, closing under meet, join and complement.

    Its atoms are the nonempty cells of the partition the generators induce;
    each cell is named by its first atom.
    """
    if not s.tag.is_boolean:
        raise ContractError("generated_subalgebra needs a Boolean algebra")
    gens = list(generators)
    for g in gens:
        if not 0 <= g <= s.full:
            raise StructuralError(f"{g!r} is not a carrier element")
    cells: Dict[Tuple[bool, ...], int] = {}
    for i in range(s.size):
        signature = tuple(bool(g >> i & 1) for g in gens)
        cells[signature] = cells.get(signature, 0) | (1 << i)
    ordered = sorted(cells.values(), key=lambda bits: (bits & -bits).bit_length())
    names = tuple(s.elements[(bits & -bits).bit_length() - 1] for bits in ordered)
    sub = boolean_algebra(names)
    return sub, Morphism(sub, s, tuple(ordered), MorphismKind.EMBEDDING)


# ---------------------------------------------------------------------------
# Isomorphism search
# ---------------------------------------------------------------------------

def iso_test(a: FiniteStructure, b: FiniteStructure, *, cap: int = DEFAULT_ISO_CAP) -> Optional[Morphism]:
    """A witnessing isomorphism ``a -> b`` or None; deterministic.

    Raises:
        CapacityError: when the structures exceed ``cap`` elements.
    """
    if a.tag != b.tag or a.size != b.size:
        return None
    if a.size > cap:
        raise CapacityError(f"iso_test is capped at {cap} elements, got {a.size}", size=a.size, limit=cap)
    if a.tag.is_boolean:
        return Morphism(a, b, tuple(1 << i for i in range(a.size)), MorphismKind.ISOMORPHISM)
    for m in _isomorphisms(a, b):
        return Morphism(a, b, tuple(m[x] for x in a.elements), MorphismKind.ISOMORPHISM)
    return None


def _isomorphisms(a: FiniteStructure, b: FiniteStructure) -> Iterator[Dict[Element, Element]]:
    sig_a = {x: element_signature(a, x) for x in a.elements}
    sig_b = {y: element_signature(b, y) for y in b.elements}
    if sorted(map(repr, sig_a.values())) != sorted(map(repr, sig_b.values())):
        return
    order = list(a.elements)
    assigned: Dict[Element, Element] = {}
    used: set = set()

    def extend(i: int) -> Iterator[Dict[Element, Element]]:
        if i == len(order):
            yield dict(assigned)
            return
        x = order[i]
        for y in b.elements:
            if y in used or sig_b[y] != sig_a[x]:
                continue
            if all(pair_type(a, x, order[j]) == pair_type(b, y, assigned[order[j]]) for j in range(i)):
                assigned[x] = y
                used.add(y)
                yield from extend(i + 1)
                del assigned[x]
                used.discard(y)

    yield from extend(0)


def automorphisms(a: FiniteStructure, *, cap: int = DEFAULT_ISO_CAP) -> List[Morphism]:
    if a.size > cap:
        raise CapacityError(f"automorphism search is capped at {cap} elements", size=a.size, limit=cap)
    if a.tag.is_boolean:
        out = []
        for perm in itertools.permutations(range(a.size)):
            out.append(Morphism(a, a, tuple(1 << p for p in perm), MorphismKind.ISOMORPHISM))
        return out
    return [Morphism(a, a, tuple(m[x] for x in a.elements), MorphismKind.ISOMORPHISM) for m in _isomorphisms(a, a)]


# ---------------------------------------------------------------------------
# One-point extensions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OnePointExtension:
    """``inclusion: base ↪ extension`` with extension generated by the image and ``new_element``."""

    base: FiniteStructure
    extension: FiniteStructure
    inclusion: Morphism
    new_element: Any

    def type_over_base(self) -> Tuple[Any, ...]:
        """Pair types of the new element against the included base (relational and metric classes)."""
        return realized_type(self.extension, self.new_element, self.inclusion.images)

    def split_atoms(self) -> Tuple[Element, ...]:
        """Base atoms the new carrier element splits (Boolean algebras)."""
        x = self.new_element
        return tuple(a for a, bits in zip(self.base.elements, self.inclusion.images) if bits & x and bits & ~x)


def validate_extension(e: OnePointExtension) -> ValidationResult:
    if e.inclusion.source != e.base or e.inclusion.target != e.extension:
        return ValidationResult.fail("inclusion does not run from base to extension")
    for name, s in (("base", e.base), ("extension", e.extension)):
        report = validate(s)
        if not report:
            return ValidationResult.fail(f"{name} invalid: {report.first_error}")
    report = check_morphism(e.inclusion.with_kind(MorphismKind.EMBEDDING))
    if not report:
        return ValidationResult.fail(f"inclusion is not an embedding: {report.first_error}")
    if e.base.tag.is_boolean:
        x = e.new_element
        if not isinstance(x, int) or not 0 <= x <= e.extension.full:
            return ValidationResult.fail("new element is not a carrier element")
        sub, _ = generated_subalgebra(e.extension, list(e.inclusion.images) + [x])
        if sub.size != e.extension.size:
            return ValidationResult.fail("extension is not generated by the image and the new element")
        if sub.size == e.base.size:
            return ValidationResult.fail("new element already lies in the image")
        return ValidationResult.ok()
    if e.extension.size != e.base.size + 1:
        return ValidationResult.fail("a one-point extension adds exactly one element")
    if e.new_element not in e.extension or e.new_element in set(e.inclusion.images):
        return ValidationResult.fail("new element must be the single element outside the image")
    return ValidationResult.ok()


def pair_type_options(tag: ClassTag) -> Tuple[Any, ...]:
    """Possible pair types of a new point x against one base point a."""
    if tag.is_graph_like:
        return (False, True)
    if tag.kind is ClassKind.DIGRAPH:
        return ((False, False), (True, False), (False, True))
    if tag.kind is ClassKind.TOURNAMENT or tag.kind is ClassKind.LINEAR_ORDER:
        return ((True, False), (False, True))
    if tag.kind is ClassKind.POSET:
        return ((False, False), (True, False), (False, True))
    if tag.is_metric:
        return tuple(Fraction(k, tag.q) for k in range(1, tag.q + 1))
    raise ContractError("Boolean extensions are atom-splitting patterns, not pair types")


def extend_by_type(a: FiniteStructure, types: Sequence[Any], new_id: Optional[Element] = None) -> OnePointExtension:
    """Add one element whose pair types against ``a.elements`` are ``types``.

    The result is not validated; callers filter through :func:`validate`.
    """
    if len(types) != a.size:
        raise StructuralError("one pair type per base element is required")
    x = fresh_element(a) if new_id is None else new_id
    elems = a.elements + (x,)
    tag = a.tag
    if tag.is_metric:
        rows = [list(row) + [Fraction(t)] for row, t in zip(a.distances, types)]
        rows.append([Fraction(t) for t in types] + [Fraction(0)])
        ext = FiniteStructure(tag, elems, frozenset(), tuple(tuple(r) for r in rows))
    elif tag.is_graph_like:
        ext = FiniteStructure(tag, elems, a.relation | {frozenset((x, b)) for b, t in zip(a.elements, types) if t})
    else:
        rel = set(a.relation)
        if tag.is_order:
            rel.add((x, x))
        for b, (up, down) in zip(a.elements, types):
            if up:
                rel.add((x, b))
            if down:
                rel.add((b, x))
        ext = FiniteStructure(tag, elems, frozenset(rel))
    return OnePointExtension(a, ext, Morphism(a, ext, a.elements, MorphismKind.EMBEDDING), x)


def split_extension(a: FiniteStructure, split: Sequence[Element]) -> OnePointExtension:
    """Boolean one-point extension splitting each atom in ``split`` into two."""
    split_set = set(split)
    fresh: Dict[Element, Element] = {}
    taken: List[Element] = []
    for atom in a.elements:
        if atom in split_set:
            fresh[atom] = fresh_element(a, taken)
            taken.append(fresh[atom])
    ext = boolean_algebra(a.elements + tuple(taken))
    images = tuple(ext.bit(atom) | (ext.bit(fresh[atom]) if atom in fresh else 0) for atom in a.elements)
    x = 0
    for atom in a.elements:
        if atom in fresh:
            x |= ext.bit(atom)
    return OnePointExtension(a, ext, Morphism(a, ext, images, MorphismKind.EMBEDDING), x)


def enumerate_one_point_extensions(a: FiniteStructure, *, cap: int = DEFAULT_EXTENSION_CAP) -> List[OnePointExtension]:
    """All one-point extensions of ``a`` up to isomorphism over ``a`` (fixing ``a`` pointwise)."""
    if a.size > cap:
        raise CapacityError(f"extension enumeration is capped at {cap} elements, got {a.size}", size=a.size, limit=cap)
    if a.tag.is_boolean:
        out = []
        for mask in range(1, 1 << a.size):
            out.append(split_extension(a, [x for i, x in enumerate(a.elements) if mask >> i & 1]))
        return out
    options = pair_type_options(a.tag)
    result: List[OnePointExtension] = []
    for types in itertools.product(options, repeat=a.size):
        e = extend_by_type(a, types)
        if validate(e.extension):
            result.append(e)
    logger.debug("%s: %d one-point extensions", a.describe(), len(result))
    return result


def extension_type_orbits(a: FiniteStructure) -> int:
    """Number of one-point extension types up to the action of Aut(a), by direct orbit computation."""
    types = [e.type_over_base() for e in enumerate_one_point_extensions(a)]
    autos = automorphisms(a)
    seen: set = set()
    orbits = 0
    for t in types:
        if t in seen:
            continue
        orbits += 1
        for sigma in autos:
            seen.add(_permute_type(a, t, sigma))
    return orbits


def burnside_orbit_count(a: FiniteStructure) -> int:
    """Same orbit count through Burnside's lemma: average number of fixed types."""
    types = [e.type_over_base() for e in enumerate_one_point_extensions(a)]
    autos = automorphisms(a)
    fixed = sum(1 for sigma in autos for t in types if _permute_type(a, t, sigma) == t)
    if fixed % len(autos):
        raise AssertionError("Burnside average is not an integer")
    return fixed // len(autos)


def _permute_type(a: FiniteStructure, t: Tuple[Any, ...], sigma: Morphism) -> Tuple[Any, ...]:
    # the type a new point gets when the base is relabelled by sigma
    moved = [None] * a.size
    for i, x in enumerate(a.elements):
        moved[a.index_of(sigma(x))] = t[i]
    return tuple(moved)
