"""Lazy Katětov towers C -> K(C) -> K²(C) -> ... and the extension-property verifier.

Levels are kept disjoint; level ``i+1`` is ``k_object(level[i]).structure`` and
the link between them is its η. A point of the limit is addressed by
``TowerAddress(level, element)``; its canonical form is the lowest level it
appears at. On Boolean towers the element of an address is a carrier bitset.
"""
from __future__ import annotations

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterator, List, Optional, Sequence, Tuple

from ..errors import CapacityError, ContractError, DepthExhaustedError, StructuralError
from ..settings import DEFAULT_LEVEL_BUDGET
from ..validator import ValidationResult
from .classes import k_morphism, k_object, resolve_extension
from .kobject import KObjectResult, Old
from .structures import (
    DEFAULT_EXTENSION_CAP,
    FiniteStructure,
    Morphism,
    MorphismKind,
    OnePointExtension,
    boolean_algebra,
    check_morphism,
    compose,
    enumerate_one_point_extensions,
    extend_by_type,
    generated_subalgebra,
    identity,
    inverse,
    pair_type,
    substructure,
    validate,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TowerAddress:
    level: int
    element: Any

    def to_json(self) -> List[Any]:
        return [self.level, self.element]


class TowerHandle:
    """Memoized chain of K-iterates over a seed.

    Expansion appends levels under a lock and never touches existing ones, so
    levels up to ``frozen_depth`` can be read from any thread.
    """

    def __init__(self, seed: FiniteStructure, *, max_elements: int = DEFAULT_LEVEL_BUDGET):
        report = validate(seed)
        if not report:
            raise ContractError(f"seed is not a valid {seed.tag} structure: {report.first_error}")
        if max_elements <= 0:
            raise ContractError("level budget must be positive")
        self.seed = seed
        self.tag = seed.tag
        self.max_elements = max_elements
        self._levels: List[FiniteStructure] = [seed]
        self._steps: List[KObjectResult] = []
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"TowerHandle({self.tag}, sizes={self.sizes()})"

    # -- expansion ------------------------------------------------------------

    @property
    def frozen_depth(self) -> int:
        return len(self._levels) - 1

    def expand(self, depth: int) -> None:
        """Make sure levels ``0..depth`` exist.

        Raises:
            CapacityError: the next level would exceed the budget.
        """
        if depth < 0:
            raise StructuralError(f"negative tower depth {depth}")
        if depth <= self.frozen_depth:
            return
        with self._lock:
            while len(self._levels) <= depth:
                n = len(self._levels) - 1
                try:
                    step = k_object(self._levels[n], max_elements=self.max_elements)
                except CapacityError as exc:
                    logger.warning("tower %s stopped at level %d: %s", self.tag, n, exc)
                    raise CapacityError(
                        f"level {n + 1} of the {self.tag} tower exceeds the budget: {exc}",
                        size=exc.size,
                        limit=exc.limit,
                    ) from exc
                self._steps.append(step)
                self._levels.append(step.structure)
                logger.info("tower %s: level %d has %d elements", self.tag, n + 1, step.structure.size)

    def level(self, n: int) -> FiniteStructure:
        self.expand(n)
        return self._levels[n]

    def step(self, n: int) -> KObjectResult:
        """K(level[n]) with its descriptors; expands to level ``n + 1``."""
        self.expand(n + 1)
        return self._steps[n]

    def link(self, n: int) -> Morphism:
        return self.step(n).eta

    @property
    def levels(self) -> Tuple[FiniteStructure, ...]:
        return tuple(self._levels)

    @property
    def links(self) -> Tuple[Morphism, ...]:
        return tuple(s.eta for s in self._steps)

    def sizes(self) -> List[int]:
        return [s.size for s in self._levels]

    def eta_power(self, i: int, j: int) -> Morphism:
        """Composed links level[i] -> level[j]."""
        if j < i:
            raise StructuralError(f"cannot map level {i} down to level {j}")
        f = identity(self.level(i))
        for n in range(i, j):
            f = compose(self.link(n), f)
        return f.with_kind(MorphismKind.EMBEDDING) if j > i else f

    # -- addresses ------------------------------------------------------------

    def check_address(self, a: TowerAddress) -> None:
        if a.level < 0:
            raise StructuralError(f"unknown address {a}: negative level")
        lvl = self.level(a.level)
        if self.tag.is_boolean:
            if not isinstance(a.element, int) or not 0 <= a.element <= lvl.full:
                raise StructuralError(f"unknown address {a}: not a carrier element of level {a.level}")
        elif a.element not in lvl:
            raise StructuralError(f"unknown address {a}: no such element at level {a.level}")

    def resolve(self, a: TowerAddress, target_level: int) -> Any:
        """The element ``a`` denotes at ``target_level``."""
        self.check_address(a)
        if target_level < a.level:
            raise StructuralError(f"address {a} does not exist below level {a.level}")
        x = a.element
        for n in range(a.level, target_level):
            x = self.link(n).apply(x)
        return x

    def canonical(self, a: TowerAddress) -> TowerAddress:
        """Lowest-level address of the same limit point."""
        self.check_address(a)
        n, x = a.level, a.element
        while n > 0:
            if self.tag.is_boolean:
                width = self._levels[n - 1].size
                low, high = x & ((1 << width) - 1), x >> width
                if low != high:
                    break
                x = low
            else:
                d = self._steps[n - 1].descriptor_of(x)
                if not isinstance(d, Old):
                    break
                x = d.element
            n -= 1
        return TowerAddress(n, x)

    def fresh_elements(self, n: int) -> Tuple[Any, ...]:
        """Elements (carrier elements for Boolean towers) first appearing at level ``n``."""
        lvl = self.level(n)
        if self.tag.is_boolean:
            carrier = range(lvl.full + 1)
            if n == 0:
                return tuple(carrier)
            width = self._levels[n - 1].size
            return tuple(x for x in carrier if x & ((1 << width) - 1) != x >> width)
        if n == 0:
            return lvl.elements
        step = self._steps[n - 1]
        return tuple(x for x in lvl.elements if not step.is_old(x))

    def points(self, depth: int) -> List[TowerAddress]:
        """Canonical addresses of every point up to ``depth``, in (level, position) order."""
        return [TowerAddress(n, x) for n in range(depth + 1) for x in self.fresh_elements(n)]

    def sort_key(self, a: TowerAddress) -> Tuple[int, int]:
        c = self.canonical(a)
        if self.tag.is_boolean:
            return (c.level, c.element)
        return (c.level, self.level(c.level).index_of(c.element))


def iterate(seed: FiniteStructure, depth: int, *, max_elements: int = DEFAULT_LEVEL_BUDGET) -> TowerHandle:
    """Tower over ``seed`` expanded to ``depth``."""
    t = TowerHandle(seed, max_elements=max_elements)
    t.expand(depth)
    return t


def address_resolve(t: TowerHandle, a: TowerAddress, target_level: int) -> Any:
    return t.resolve(a, target_level)


# ---------------------------------------------------------------------------
# Witness search
# ---------------------------------------------------------------------------

def find_witness(
    t: TowerHandle, anchors: Sequence[TowerAddress], types: Sequence[Any], *, margin: int = 1
) -> TowerAddress:
    """Least canonical point realizing ``types`` over ``anchors``.

    Searches levels up to ``margin`` above the highest anchor; one level
    always suffices when the type is a valid one-point extension type.

    Raises:
        ContractError: the requested type is not a one-point extension of the anchors.
        DepthExhaustedError: the budget stops the search first.
    """
    if t.tag.is_boolean:
        raise ContractError("witness search works on pair types; Boolean towers have none")
    if len(anchors) != len(types):
        raise StructuralError("one pair type per anchor is required")
    top = max((a.level for a in anchors), default=0)
    anchored = [t.resolve(a, top) for a in anchors]
    if len(set(anchored)) != len(anchored):
        raise ContractError("anchors must denote distinct points")
    sub, _ = substructure(t.level(top), anchored)
    ordered = {x: ty for x, ty in zip(anchored, types)}
    if not validate(extend_by_type(sub, [ordered[x] for x in sub.elements]).extension):
        raise ContractError("no structure of the class realizes that type over the anchors")

    canonical_anchors = {t.canonical(a) for a in anchors}
    for n in range(top + margin + 1):
        try:
            t.expand(max(n, top))
        except CapacityError as exc:
            raise DepthExhaustedError(
                f"witness search stopped below level {n}: {exc}", depth=n - 1, size=exc.size, limit=exc.limit
            ) from exc
        common = max(n, top)
        lifted = [t.resolve(TowerAddress(top, x), common) for x in anchored]
        lvl = t.level(common)
        for x in t.fresh_elements(n):
            candidate = TowerAddress(n, x)
            if candidate in canonical_anchors:
                continue
            y = t.resolve(candidate, common)
            if all(pair_type(lvl, y, b) == ty for b, ty in zip(lifted, types)):
                logger.debug("witness for %d anchors found at %s", len(anchors), candidate)
                return candidate
    raise DepthExhaustedError(f"no witness up to level {top + margin}", depth=top + margin)


# ---------------------------------------------------------------------------
# Absorbing finite extensions
# ---------------------------------------------------------------------------

def reachability_chain(g: Morphism) -> List[OnePointExtension]:
    """One-point steps A ↪· A₁ ↪· ... ↪· Aₙ = B for an embedding g: A ↪ B."""
    a, b = g.source, g.target
    if a.tag.is_boolean:
        return _boolean_chain(g)
    image = set(g.images)
    new = [x for x in b.elements if x not in image]
    chain: List[OnePointExtension] = []
    current, into = a, g
    taken = list(g.images)
    for x in new:
        taken.append(x)
        nxt, _ = substructure(b, taken)
        inclusion = Morphism(current, nxt, into.images, MorphismKind.EMBEDDING)
        chain.append(OnePointExtension(current, nxt, inclusion, x))
        current = nxt
        into = identity(nxt)
    return chain


def _boolean_chain(g: Morphism) -> List[OnePointExtension]:
    b = g.target
    parts = [[i for i in range(b.size) if bits >> i & 1] for bits in g.images]
    chain: List[OnePointExtension] = []
    current = g.source
    while any(len(p) > 1 for p in parts):
        refined: List[List[int]] = []
        owner: List[int] = []
        new_bits = 0
        for j, p in enumerate(parts):
            if len(p) > 1:
                half = (len(p) + 1) // 2
                pieces = [p[:half], p[half:]]
                new_bits |= 1 << len(refined)
            else:
                pieces = [p]
            for piece in pieces:
                refined.append(piece)
                owner.append(j)
        order = sorted(range(len(refined)), key=lambda r: refined[r][0])
        rank = {r: i for i, r in enumerate(order)}
        nxt = boolean_algebra(tuple(b.elements[refined[r][0]] for r in order))
        images = [0] * len(parts)
        for r, j in enumerate(owner):
            images[j] |= 1 << rank[r]
        x = 0
        for r in range(len(refined)):
            if new_bits >> r & 1:
                x |= 1 << rank[r]
        inclusion = Morphism(current, nxt, tuple(images), MorphismKind.EMBEDDING)
        chain.append(OnePointExtension(current, nxt, inclusion, x))
        current = nxt
        parts = [refined[r] for r in order]
    return chain


def absorb_extension(
    a: FiniteStructure, b: FiniteStructure, g: Morphism, *, max_elements: int = DEFAULT_LEVEL_BUDGET
) -> Tuple[int, Morphism]:
    """(n, h) with h: B ↪ Kⁿ(A) and h ∘ g = ηⁿ_A.

    Raises:
        ContractError: g is not an embedding A ↪ B.
    """
    if g.source != a or g.target != b:
        raise ContractError("g must run from A to B")
    report = check_morphism(g.with_kind(MorphismKind.EMBEDDING))
    if not report:
        raise ContractError(f"g is not an embedding: {report.first_error}")
    g = g.with_kind(MorphismKind.EMBEDDING)
    tower = TowerHandle(a, max_elements=max_elements)
    chain = reachability_chain(g)
    if not chain:
        iso = g.with_kind(MorphismKind.ISOMORPHISM)
        return 1, compose(tower.link(0), inverse(iso)).with_kind(MorphismKind.EMBEDDING)

    h: Optional[Morphism] = None
    for k, e in enumerate(chain, start=1):
        ka = k_object(e.base, max_elements=max_elements)
        f_k = resolve_extension(e, ka)
        if h is None:
            h = f_k
        else:
            lifted = k_morphism(h, source_k=ka, target_k=tower.step(k - 1), max_elements=max_elements)
            h = compose(lifted, f_k)
        logger.debug("absorb step %d/%d: %d elements", k, len(chain), e.extension.size)
    assert h is not None
    # A_n carries B's element order, so h is re-based onto B itself
    return len(chain), Morphism(b, h.target, h.images, MorphismKind.EMBEDDING)


# ---------------------------------------------------------------------------
# Extension-property verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionCertificate:
    base: Tuple[TowerAddress, ...]
    extension: OnePointExtension
    witness_level: int
    witness: Morphism


@dataclass(frozen=True)
class ExtensionCounterexample:
    base: Tuple[TowerAddress, ...]
    extension: OnePointExtension
    reason: str


@dataclass
class ExtensionReport:
    base_depth: int
    size_bound: int
    certificates: List[ExtensionCertificate] = field(default_factory=list)
    counterexample: Optional[ExtensionCounterexample] = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None

    def to_validation(self) -> ValidationResult:
        if self.counterexample is None:
            return ValidationResult.ok()
        base = [a.to_json() for a in self.counterexample.base]
        return ValidationResult.fail(f"extension over {base} not realized: {self.counterexample.reason}")


def _boolean_partitions(size: int, max_blocks: int) -> Iterator[List[int]]:
    """Set partitions of ``range(size)`` into at most ``max_blocks`` blocks, as block bitsets."""
    blocks: List[int] = []

    def place(i: int) -> Iterator[List[int]]:
        if i == size:
            yield list(blocks)
            return
        for j in range(len(blocks)):
            blocks[j] |= 1 << i
            yield from place(i + 1)
            blocks[j] &= ~(1 << i)
        if len(blocks) < max_blocks:
            blocks.append(1 << i)
            yield from place(i + 1)
            blocks.pop()

    yield from place(0)


def _substructures(level: FiniteStructure, size_bound: int) -> Iterator[Tuple[FiniteStructure, Morphism]]:
    if level.tag.is_boolean:
        for blocks in _boolean_partitions(level.size, size_bound):
            yield generated_subalgebra(level, blocks)
        return
    for r in range(min(size_bound, level.size) + 1):
        for subset in itertools.combinations(level.elements, r):
            yield substructure(level, subset)


def _certify(
    t: TowerHandle,
    base_depth: int,
    incl: Morphism,
    ka: KObjectResult,
    e: OnePointExtension,
) -> Tuple[Optional[ExtensionCertificate], Optional[ExtensionCounterexample]]:
    base = tuple(TowerAddress(base_depth, x) for x in incl.images)
    try:
        lifted = k_morphism(incl, source_k=ka, target_k=t.step(base_depth), max_elements=t.max_elements)
        witness = compose(lifted, resolve_extension(e, ka)).with_kind(MorphismKind.EMBEDDING)
    except (ContractError, StructuralError) as exc:
        return None, ExtensionCounterexample(base, e, str(exc))
    report = check_morphism(witness)
    if not report:
        return None, ExtensionCounterexample(base, e, f"witness is not an embedding: {report.first_error}")
    link = t.link(base_depth)
    for x, y in zip(incl.source.elements, e.inclusion.images):
        if witness.apply(y) != link.apply(incl(x)):
            return None, ExtensionCounterexample(base, e, f"triangle fails at {x!r}")
    return ExtensionCertificate(base, e, base_depth + 1, witness), None


def verify_extension_property(
    t: TowerHandle,
    base_depth: int,
    size_bound: int,
    *,
    jobs: int = 1,
    cap: int = DEFAULT_EXTENSION_CAP,
) -> ExtensionReport:
    """Certify every one-point extension of every small substructure of level[base_depth].

    Each witness lives at level ``base_depth + 1``: it is K(inclusion) composed
    with the resolution of the extension inside K of the substructure.
    """
    if base_depth < 0 or size_bound < 0:
        raise ContractError("base depth and size bound must be non-negative")
    t.expand(base_depth + 1)
    level = t.level(base_depth)
    tasks: List[Tuple[Morphism, KObjectResult, OnePointExtension]] = []
    for sub, incl in _substructures(level, size_bound):
        ka = k_object(sub, max_elements=t.max_elements)
        for e in enumerate_one_point_extensions(sub, cap=cap):
            tasks.append((incl, ka, e))
    logger.info("verifying %d extensions over level %d of the %s tower", len(tasks), base_depth, t.tag)

    def run(task: Tuple[Morphism, KObjectResult, OnePointExtension]):
        return _certify(t, base_depth, *task)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = [run(task) for task in tasks]

    report = ExtensionReport(base_depth, size_bound)
    for cert, bad in outcomes:
        if bad is not None:
            report.counterexample = bad
            break
        report.certificates.append(cert)  # type: ignore[arg-type]
    return report
