"""Katětov functions on finite rational metric spaces.

Two modes:
    general  values in [0, ∞); function-level operations only
    sphere   values and distances in [0, 1] on the 1/q grid; this is the mode
             K(X) is materialized in, so towers over metric seeds approximate
             the discretized Urysohn sphere

All arithmetic is exact (``fractions.Fraction``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

from ..errors import CapacityError, ContractError, StructuralError
from ..settings import DEFAULT_LEVEL_BUDGET
from .kobject import KElement, KObjectResult, New, Old
from .structures import (
    FiniteStructure,
    Morphism,
    MorphismKind,
    OnePointExtension,
    check_morphism,
    metric_space,
)

logger = logging.getLogger(__name__)

Number = Union[int, str, Fraction]

ONE = Fraction(1)
ZERO = Fraction(0)


@dataclass(frozen=True)
class KatetovFunction:
    """Values aligned with ``base.elements``; equality and hashing use the values only."""

    base: FiniteStructure = field(compare=False, repr=False)
    values: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.base.tag.is_metric:
            raise ContractError("Katětov functions live on metric spaces")
        if len(self.values) != self.base.size:
            raise StructuralError(f"{len(self.values)} values for a {self.base.size}-point space")

    def __call__(self, x: Any) -> Fraction:
        return self.values[self.base.index_of(x)]

    def is_hat(self) -> Optional[Any]:
        """The point this function is the distance function of, if any."""
        for x, v in zip(self.base.elements, self.values):
            if v == 0:
                return x
        return None


def katetov_function(base: FiniteStructure, values: Union[Sequence[Number], Mapping[Any, Number]]) -> KatetovFunction:
    if isinstance(values, Mapping):
        missing = [x for x in base.elements if x not in values]
        if missing:
            raise StructuralError(f"no value for {missing[0]!r}")
        seq = [values[x] for x in base.elements]
    else:
        seq = list(values)
    return KatetovFunction(base, tuple(Fraction(v) for v in seq))


def is_katetov(phi: KatetovFunction) -> bool:
    """|φ(x) − φ(y)| ≤ d(x, y) ≤ φ(x) + φ(y) for all pairs, and φ ≥ 0."""
    vals = phi.values
    d = phi.base.distances
    if any(v < 0 for v in vals):
        return False
    n = len(vals)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(vals[i] - vals[j]) > d[i][j] or d[i][j] > vals[i] + vals[j]:
                return False
    return True


def sup_distance(phi: KatetovFunction, psi: KatetovFunction) -> Fraction:
    if phi.base != psi.base:
        raise ContractError("sup distance needs functions on the same space")
    return max((abs(a - b) for a, b in zip(phi.values, psi.values)), default=ZERO)


def hat(space: FiniteStructure, a: Any) -> KatetovFunction:
    """The distance function d(·, a)."""
    i = space.index_of(a)
    return KatetovFunction(space, tuple(row[i] for row in space.distances))


def push(phi: KatetovFunction, f: Morphism, *, sphere: bool = False) -> KatetovFunction:
    """φ^f(y) = min over x of d(y, f(x)) + φ(x), truncated at 1 in sphere mode.

    Raises:
        ContractError: f does not start at φ's space, expands a pair, or the
            space is empty in general mode (the minimum is then undefined).
    """
    if f.source != phi.base:
        raise ContractError("push needs a morphism out of the function's space")
    report = check_morphism(f.with_kind(MorphismKind.HOMOMORPHISM))
    if not report:
        raise ContractError(f"push needs a nonexpansive map: {report.first_error}")
    target = f.target
    if phi.base.size == 0:
        if not sphere:
            raise ContractError("cannot push a function on the empty space in general mode")
        return KatetovFunction(target, tuple(ONE for _ in target.elements))
    image_rows = [target.index_of(y) for y in f.images]
    values: List[Fraction] = []
    for j in range(target.size):
        best = min(target.distances[j][i] + v for i, v in zip(image_rows, phi.values))
        values.append(min(best, ONE) if sphere else best)
    return KatetovFunction(target, tuple(values))


@dataclass(frozen=True)
class PushDistanceCheck:
    before: Fraction
    after: Fraction
    isometric: bool

    @property
    def holds(self) -> bool:
        """ϱ(φ^f, ψ^f) ≤ ϱ(φ, ψ), with equality whenever f is isometric."""
        if self.after > self.before:
            return False
        return self.after == self.before if self.isometric else True


def nonexpansive_push_distance(
    phi: KatetovFunction, psi: KatetovFunction, f: Morphism, *, sphere: bool = False
) -> PushDistanceCheck:
    isometric = bool(check_morphism(f.with_kind(MorphismKind.EMBEDDING)))
    return PushDistanceCheck(
        before=sup_distance(phi, psi),
        after=sup_distance(push(phi, f, sphere=sphere), push(psi, f, sphere=sphere)),
        isometric=isometric,
    )


def sphere_katetov_functions(space: FiniteStructure) -> List[KatetovFunction]:
    """All Katětov functions with values in {0, 1/q, …, 1}, in lexicographic order."""
    q = space.tag.q
    grid = [Fraction(k, q) for k in range(q + 1)]
    d = space.distances
    n = space.size
    out: List[KatetovFunction] = []
    chosen: List[Fraction] = []

    def extend(i: int) -> None:
        if i == n:
            out.append(KatetovFunction(space, tuple(chosen)))
            return
        for v in grid:
            if all(abs(v - chosen[j]) <= d[i][j] <= v + chosen[j] for j in range(i)):
                chosen.append(v)
                extend(i + 1)
                chosen.pop()

    extend(0)
    return out


def sphere_k_object(space: FiniteStructure, *, max_elements: int = DEFAULT_LEVEL_BUDGET) -> KObjectResult:
    """K(X): all grid Katětov functions under the sup metric, with η = hat.

    Distance functions of points of X are the Old elements, listed first in
    the order of X; the rest follow in lexicographic order of their values.
    """
    if not space.tag.is_metric:
        raise ContractError("sphere_k_object needs a metric space")
    q = space.tag.q
    candidates = (q + 1) ** space.size
    if candidates > max_elements:
        raise CapacityError(
            f"K of a {space.size}-point space on the 1/{q} grid needs up to {candidates} candidates "
            f"(budget {max_elements})",
            size=candidates,
            limit=max_elements,
        )
    hats = [hat(space, a) for a in space.elements]
    hat_set = set(hats)
    news = [phi for phi in sphere_katetov_functions(space) if phi not in hat_set]
    functions = hats + news
    descriptors: Tuple[KElement, ...] = tuple(Old(a) for a in space.elements) + tuple(New(phi) for phi in news)
    n = len(functions)
    rows = tuple(
        tuple(sup_distance(functions[i], functions[j]) for j in range(n))
        for i in range(n)
    )
    k_space = metric_space(range(n), rows, q)
    eta = Morphism(space, k_space, tuple(range(space.size)), MorphismKind.EMBEDDING)
    logger.debug("sphere K: %d points -> %d points (q=%d)", space.size, n, q)
    return KObjectResult(space, k_space, eta, descriptors)


def push_sphere_descriptor(descriptor: KElement, f: Morphism) -> KElement:
    """Action of K(f) on one point of K(X), in sphere mode."""
    if isinstance(descriptor, Old):
        return Old(f(descriptor.element))
    pushed = push(descriptor.payload, f, sphere=True)
    centre = pushed.is_hat()
    return Old(centre) if centre is not None else New(pushed)


def realize_metric_extension(e: OnePointExtension, k_result: Optional[KObjectResult] = None) -> Morphism:
    """Embedding g: extension ↪ K(X) with g(s) = d(s, ·) and g(x) = x̂.

    Raises:
        ContractError: the new point sits at distance 0 from a base point, or a
            distance is off the 1/q grid or above 1.
    """
    base, ext = e.base, e.extension
    q = base.tag.q
    values = []
    for a, image in zip(base.elements, e.inclusion.images):
        v = ext.dist(e.new_element, image)
        if v == 0:
            raise ContractError(f"new point at distance 0 from {a!r}: a metric extension cannot duplicate points")
        if v > 1 or (v * q).denominator != 1:
            raise ContractError(f"distance {v} to {a!r} is off the 1/{q} grid")
        values.append(v)
    phi = KatetovFunction(base, tuple(values))
    if not is_katetov(phi):
        raise ContractError("distances from the new point violate the Katětov inequalities")
    k_result = k_result or sphere_k_object(base)
    back = {image: a for a, image in zip(base.elements, e.inclusion.images)}
    images = tuple(
        k_result.element_for(New(phi)) if x == e.new_element else k_result.element_for(Old(back[x]))
        for x in ext.elements
    )
    return Morphism(ext, k_result.structure, images, MorphismKind.EMBEDDING)


def uniform_space(size: int, q: int) -> FiniteStructure:
    """``size`` points pairwise at distance 1."""
    return metric_space(range(size), [[0 if i == j else 1 for j in range(size)] for i in range(size)], q)
