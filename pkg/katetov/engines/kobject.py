"""Descriptors for elements of K(A) and the result of building K(A)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Tuple, Union

from ..errors import StructuralError
from .structures import FiniteStructure, Morphism


@dataclass(frozen=True)
class Old:
    """An element of A seen inside K(A) through η."""

    element: Any


@dataclass(frozen=True)
class New:
    """A point of K(A) outside η(A); the payload is class-specific."""

    payload: Any


KElement = Union[Old, New]


@dataclass(frozen=True)
class KObjectResult:
    """K(A) with its embedding η and the descriptor of every element.

    ``structure`` has integer element ids ``0..N-1``; ``descriptors[i]`` is the
    descriptor of element ``i``.
    """

    base: FiniteStructure
    structure: FiniteStructure
    eta: Morphism
    descriptors: Tuple[KElement, ...]

    @cached_property
    def index(self) -> Dict[KElement, Any]:
        return {d: i for d, i in zip(self.descriptors, self.structure.elements)}

    def element_for(self, descriptor: KElement) -> Any:
        try:
            return self.index[descriptor]
        except KeyError:
            raise StructuralError(f"{descriptor!r} is not an element of K(A)") from None

    def descriptor_of(self, element: Any) -> KElement:
        return self.descriptors[self.structure.index_of(element)]

    def is_old(self, element: Any) -> bool:
        return isinstance(self.descriptor_of(element), Old)
