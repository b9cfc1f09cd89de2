"""Katětov functors and the Fraïssé limits they build, at desk scale."""

__version__ = "0.1.0"
