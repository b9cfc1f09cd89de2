"""Computational engines: structures, Katětov functors, towers and the services built on them."""
