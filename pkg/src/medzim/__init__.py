"""
medzim
======

A python library/CLI for causal mediation analysis with zero-inflated mediators, such as
the relative abundance of a microbial taxon.
"""

__version__ = "0.1.0"
