"""Constructive field theory toolbox: forest formulas, loop vertex expansions, tensor invariants."""

__version__ = "0.1.0"
