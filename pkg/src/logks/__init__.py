"""Finite-volume simulator and bound-verification workbench for logarithmic
Keller-Segel / urban-crime systems."""

__version__ = "0.1.0"
