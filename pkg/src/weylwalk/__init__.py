"""Conditioned random walks in Weyl chambers.

Submodules: ``chambers``, ``walk``, ``rng``, ``exact``, ``montecarlo``,
``htransform``, ``asymptotics`` and ``cli``.
"""
from __future__ import annotations

from .backend import BACKEND
from .chambers import ChamberType, contains, h
from .exact import LatticeWalkSpec, V_exact, survival_probability
from .walk import StepDistribution

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChamberType",
    "contains",
    "h",
    "LatticeWalkSpec",
    "StepDistribution",
    "V_exact",
    "survival_probability",
]
