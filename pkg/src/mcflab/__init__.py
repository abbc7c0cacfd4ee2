"""Desk-scale laboratory for mean curvature flow near cylindrical pinches."""

from .shrinker import ModeIndex, ShrinkerSpec, make_shrinker

__all__ = ["ShrinkerSpec", "ModeIndex", "make_shrinker"]
__version__ = "0.1.0"
