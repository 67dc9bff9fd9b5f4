"""Generalized winding numbers for trimmed NURBS surfaces."""

from .kernel import NurbsCurve, NurbsPatch, TrimmedPatch
from .model import Model

__all__ = ["Model", "NurbsCurve", "NurbsPatch", "TrimmedPatch"]
