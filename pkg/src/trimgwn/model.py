"""A model is an ordered collection of trimmed patches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import Aabb, TrimmedPatch


@dataclass(eq=False)
class Model:
    patches: list[TrimmedPatch] = field(default_factory=list)
    units: str = "unitless"

    def __len__(self) -> int:
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def aabb(self) -> Aabb:
        if not self.patches:
            return Aabb(np.zeros(3), np.zeros(3))
        return Aabb.of(np.concatenate([p.control_points for p in self.patches]))
