"""Problem and method parameters for the convection-diffusion model problem.

    -eps * Laplace(u) + b . grad(u) + c u = f   in (0, 1)^2,   u = 0 on the boundary

with constant b = (b1, b2), b1, b2 > 0 and constant c > 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Any


class ConfigError(ValueError):
    """Raised for parameter sets that violate the model's hard constraints."""


class AssumptionWarning(UserWarning):
    """eps > 1/N: the mesh degenerates to (near) uniform and the layer analysis no longer applies."""


@dataclass(frozen=True)
class ProblemConfig:
    epsilon: float = 1e-6
    b1: float = 2.0
    b2: float = 1.0
    c: float = 1.0
    N: int = 32
    rho: float = 2.5
    # None -> 0.25 / |b|^2
    c_star: float | None = None
    k: float = 4.0
    script_k: float = 1.0
    warn: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ConfigError(f"N must be an even integer >= 4, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("epsilon", "b1", "b2", "c", "rho", "k", "script_k"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value!r}")
        if self.c_star is not None and not (self.c_star >= 0 and math.isfinite(self.c_star)):
            raise ConfigError(f"c_star must be non-negative, got {self.c_star!r}")
        if self.warn and self.epsilon > 1.0 / self.N:
            warnings.warn(
                f"epsilon={self.epsilon:g} > 1/N={1.0 / self.N:g}; the Shishkin mesh "
                "is clamped to lambda=1/2 (uniform mesh)",
                AssumptionWarning,
                stacklevel=3,
            )

    @property
    def b_mag(self) -> float:
        return math.hypot(self.b1, self.b2)

    @property
    def stab_constant(self) -> float:
        """Streamline-diffusion constant C* (delta_K = C*/N on the coarse block)."""
        if self.c_star is None:
            return 0.25 / self.b_mag**2
        return float(self.c_star)

    def with_(self, **changes: Any) -> "ProblemConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "warn"}
        out["c_star"] = self.stab_constant
        return out
