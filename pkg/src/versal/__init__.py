"""Exact deformation engine for bundles and connections on explicit curves.

Everything is computed over Q: curve arithmetic, section spaces with
prescribed pole bounds, Cech (hyper)cohomology of two-term complexes,
Atiyah classes, and truncated versal families with their obstruction
ideals.  No floating point enters any code path.
"""

from __future__ import annotations

__version__ = "0.1.0"

from ._kernels import COMPILED as compiled_kernels
from .errors import (
    EngineError,
    InternalError,
    MembershipError,
    ScenarioError,
    SectionInstabilityError,
    SupportError,
    ValidationError,
)

__all__ = [
    "EngineError",
    "InternalError",
    "MembershipError",
    "ScenarioError",
    "SectionInstabilityError",
    "SupportError",
    "ValidationError",
    "compiled_kernels",
    "__version__",
]
