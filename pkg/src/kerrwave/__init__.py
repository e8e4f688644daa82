"""Interface wave-packets in 2D Kerr-nonlinear Maxwell equations.

Subpackages cover the linear interface eigenproblem, the corrector systems
feeding the extended wave-packet ansatz, the effective nonlinear Schroedinger
envelope equation, residual diagnostics of the ansatz, a quasilinear 2D
Maxwell time-stepper, and the experiment harness tying them together.
"""

from .core import (
    Field1D,
    Field2D,
    Grid1D,
    Grid2D,
    PiecewiseProfile,
    Scalar2D,
    broken_norm,
    constant_profile,
    example21_profile,
    jump_at_interface,
)

__all__ = [
    "Field1D",
    "Field2D",
    "Grid1D",
    "Grid2D",
    "PiecewiseProfile",
    "Scalar2D",
    "broken_norm",
    "constant_profile",
    "example21_profile",
    "jump_at_interface",
]

__version__ = "0.1.0"
