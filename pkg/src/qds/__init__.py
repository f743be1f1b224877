"""Stabilization and convergence-speed analysis for Hamiltonian-controlled
Lindblad dynamics."""

from .config import Tolerances, get_tolerances, set_tolerances
from .model import (
    ControlVector,
    ModelError,
    QdsModel,
    Subspace,
    generator_apply,
    hamiltonian_at,
    load_model,
    serialize_model,
)

__version__ = "0.1.0"

__all__ = [
    "ControlVector",
    "ModelError",
    "QdsModel",
    "Subspace",
    "Tolerances",
    "generator_apply",
    "get_tolerances",
    "hamiltonian_at",
    "load_model",
    "serialize_model",
    "set_tolerances",
]
