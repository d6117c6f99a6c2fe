"""Numerics for escaping-set measure questions of transcendental entire functions."""

from .errors import OVERFLOW, BranchError, ContourError, DomainError, NumericError, ParameterError
from .schroeder import Linearizer, repelling_fixed_point

__all__ = [
    "OVERFLOW",
    "BranchError",
    "ContourError",
    "DomainError",
    "Linearizer",
    "NumericError",
    "ParameterError",
    "repelling_fixed_point",
]
