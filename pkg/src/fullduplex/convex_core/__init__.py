"""Convex optimization core: Hermitian coordinates, barrier solver, subproblems."""

from . import hermitian, kernels
from .barrier import (BarrierResult, ConvexProgram, Infeasible, LogDetTerm,
                      PsdBlock, barrier_newton, find_interior)

__all__ = ["hermitian", "kernels", "BarrierResult", "ConvexProgram", "Infeasible",
           "LogDetTerm", "PsdBlock", "barrier_newton", "find_interior"]
