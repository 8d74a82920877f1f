"""Hyperbolic partitioning trees for graph clustering."""
from setree.errors import (
    CapacityError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    ParseError,
    SetreeError,
    TapeStateError,
    TrainingError,
    ValidationError,
)
from setree.graph import Graph, load_graph
from setree.lorentz import Lorentz
from setree.tree import PartitionTree

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DegenerateInputError",
    "DimensionError",
    "DomainError",
    "Graph",
    "Lorentz",
    "ParseError",
    "PartitionTree",
    "SetreeError",
    "TapeStateError",
    "TrainingError",
    "ValidationError",
    "load_graph",
]
