"""Multiprecision numerics: switching integration, return maps, root isolation, portraits."""
from .field import NumericField, NumericSystem, numeric_system
from .integrate import (EscapeError, EventError, StiffnessError, Trajectory, full_return,
                        integrate_switching, numeric_return_map, ring_return_defects, sliding_segment)
from .roots import DisplacementPoly, PrecisionEscalationError, displacement_roots
from .jacobian import ShapeError, jacobian_det

__all__ = [
    "NumericField", "NumericSystem", "numeric_system", "EscapeError", "EventError", "StiffnessError",
    "Trajectory", "full_return", "integrate_switching", "numeric_return_map", "ring_return_defects",
    "sliding_segment", "DisplacementPoly", "PrecisionEscalationError", "displacement_roots",
    "ShapeError", "jacobian_det",
]
