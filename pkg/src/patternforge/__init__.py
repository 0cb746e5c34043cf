"""Generator and verification flow for iterator-based hardware designs."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    CAPABILITY_MATRIX, MappingPlan, SpecError, SystemSpec, Violation, parse_system_spec,
    plan_mapping, validate_system,
)
from .emit import ElaborationError, EmitOptions, elaborate, emit_verilog  # noqa: E402

__all__ = [
    "__version__", "CAPABILITY_MATRIX", "MappingPlan", "SpecError", "SystemSpec", "Violation",
    "parse_system_spec", "plan_mapping", "validate_system",
    "ElaborationError", "EmitOptions", "elaborate", "emit_verilog",
]
