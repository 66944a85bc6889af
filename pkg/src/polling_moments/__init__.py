"""Queue-length and busy-time moments for polling systems with binomial-exhaustive,
binomial-gated and base-stock policies."""

from .model import (
    BEP,
    BGP,
    BSP,
    DistributionSpec,
    PollingTable,
    SystemModel,
    ValidationError,
    Violation,
    validate,
)

__all__ = [
    "BEP",
    "BGP",
    "BSP",
    "DistributionSpec",
    "PollingTable",
    "SystemModel",
    "ValidationError",
    "Violation",
    "validate",
]

__version__ = "0.1.0"
