"""HTTP bridge serving conditional log-probabilities to the projection
engine over the versioned token-string wire protocol."""

from .backend import Backend, TableBackend, UnencodableTokenError
from .app import WIRE_VERSION, create_app

__all__ = [
    "Backend",
    "TableBackend",
    "UnencodableTokenError",
    "WIRE_VERSION",
    "create_app",
]

__version__ = "0.1.0"
