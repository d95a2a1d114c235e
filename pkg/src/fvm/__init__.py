"""Game comonads over finite relational structures and checks of composition theorems."""

from .structures import Signature, Structure, StructureError, StructureMap

__all__ = ["Signature", "Structure", "StructureError", "StructureMap"]
__version__ = "0.1.0"
