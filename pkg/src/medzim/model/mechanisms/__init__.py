from .abc import ZeroMechanism
from .exponential import Exponential
from .lod import LOD

__all__ = ["ZeroMechanism", "LOD", "Exponential"]
