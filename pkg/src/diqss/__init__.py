"""Exact simulation and verification toolkit for device-independent quantum
secret sharing built on the n-party parity (pseudo-telepathy) game."""

from .bitcore import BitString, Partition, THREE_PARTY
from .noise import NoiseParams
from .protocol import ProtocolConfig, SimulationReport, run_protocol

__all__ = [
    "BitString",
    "Partition",
    "THREE_PARTY",
    "NoiseParams",
    "ProtocolConfig",
    "SimulationReport",
    "run_protocol",
]

__version__ = "0.1.0"
