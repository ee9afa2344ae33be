from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class ConfigError(SimulationError):
    """Scenario file could not be parsed or violates a NetworkConfig invariant"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        location = f"line {line}: " if line is not None else ""
        super().__init__(f"{location}{message}")


class ChannelError(SimulationError):
    """Geometry cannot be turned into finite channel gains"""


class OracleError(SimulationError):
    """Grid search refused to run"""


class GridTooLargeError(OracleError):
    """Requested lattice exceeds the evaluation budget"""


class SolverError(SimulationError):
    """Internal solver invariant was broken"""
