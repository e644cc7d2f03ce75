"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SimulationError):
    """Paired tensor axes have different dimensions."""


class AxisOutOfRange(SimulationError):
    """An axis index does not exist on the given tensor."""


class NonFinite(SimulationError):
    """A tensor contains NaN or Inf entries."""


class EmptySpectrum(SimulationError):
    """A truncation would discard every singular value."""


class EmptyInput(SimulationError):
    """An operation received an empty sequence where data is required."""


class IndexOutOfRange(SimulationError):
    """A site or bond index lies outside the chain."""


class LengthMismatch(SimulationError):
    """Two states have different site counts."""


class BadShape(SimulationError):
    """A tensor does not have the shape required by the operation."""


class NonAdjacentGate(SimulationError):
    """A multi-qubit gate targets non-neighboring sites."""


class NonUnitary(SimulationError):
    """A gate matrix failed the unitarity check."""


class UnknownGate(SimulationError):
    """A gate name is not in the gate library."""


class BadArity(SimulationError):
    """A gate received the wrong number of qubits or parameters."""


class ParseError(SimulationError):
    """A circuit file could not be parsed."""


class VersionMismatch(SimulationError):
    """A file was written with an unsupported format version."""


class ClusterOverflow(SimulationError):
    """A single circuit layer already violates the cluster memory bound."""


class MemoryBoundExceeded(SimulationError):
    """A tensor about to be allocated would exceed the configured bound."""


class UnsatisfiableGrouping(SimulationError):
    """No contiguous qubit grouping satisfies the size conditions."""


class TooLarge(SimulationError):
    """A dense statevector would exceed the configured qubit cap."""


class OracleTooLarge(TooLarge):
    """A verification block is too wide for the dense oracle."""


class InvalidParams(SimulationError):
    """Factoring parameters fail the classical preconditions."""
