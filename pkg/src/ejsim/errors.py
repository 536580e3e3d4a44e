"""Exception types raised by the simulator.

Everything derives from SimulationError so callers can catch broadly;
the CLI maps subfamilies onto exit codes.
"""


class SimulationError(Exception):
    pass


# -- channel validation ------------------------------------------------------

class ChannelInvalid(SimulationError):
    pass


class NonStochasticRow(ChannelInvalid):
    pass


class NegativeEntry(ChannelInvalid):
    pass


class DegenerateChannel(ChannelInvalid):
    pass


class IndexOutOfRange(SimulationError):
    pass


class NoConvergence(SimulationError):
    pass


class InfiniteC2(SimulationError):
    pass


class SearchSpaceTooLarge(SimulationError):
    pass


# -- divergence kernel -------------------------------------------------------

class SupportMismatch(SimulationError):
    pass


class WeightDimensionMismatch(SimulationError):
    pass


class DegenerateM(SimulationError):
    pass


class SupportTooLarge(SimulationError):
    pass


class ZeroSamples(SimulationError):
    pass


# -- belief / schemes --------------------------------------------------------

class DimensionMismatch(SimulationError):
    pass


class ImpossibleObservation(SimulationError):
    pass


class NotBinaryInput(SimulationError):
    pass


class NoValidPartitionFound(SimulationError):
    pass


# -- session / cli -----------------------------------------------------------

class ParameterDomain(SimulationError):
    pass


class ConfigParse(SimulationError):
    pass


class SchemeChannelMismatch(SimulationError):
    pass


class AuditViolation(SimulationError):
    """A guarantee that should hold for an in-scope scheme/channel pair failed."""
    pass
