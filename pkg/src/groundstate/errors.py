"""Exception types raised by the toolkit.

Each error carries a short machine-readable ``code`` that the CLI copies into
its structured error output.
"""


class GroundStateError(Exception):
    code = "Error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class EmptyRegion(GroundStateError):
    code = "EmptyRegion"


class GridMismatch(GroundStateError):
    code = "GridMismatch"


class InvalidDomain(GroundStateError):
    code = "InvalidDomain"


class DegenerateHeight(GroundStateError):
    code = "DegenerateHeight"


class OutsideDomain(GroundStateError):
    code = "OutsideDomain"


class CrossSectionTooThin(GroundStateError):
    code = "CrossSectionTooThin"


class EigSolveFailed(GroundStateError):
    code = "EigSolveFailed"


class LinearSolveFailed(GroundStateError):
    code = "LinearSolveFailed"


class EmptyDomain(GroundStateError):
    code = "EmptyDomain"


class AtDomainEdge(GroundStateError):
    code = "AtDomainEdge"


class ResolutionTooCoarse(GroundStateError):
    code = "ResolutionTooCoarse"


class OracleTooLarge(GroundStateError):
    code = "OracleTooLarge"


class LevelEmpty(GroundStateError):
    code = "LevelEmpty"


class SweepTooSmall(GroundStateError):
    code = "SweepTooSmall"


class ConfigError(GroundStateError):
    code = "ConfigError"
