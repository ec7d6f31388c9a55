"""Error hierarchy shared by every package.

Each error carries the process exit code the CLI reports for it:
0 success, 2 usage, 3 resource cap, 4 numeric/verification failure.
"""


class HrstError(Exception):
    exit_code = 4


class ConfigError(HrstError):
    exit_code = 2


class SampleCapError(HrstError):
    exit_code = 3


class DegenerateCloudError(HrstError):
    """Two points of a cloud coincide, so an ancestor is not defined."""


class UnboundedRegionError(HrstError):
    pass


class AntipodalArcError(HrstError):
    pass


class NotInLevelSetError(HrstError):
    pass


class CensoredError(HrstError):
    """A functional was asked for too close to the horizon to be trusted."""


class CoveringError(HrstError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class VerificationError(HrstError):
    pass
