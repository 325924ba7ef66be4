"""Exception hierarchy shared by every module."""


class BinpickError(Exception):
    """Base class for all runtime failures raised by the package."""


class ConfigError(BinpickError, ValueError):
    pass


class PlacementFailed(BinpickError):
    pass


class UnknownId(BinpickError, KeyError):
    pass


class UnknownTarget(BinpickError):
    pass


class EmptyCloud(BinpickError):
    pass


class EmptyScene(BinpickError):
    pass


class DegenerateSegment(BinpickError):
    pass


class DegenerateData(BinpickError, ValueError):
    pass


class ParamMismatch(BinpickError, ValueError):
    pass


class PointOutsideVolume(BinpickError, ValueError):
    pass


class NoCandidate(BinpickError):
    pass


class BadThresholds(BinpickError, ValueError):
    pass
