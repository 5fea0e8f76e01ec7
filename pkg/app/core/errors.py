"""Exception hierarchy shared by the numerical modules, the CLI and the API."""


class LabError(Exception):
    """Base class for every error raised on purpose by the lab."""


class EnsembleError(LabError, ValueError):
    pass


class ScheduleError(LabError, ValueError):
    pass


class BPError(LabError, ArithmeticError):
    pass


class ChaosCapError(LabError, RuntimeError):
    pass


class DensityError(LabError, ArithmeticError):
    pass


class AmpError(LabError, RuntimeError):
    pass


class RankDeficientError(AmpError):
    pass


class FitError(LabError, ValueError):
    pass


class StudyError(LabError, RuntimeError):
    pass
