"""Exception hierarchy shared by the solver modules."""


class KepsError(Exception):
    """Base class for all solver errors.

    ``time_level`` is filled in by the time march when an error escapes a
    step, so callers can tell where a run failed.
    """

    time_level = None

    def __str__(self):
        msg = super().__str__()
        if self.time_level is not None:
            return f"{msg} (time level {self.time_level})"
        return msg


class InvalidField(KepsError, ValueError):
    pass


class NonpositiveDensity(KepsError):
    pass


class CflViolation(KepsError):
    def __init__(self, cfl, limit):
        super().__init__(f"CFL number {cfl:.6g} exceeds limit {limit:.6g}")
        self.cfl = cfl
        self.limit = limit


class LinearSolveDiverged(KepsError):
    def __init__(self, stats, label=""):
        where = f" in {label}" if label else ""
        super().__init__(
            f"linear solve{where} did not converge: {stats.iterations} iterations, "
            f"relative residual {stats.final_relative_residual:.3e}"
        )
        self.stats = stats


class TurbulentEnergyFloor(KepsError):
    def __init__(self, min_pi, floor):
        super().__init__(f"min(k) = {min_pi:.6g} is not above the floor {floor:.6g}")
        self.min_pi = min_pi
        self.floor = floor


class PicardDiverged(KepsError):
    def __init__(self, report, msg="Picard iteration is not contracting"):
        super().__init__(msg)
        self.report = report


class InsufficientIterations(KepsError):
    pass


class InsufficientResolution(KepsError):
    pass


class BlowupDetected(KepsError):
    def __init__(self, level, field):
        super().__init__(f"non-finite value in {field} at time level {level}")
        self.level = level
        self.field = field


class ConfigError(KepsError, ValueError):
    pass
