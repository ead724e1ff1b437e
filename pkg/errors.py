class ReachError(Exception):
    pass


class PolynomialSyntaxError(ReachError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownVariableError(PolynomialSyntaxError):
    def __init__(self, name: str, offset: int) -> None:
        super().__init__(f"unknown variable '{name}'", offset)
        self.name = name


class DimensionMismatchError(ReachError):
    pass


class ModelFileError(ReachError):
    pass


class ValidationError(ReachError):
    def __init__(self, message: str, violations: list[str] | None = None) -> None:
        super().__init__(message)
        self.violations = violations or [message]


class KindMismatchError(ReachError):
    pass


class DegreeError(ReachError):
    pass


class SolverFailure(ReachError):
    pass


class RegionSamplingError(ReachError):
    pass
