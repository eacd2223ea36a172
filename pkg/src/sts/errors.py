"""Exception hierarchy. Each family maps to a CLI exit code."""


class StsError(Exception):
    exit_code = 1


class InputError(StsError):
    """Missing or malformed user input (files, flags, config keys)."""

    exit_code = 2


class DataFormatError(StsError):
    """A tensor, rig or scene file could not be parsed."""

    exit_code = 3

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ContractError(StsError, ValueError):
    """A numeric precondition or shape contract was violated."""

    exit_code = 4


class InvalidPoseError(ContractError):
    pass


class DomainError(ContractError):
    pass


class ShapeError(ContractError):
    pass


class ConfigurationError(ContractError):
    pass


class AlignmentError(ContractError):
    pass


class ResolutionError(ContractError):
    pass


class UndefinedMetricError(ContractError):
    pass


class SceneError(InputError):
    pass
