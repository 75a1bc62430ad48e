"""Exception hierarchy; the CLI maps each class to an exit code."""


class AvisaError(Exception):
    exit_code = 1


class ArgumentError(AvisaError, ValueError):
    exit_code = 2


class DataError(AvisaError):
    exit_code = 3


class ConvergenceError(AvisaError):
    exit_code = 4
