"""Exception hierarchy. The CLI prints the class name as the machine-readable error tag."""


class PairSymError(Exception):
    pass


class ParseError(PairSymError, ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ContractViolation(PairSymError, ValueError):
    pass


class DegenerateMassError(PairSymError, ArithmeticError):
    pass


class CheckpointError(PairSymError, ValueError):
    pass


class SimulationError(PairSymError, RuntimeError):
    pass
