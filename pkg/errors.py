from typing import Optional


class HqsError(Exception):
    """Базовая ошибка: detail для человека, exit_code для CLI"""

    exit_code = 2

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


# Ошибки входных данных (код 2)
class InputError(HqsError):
    exit_code = 2


class EmptyQuorum(InputError):
    pass


class EmptyDeclaration(InputError):
    pass


class UnknownMember(InputError):
    pass


class UnknownProcess(InputError):
    pass


class BadSubset(InputError):
    pass


class PreconditionViolated(InputError):
    pass


class TooLarge(InputError):
    pass


class ScenarioError(InputError):
    pass


class PreconditionNotVerified(HqsError):
    exit_code = 1


# Ошибки симуляции
class SimulationError(HqsError):
    exit_code = 1


class ForgedSender(SimulationError):
    pass


class ForgedSigner(SimulationError):
    pass


class StepCapExceeded(SimulationError):
    pass


class DuplicateInstance(SimulationError):
    pass


class Busy(SimulationError):
    pass


class InvalidSignature(SimulationError):
    pass
