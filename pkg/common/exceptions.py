from common.enum import ExitStatus


class CampaignException(Exception):
    """Base error; carries the exit status and a readable detail."""

    status_code: ExitStatus = ExitStatus.CHECK_FAILED

    def __init__(self, detail: str, status_code: ExitStatus = None):
        super().__init__(detail)
        self.detail = detail
        if status_code is not None:
            self.status_code = status_code


class ConfigError(CampaignException):
    status_code = ExitStatus.CONFIG_ERROR


class NumericalError(CampaignException):
    status_code = ExitStatus.CHECK_FAILED


class QuadratureError(NumericalError):
    pass


class FitError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class NoNontrivialSolution(ConvergenceError):
    pass


class NodalStructureLost(ConvergenceError):
    pass


class InvalidInput(CampaignException, ValueError):
    status_code = ExitStatus.CONFIG_ERROR
