"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` used by the CLI when
reporting failures on stderr.
"""


class SturmPolyError(Exception):
    kind = "error"
    exit_code = 4


class InputError(SturmPolyError):
    kind = "InputError"
    exit_code = 2


class InvalidProblem(InputError):
    kind = "InvalidProblem"


class InvalidContour(InputError):
    kind = "InvalidContour"


class SolverError(SturmPolyError):
    kind = "SolverError"
    exit_code = 4


class StepFailure(SolverError):
    kind = "StepFailure"


class NearPole(SolverError):
    kind = "NearPole"


class ZeroOnContour(SolverError):
    kind = "ZeroOnContour"


class NonIntegerWinding(SolverError):
    kind = "NonIntegerWinding"


class CountMismatch(SolverError):
    kind = "CountMismatch"


class NewtonDivergence(SolverError):
    kind = "NewtonDivergence"


class CrossCheckFailure(SolverError):
    kind = "CrossCheckFailure"


class HeadTooLarge(SolverError):
    kind = "HeadTooLarge"


class PoleOnContour(SolverError):
    kind = "PoleOnContour"


class HeadEscaped(SolverError):
    kind = "HeadEscaped"


class IllConditioned(SolverError):
    kind = "IllConditioned"


class DegreeViolation(SolverError):
    kind = "DegreeViolation"


class FitResidualTooLarge(SolverError):
    kind = "FitResidualTooLarge"


class VerificationFailure(SturmPolyError):
    kind = "VerificationFailure"
    exit_code = 5
