"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``code`` used by the CLI when
emitting error records on stderr.
"""


class HmflowError(Exception):
    code = "error"
    exit_code = 4


class InvalidInput(HmflowError, ValueError):
    code = "invalid_input"
    exit_code = 2


class DimensionTooSmall(InvalidInput):
    code = "dimension_too_small"


class IndexOutOfRange(InvalidInput, IndexError):
    code = "index_out_of_range"


class DomainError(InvalidInput):
    code = "domain_error"


class SignError(InvalidInput):
    code = "sign_error"


class SpecViolation(InvalidInput):
    code = "spec_violation"


class NegativeMode(InvalidInput):
    code = "negative_mode"


class NeutralMode(HmflowError):
    """lambda_l == 0: the rate carries logarithmic corrections not modelled here."""

    code = "neutral_mode"
    exit_code = 3


class NumericalFailure(HmflowError, ArithmeticError):
    code = "numerical_failure"
    exit_code = 4


class QuadratureNonConvergent(NumericalFailure):
    code = "quadrature_nonconvergent"


class NonIntegrable(NumericalFailure):
    code = "non_integrable"


class SeriesStartFailure(NumericalFailure):
    code = "series_start_failure"


class IntegrationBlowup(NumericalFailure):
    code = "integration_blowup"


class FitUnstable(NumericalFailure):
    code = "fit_unstable"


class EmptyOverlap(NumericalFailure):
    code = "empty_overlap"


class StepSizeUnderflow(NumericalFailure):
    code = "step_size_underflow"


class CFLViolation(NumericalFailure):
    code = "cfl_violation"


class InsufficientDecades(NumericalFailure):
    code = "insufficient_decades"


class FitDiverged(NumericalFailure):
    code = "fit_diverged"


class WindowTooShort(NumericalFailure):
    code = "window_too_short"
