"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: validation/config problems exit with 2,
numerical degeneracies with 3, and I/O failures with 4.
"""


class MagicmrError(Exception):
    """Base class for all package errors."""

    code = "error"
    exit_code = 1


class ValidationError(MagicmrError):
    """Invalid inputs: bad values, malformed files, inconsistent configs."""

    code = "validation"
    exit_code = 2


class ConfigError(ValidationError):
    """Invalid simulation or analysis configuration."""

    code = "config"


class GwasParseError(ValidationError):
    """Malformed GWAS summary file; carries path and line diagnostics."""

    code = "gwas-parse"

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc += f"line {line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class NoCommonSnpsError(ValidationError):
    """The three GWAS files share no SNP identifiers."""

    code = "no-common-snps"


class NumericalError(MagicmrError):
    """Estimation cannot proceed for numerical reasons."""

    code = "numerical"
    exit_code = 3


class InsufficientInstrumentsError(NumericalError):
    """A selected instrument set is too small for the requested estimator."""

    code = "insufficient-instruments"


class DegenerateDesignError(NumericalError):
    """The estimating-equation matrix is singular or too ill-conditioned."""

    code = "degenerate-design"

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
