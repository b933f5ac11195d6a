"""Exception types shared across the toolkit.

Each class carries a short machine-readable ``code`` used by the CLI as the
error-line prefix (``ERROR:<code>: message``).
"""


class SumsrError(Exception):
    code = "error"


class LoadError(SumsrError):
    """A referenced file is missing or cannot be parsed."""

    code = "load"


class SchemaError(SumsrError):
    """A file parsed but violates its declared schema."""

    code = "schema"


class DataError(SumsrError):
    """Data content violates a type invariant (non-finite values, bad masks)."""

    code = "data"


class ConfigError(SumsrError):
    """Invalid configuration or infeasible parameter combination."""

    code = "config"


class InputError(SumsrError):
    """An operation received arguments outside its contract."""

    code = "input"


class NumericError(SumsrError):
    """Non-finite values reached a numeric kernel."""

    code = "numeric"


class TrainingError(SumsrError):
    """Optimization diverged or a stage precondition failed mid-run."""

    code = "training"


class ContractError(SumsrError):
    """An internal contract was violated by a caller-supplied value."""

    code = "contract"


class NotFoundError(SumsrError):
    """A lookup by id or path found nothing."""

    code = "lookup"
