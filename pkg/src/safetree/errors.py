"""Exception types shared across the package.

The CLI maps these onto exit codes: input errors exit 1, domain errors
exit 2, training divergence exit 3.
"""


class InputError(Exception):
    """A problem with an input file (syntax or schema)."""


class ParseError(InputError):
    """Malformed record or text; message carries the offending position."""


class SchemaError(InputError):
    """Structurally valid input with inconsistent shape or content."""


class DomainError(Exception):
    """Operation called outside its domain (empty data, bad dimension...)."""


class ConfigError(DomainError):
    """Unknown or invalid configuration value."""


class TrainingDiverged(Exception):
    """Policy optimization blew up; carries a diagnostic message."""
