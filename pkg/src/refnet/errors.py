"""Exception types that the command-line layer maps to exit codes."""


class ConfigError(ValueError):
    """Bad or inconsistent configuration (exit code 2)."""


class PrerequisiteError(RuntimeError):
    """A stage was asked to run before its inputs exist (exit code 3)."""


class NumericError(FloatingPointError):
    """Non-finite values or a failed numeric check (exit code 4)."""


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or incompatible checkpoint file."""
