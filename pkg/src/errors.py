"""Exception hierarchy shared by every package.

Each category carries the process exit code the CLI returns for it.
"""


class LocalizerError(Exception):
    exit_code = 1


class ConfigError(LocalizerError):
    exit_code = 2


class FormatError(LocalizerError):
    """Malformed or truncated input file."""
    exit_code = 3


class ShapeError(LocalizerError):
    exit_code = 4


class ValidationError(LocalizerError):
    exit_code = 4


class UsageError(LocalizerError):
    exit_code = 5


class NumericalError(LocalizerError):
    exit_code = 6


class FrameError(LocalizerError):
    """Wraps a failure inside the streaming loop with the failing frame index."""

    def __init__(self, frame_index, cause):
        self.frame_index = frame_index
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"frame {frame_index}: {cause}")
