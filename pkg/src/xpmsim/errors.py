"""Exception hierarchy. Each CLI-facing error carries its process exit code."""


class XpmError(Exception):
    exit_code = 1


class ConfigIOError(XpmError):
    exit_code = 10


class ConfigParseError(XpmError):
    exit_code = 11


class ConfigValidationError(XpmError, ValueError):
    """Invalid configuration value; ``path`` is the dotted field path."""

    exit_code = 12

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalBlowupError(XpmError):
    exit_code = 20

    def __init__(self, time: float, message: str = "non-finite state"):
        self.time = time
        super().__init__(f"{message} at t = {time:.6e} s")
