class ConfigurationError(ValueError):
    """Invalid parameters: Nyquist violations, bad filter specs, bad schema."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class AnalysisError(RuntimeError):
    """Raised when a capture cannot support the requested measurement."""


class StageError(RuntimeError):
    """Wraps a failure inside the pipeline with the stage and follower it came from."""

    def __init__(self, stage: str, follower: int | None, cause: Exception):
        self.stage = stage
        self.follower = follower
        self.cause = cause
        where = stage if follower is None else f"{stage} (follower {follower})"
        super().__init__(f"{where}: {cause}")
