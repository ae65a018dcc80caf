class SaeError(Exception):
    exit_code = 2


class UsageError(SaeError):
    exit_code = 1


class ConfigError(SaeError):
    exit_code = 1


class DimensionError(SaeError):
    pass


class OutOfRangeError(SaeError, IndexError):
    pass


class NumericsError(SaeError):
    exit_code = 3

    def __init__(self, message: str, parameter: str | None = None, checkpoint_path: str | None = None):
        super().__init__(message)
        self.parameter = parameter
        self.checkpoint_path = checkpoint_path


class DegenerateFeatureError(SaeError):
    def __init__(self, message: str, feature: int | None = None):
        super().__init__(message)
        self.feature = feature


class DegenerateDataError(SaeError):
    pass


class FormatError(SaeError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EmptyFeatureError(SaeError):
    pass


class ManifestError(SaeError):
    pass


class ParseError(SaeError):
    pass


class BackendError(SaeError):
    pass


class DescriberError(SaeError):
    pass


class GeneratorError(SaeError):
    pass


class PipelineError(SaeError):
    pass


class StaleStoreError(SaeError):
    pass
