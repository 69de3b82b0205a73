class BatchNormError(Exception):
    """ Base class for every error raised by the library and the jobs. """
    exit_code = 1


class DimensionError(BatchNormError):
    pass


class NumericError(BatchNormError):
    pass


class BatchTooSmallError(BatchNormError):
    pass


class ConfigError(BatchNormError):
    exit_code = 2


class StateError(BatchNormError):
    exit_code = 2


class DataFormatError(BatchNormError):
    exit_code = 3


class VerificationError(BatchNormError):
    exit_code = 4
