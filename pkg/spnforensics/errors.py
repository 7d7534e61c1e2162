__all__ = [
    'SpnError',
    'UsageError',
    'DataError',
    'ImageReadError',
    'CorruptContainerError',
    'DimensionError',
    'DegenerateSignalError',
    'InsufficientDataError',
    'NumericError',
    'SpnWarning',
    'SaturationWarning',
    'FewPatchesWarning',
    'ShallowDecompositionWarning',
]


class SpnError(Exception):
    pass


class UsageError(SpnError):
    pass


class DataError(SpnError, ValueError):
    pass


class ImageReadError(DataError):
    def __init__(self, path, reason):
        DataError.__init__(self, '%s: %s' % (path, reason))
        self.path = path
        self.reason = reason


class CorruptContainerError(DataError):
    pass


class DimensionError(DataError):
    pass


class DegenerateSignalError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class NumericError(SpnError, ArithmeticError):
    def __init__(self, msg, epoch=None, batch=None):
        SpnError.__init__(self, msg)
        self.epoch = epoch
        self.batch = batch


class SpnWarning(RuntimeWarning):
    pass


class SaturationWarning(SpnWarning):
    pass


class FewPatchesWarning(SpnWarning):
    pass


class ShallowDecompositionWarning(SpnWarning):
    pass
