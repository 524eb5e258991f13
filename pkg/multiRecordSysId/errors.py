"""
Exceptions raised by the identification pipeline

Everything derives from SysIdError so callers (and the command line)
can catch the whole family at once.
"""
import typing
if typing.TYPE_CHECKING:
    from .identifiability import IdentifiabilityReport


class SysIdError(Exception):
    """
    Base class for all multi-record identification errors
    """


class DimensionError(SysIdError,ValueError):
    """
    Matrix or vector shapes do not agree with the model dimensions
    """


class ArchiveFormatError(SysIdError,ValueError):
    """
    An archive or selection file could not be understood
    """

    def __init__(self,message:str,row:typing.Optional[int]=None):
        """
        :row: 1-based line number in the file, if known
        """
        if row is not None:
            message=f'row {row}: {message}'
        SysIdError.__init__(self,message)
        self.row=row


class SelectionError(SysIdError,ValueError):
    """
    A column selection does not fit the archive it is applied to
    """


class RecordTooShortError(SysIdError,ValueError):
    """
    A record does not hold enough samples for the requested windows
    """


class LagTooSmallError(SysIdError,ValueError):
    """
    The window length ell does not exceed the state dimension
    (or the known maximal lag)
    """


class IdentifiabilityError(SysIdError):
    """
    The data failed the rank test and fitting was not forced
    """

    def __init__(self,report:"IdentifiabilityReport"):
        """ """
        self.report=report
        failed='; '.join(report.failedConditions())
        SysIdError.__init__(self,f'data not identifiable: {failed}')


class NumericalError(SysIdError,ArithmeticError):
    """
    A numerical stage of the algorithm could not proceed
    """


class InsufficientExcitationError(NumericalError):
    """
    The projected output matrix has rank below the model order
    """

    def __init__(self,message:str,singularValues:typing.Sequence[float]=()):
        """ """
        NumericalError.__init__(self,message)
        self.singularValues=list(singularValues)


class SingularTransformError(NumericalError):
    """
    A state transformation is singular or too badly conditioned to invert
    """


class UnstableModelError(NumericalError):
    """
    Long-horizon simulation was requested for an unstable model
    """


class IllConditionedRegressionWarning(UserWarning):
    """
    The structured least-squares problem is rank deficient or badly conditioned
    """
