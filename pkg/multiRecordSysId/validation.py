"""
Model quality measures

    alignSimilarity   state coordinate change between a true and an
                      estimated model (exact tests only)
    markovDistance    similarity-invariant distance between two models
    predictValidate   per-channel prediction RMS on a held-out record

EXAMPLE:
    report=predictValidate(result,archive.record('17'))
    print(formatRmsTable({'model56':report}))
"""
import typing
import io
import json
import logging
import numpy as np
import scipy.linalg
import pandas as pd
from . import config
from .errors import (
    DimensionError,NumericalError,UnstableModelError,RecordTooShortError,LagTooSmallError)
from .util import thresholdRank
from .ltiModel import StateSpaceModel,observabilityMatrix,markovParameters,simulate
from .dataArchive import Record
from .moespEstimator import EstimationResult


logger=logging.getLogger(__name__)

ModelOrResult=typing.Union[StateSpaceModel,EstimationResult]


def _modelOf(estimate:ModelOrResult)->StateSpaceModel:
    if isinstance(estimate,EstimationResult):
        return estimate.model
    return estimate


def alignSimilarity(
    truth:StateSpaceModel,
    estimate:ModelOrResult,
    ell:int
    )->typing.Tuple[np.ndarray,float]:
    """
    Least-squares T with Gamma_ell(truth) T ~ Gamma_ell(estimate)

    The estimated state maps to the true one as x = T xhat,
    and A = T Ahat T^-1, B = T Bhat, C = Chat T^-1 hold when
    the residual is small.

    returns (T,residual) where residual is the Frobenius misfit
    """
    estimate=_modelOf(estimate)
    if truth.dimensions!=estimate.dimensions:
        raise DimensionError(
            f'models differ in (n,m,p): {truth.dimensions} vs {estimate.dimensions}')
    ell=int(ell)
    if ell<=truth.n:
        raise LagTooSmallError(f'ell={ell} must exceed n={truth.n}')
    gamma=observabilityMatrix(truth,ell)
    gammaHat=observabilityMatrix(estimate,ell)
    T,_,rank,sv=scipy.linalg.lstsq(gamma,gammaHat)
    if rank<truth.n or thresholdRank(sv,config.RANK_TOL)<truth.n:
        raise NumericalError(
            f'observability matrix of the true model has rank {rank} < n={truth.n}')
    residual=float(np.linalg.norm(gamma@T-gammaHat))
    return T,residual


def markovDistance(
    a:ModelOrResult,
    b:ModelOrResult,
    count:typing.Optional[int]=None,
    relative:bool=False
    )->float:
    """
    Root-sum-square Frobenius difference of the first `count` Markov
    parameters (D, CB, CAB, ...)

    :count: defaults to 4*max(n_a,n_b)
    :relative: divide by the same norm of a's Markov parameters
    """
    a=_modelOf(a)
    b=_modelOf(b)
    if (a.m,a.p)!=(b.m,b.p):
        raise DimensionError(f'models differ in (m,p): {(a.m,a.p)} vs {(b.m,b.p)}')
    if count is None:
        count=config.MARKOV_PER_STATE*max(a.n,b.n)
    markovA=markovParameters(a,count)
    markovB=markovParameters(b,count)
    distance=float(np.sqrt(sum(np.sum((x-y)**2) for x,y in zip(markovA,markovB))))
    if relative:
        scale=float(np.sqrt(sum(np.sum(x**2) for x in markovA)))
        if scale>0.0:
            distance/=scale
    return distance


class ValidationReport:
    """
    Prediction quality of one model on one held-out record
    """

    def __init__(self,
        perChannelRms:np.ndarray,
        horizon:int,
        validationRecordId:str,
        estimatedValidationX0:np.ndarray,
        markovDistance:typing.Optional[float]=None):
        """ """
        self.perChannelRms=np.asarray(perChannelRms,dtype=float)
        self.horizon=int(horizon)
        self.validationRecordId=validationRecordId
        self.estimatedValidationX0=np.asarray(estimatedValidationX0,dtype=float)
        self.markovDistance=markovDistance

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        JSON-friendly form
        """
        return {
            'perChannelRms':self.perChannelRms.tolist(),
            'horizon':self.horizon,
            'validationRecordId':self.validationRecordId,
            'estimatedValidationX0':self.estimatedValidationX0.tolist(),
            'markovDistance':self.markovDistance}

    def toJson(self)->str:
        """
        Serialize as JSON
        """
        return json.dumps(self.toDict(),indent=2)

    def __repr__(self)->str:
        rms=', '.join(f'{r:.4g}' for r in self.perChannelRms)
        return f'ValidationReport({self.validationRecordId!r}, rms=[{rms}], horizon={self.horizon})'


def estimateInitialState(
    model:StateSpaceModel,
    record:Record,
    nFit:int
    )->np.ndarray:
    """
    Least-squares initial state from the first nFit samples with B and D fixed:
        y_t - (zero-state response)_t = C A^t x1
    """
    zeroState=simulate(model,np.zeros(model.n),record.inputs[:nFit]).outputs
    residual=(record.outputs[:nFit]-zeroState).reshape(-1)
    x1,_,_,_=scipy.linalg.lstsq(observabilityMatrix(model,nFit),residual)
    return x1


def predictValidate(
    estimate:ModelOrResult,
    record:Record,
    nFit:typing.Optional[int]=None,
    horizon:typing.Optional[int]=None,
    truth:typing.Optional[StateSpaceModel]=None,
    ell:typing.Optional[int]=None
    )->ValidationReport:
    """
    Estimate the record's initial state, simulate the model over the
    record and report the per-channel RMS of y - yhat

    For a deterministic model the one-step-ahead predictor coincides
    with simulation from the estimated state.

    :nFit: samples used for the initial state (default min(2*ell,N))
    :horizon: number of samples to evaluate; required for an unstable model
    :truth: when given, the Markov distance to it goes in the report
    :ell: window length the model was fit with (taken from an
        EstimationResult; n+1 when neither is known)
    """
    model=_modelOf(estimate)
    if (record.m,record.p)!=(model.m,model.p):
        raise DimensionError(
            f'record {record.recordId!r} has {record.m} inputs/{record.p} outputs, model has {model.m}/{model.p}') # noqa: E501
    if record.length<model.n:
        raise RecordTooShortError(
            f'record {record.recordId!r} has {record.length} samples, need at least n={model.n}')
    if nFit is None:
        if ell is None:
            ell=estimate.ell if isinstance(estimate,EstimationResult) else model.n+1
        nFit=min(2*int(ell),record.length)
    nFit=max(model.n,min(int(nFit),record.length))
    if horizon is None:
        if not model.isStable():
            raise UnstableModelError(
                f'model is unstable (spectral radius {model.spectralRadius:.4g}); give a bounded horizon') # noqa: E501
        horizon=record.length
    horizon=min(int(horizon),record.length)
    if horizon<1:
        raise DimensionError(f'horizon must be positive, got {horizon}')
    x1=estimateInitialState(model,record,nFit)
    predicted=simulate(model,x1,record.inputs[:horizon]).outputs
    rms=np.sqrt(np.mean((record.outputs[:horizon]-predicted)**2,axis=0))
    distance=None if truth is None else markovDistance(truth,model)
    report=ValidationReport(rms,horizon,record.recordId,x1,distance)
    logger.debug('%r',report)
    return report


def formatRmsTable(
    reports:typing.Dict[str,ValidationReport],
    scale:float=100.0
    )->str:
    """
    Plain text grid: one row per output channel, one column per model,
    RMS values multiplied by `scale`
    """
    if not reports:
        return ''
    channels={len(report.perChannelRms) for report in reports.values()}
    if len(channels)!=1:
        raise DimensionError('reports disagree on the number of output channels')
    frame=pd.DataFrame(
        {name:report.perChannelRms*scale for name,report in reports.items()},
        index=[f'y{i+1}' for i in range(channels.pop())])
    header=f'RMS prediction error (x{scale:g})'
    return header+'\n'+frame.to_string(float_format=lambda v:f'{v:.4f}')


def singularValueCsv(
    spectra:typing.Dict[str,typing.Sequence[float]],
    filename:typing.Optional[str]=None
    )->str:
    """
    Singular value spectra as CSV, one column per spectrum
    (shorter spectra are padded with empty cells)

    :filename: also write the text there
    """
    frame=pd.DataFrame({
        name:pd.Series(np.asarray(values,dtype=float)) for name,values in spectra.items()})
    frame.index=pd.RangeIndex(1,len(frame)+1,name='index')
    buffer=io.StringIO()
    frame.to_csv(buffer,float_format='%.17g')
    text=buffer.getvalue()
    if filename is not None:
        with open(filename,'w',encoding='utf-8') as f:
            f.write(text)
    return text
