"""
Multi-record MOESP estimator

Four stages, the same as for a single contiguous record:
    1. project the output data onto the orthogonal complement of the
       input row space (projectOutInputs)
    2. take the column space of the extended observability matrix from
       the SVD of the projection, and recover (A,C) from its shift
       structure (extractAC)
    3. build the structured regression for vec(B), vec(D) and one initial
       state per regression window (buildUpsilon)
    4. solve it by truncated SVD (solveBDx0)

fit() runs all four, behind the identifiability gate.

EXAMPLE:
    data=buildMultirecord(archive,ColumnSelection.fromCounts(archive,[0,0,0,2,2,1,0]),3)
    result=fit(data,n=2)
    print(result.model.A,result.initialStates)
"""
import typing
import json
import logging
import warnings
import numpy as np
import scipy.linalg
from . import config
from .errors import (
    IdentifiabilityError,InsufficientExcitationError,NumericalError,
    DimensionError,SelectionError,IllConditionedRegressionWarning)
from .util import thresholdRank,truncatedPinv,conditionNumber
from .ltiModel import StateSpaceModel
from .dataArchive import MultiRecordMatrices,RegressionWindow,SegmentKey
from .identifiability import RankConfig,IdentifiabilityReport,checkIdentifiability


logger=logging.getLogger(__name__)


class ProjectionResult:
    """
    Y projected onto the orthogonal complement of the row space of U
    """

    def __init__(self,
        projected:np.ndarray,
        inputRowRank:int,
        columns:int):
        """ """
        self.projected=projected
        self.inputRowRank=inputRowRank
        self.columns=columns

    @property
    def projectorRank(self)->int:
        """
        Rank of the projector I - U^T (U U^T)^+ U
        """
        return self.columns-self.inputRowRank

    def __repr__(self)->str:
        return f'ProjectionResult(shape={self.projected.shape}, projectorRank={self.projectorRank})'


def inputRowBasis(
    U:np.ndarray,
    cfg:typing.Optional[RankConfig]=None
    )->np.ndarray:
    """
    Orthonormal basis (j x r) of the row space of U, truncated at the
    configured relative threshold
    """
    if cfg is None:
        cfg=RankConfig()
    _,s,vt=scipy.linalg.svd(np.asarray(U,dtype=float),full_matrices=False)
    rank=thresholdRank(s,cfg.relTol,cfg.absTol)
    return vt[:rank].T


def projectOntoComplement(M:np.ndarray,basis:np.ndarray)->np.ndarray:
    """
    M (I - V V^T) for an orthonormal column basis V,
    without forming the j x j projector
    """
    return M-(M@basis)@basis.T


def projectOutInputs(
    data:MultiRecordMatrices,
    cfg:typing.Optional[RankConfig]=None
    )->ProjectionResult:
    """
    Step 1: Y times the projector onto the complement of the row space of U
    """
    if data.j<1:
        raise DimensionError('data matrices have no columns')
    basis=inputRowBasis(data.U,cfg)
    projected=projectOntoComplement(np.asarray(data.Y),basis)
    return ProjectionResult(projected,basis.shape[1],data.j)


def extractAC(
    projected:ProjectionResult,
    n:int,
    p:int,
    ell:int,
    cfg:typing.Optional[RankConfig]=None
    )->typing.Tuple[np.ndarray,np.ndarray,np.ndarray,np.ndarray]:
    """
    Steps 2 and 3: column space of the observability matrix, then (A,C)

        Gamma = Q1 S1^(1/2)            (first n left singular vectors)
        C = Gamma[:p]
        A = Gamma[:(ell-1)p]^+ Gamma[p:]

    returns (A,C,Gamma,singularValues)
    """
    if cfg is None:
        cfg=RankConfig()
    n,p,ell=int(n),int(p),int(ell)
    if ell<=n:
        raise DimensionError(f'ell={ell} must exceed n={n}')
    q,s,_=scipy.linalg.svd(projected.projected,full_matrices=False)
    rank=cfg.rankOf(s)
    logger.debug('projected output singular values %s (rank %d)',s,rank)
    if rank<n:
        raise InsufficientExcitationError(
            f'projected output data has numerical rank {rank} < n={n}; the data are not exciting enough',s) # noqa: E501
    gamma=q[:,:n]*np.sqrt(s[:n])
    C=gamma[:p].copy()
    upper=gamma[:(ell-1)*p]
    lower=gamma[p:]
    upperPinv,upperRank,_=truncatedPinv(upper,cfg.relTol,cfg.absTol)
    if upperRank<n:
        raise NumericalError(
            f'shifted observability block has rank {upperRank} < n={n}')
    A=upperPinv@lower
    return A,C,gamma,s


def _observabilityPowers(A:np.ndarray,C:np.ndarray,count:int)->np.ndarray:
    """
    (count,p,n) array of C A^k, k=0..count-1, by repeated multiplication
    """
    ret=np.empty((count,)+C.shape)
    ret[0]=C
    with np.errstate(over='ignore',invalid='ignore'):
        for k in range(1,count):
            ret[k]=ret[k-1]@A
    if not np.all(np.isfinite(ret)):
        raise NumericalError(
            f'powers of the estimated A overflowed within {count} samples (|eig| too large)')
    return ret


def buildUpsilon(
    A:np.ndarray,
    C:np.ndarray,
    windows:typing.Sequence[RegressionWindow]
    )->typing.Tuple[np.ndarray,np.ndarray]:
    """
    Step 4 regression: vec(Y) = Upsilon theta with
        theta = [vec(B); vec(D); x_1; x_2; ...; x_k]
    (vec stacks columns), one initial state per regression window.

    Rows go window by window, time-major inside each window.
    Within window i at time t (0-based):
        B block    sum_{tau<t} u_tau^T kron C A^(t-1-tau)
        D block    u_t^T kron I_p
        x_i block  C A^t  (all other initial-state blocks zero)

    returns (Upsilon,stackedOutputs)
    """
    A=np.asarray(A,dtype=float)
    C=np.asarray(C,dtype=float)
    n=A.shape[0]
    p=C.shape[0]
    if A.shape!=(n,n) or C.shape[1]!=n:
        raise DimensionError(f'A {A.shape} and C {C.shape} do not agree')
    if not windows:
        raise DimensionError('need at least one regression window')
    m=windows[0].inputs.shape[1]
    for window in windows:
        if window.inputs.shape[1]!=m or window.outputs.shape[1]!=p:
            raise DimensionError(
                f'{window!r} has {window.inputs.shape[1]} inputs/{window.outputs.shape[1]} outputs, expected {m}/{p}') # noqa: E501
    k=len(windows)
    rows=p*sum(window.length for window in windows)
    cols=n*m+m*p+n*k
    powers=_observabilityPowers(A,C,max(window.length for window in windows))
    upsilon=np.zeros((rows,cols))
    eyeP=np.eye(p)
    row=0
    for i,window in enumerate(windows):
        u=window.inputs
        xCol=n*m+m*p+n*i
        for t in range(window.length):
            block=slice(row,row+p)
            if t>0:
                # sum over tau of u[tau,c] * C A^(t-1-tau), laid out as [c][state]
                phiB=np.einsum('tc,tpn->pcn',u[t-1::-1],powers[:t])
                upsilon[block,:n*m]=phiB.reshape((p,m*n))
            upsilon[block,n*m:n*m+m*p]=np.kron(u[t],eyeP)
            upsilon[block,xCol:xCol+n]=powers[t]
            row+=p
    outputs=np.concatenate([window.outputs.reshape(-1) for window in windows])
    return upsilon,outputs


class RegressionSolution:
    """
    Unpacked least-squares estimate of B, D and the initial states
    """

    def __init__(self,
        B:np.ndarray,
        D:np.ndarray,
        initialStates:typing.List[np.ndarray],
        singularValues:np.ndarray,
        rank:int,
        residualNorm:float):
        """ """
        self.B=B
        self.D=D
        self.initialStates=initialStates
        self.singularValues=singularValues
        self.rank=rank
        self.residualNorm=residualNorm

    @property
    def condition(self)->float:
        """
        Condition number of Upsilon
        """
        return conditionNumber(self.singularValues)

    def __repr__(self)->str:
        return f'RegressionSolution(rank={self.rank}, condition={self.condition:.3g}, residual={self.residualNorm:.3g})' # noqa: E501


def solveBDx0(
    upsilon:np.ndarray,
    outputs:np.ndarray,
    n:int,
    m:int,
    p:int,
    cfg:typing.Optional[RankConfig]=None
    )->RegressionSolution:
    """
    Minimum-norm least squares theta = Upsilon^+ vec(Y), then unpack
    vec(B), vec(D) and the initial states.

    A rank-deficient Upsilon still gets the minimum-norm answer,
    with an IllConditionedRegressionWarning.
    """
    if cfg is None:
        cfg=RankConfig()
    cols=upsilon.shape[1]
    windows,rest=divmod(cols-n*m-m*p,n)
    if rest or windows<0 or upsilon.shape[0]!=len(outputs):
        raise DimensionError(
            f'Upsilon {upsilon.shape} does not fit n={n}, m={m}, p={p} and {len(outputs)} outputs')
    pinv,rank,sv=truncatedPinv(upsilon,cfg.relTol,cfg.absTol)
    theta=pinv@outputs
    residual=float(np.linalg.norm(upsilon@theta-outputs))
    if rank<cols:
        message=f'regression matrix {upsilon.shape} has rank {rank} < {cols} (condition {conditionNumber(sv):.3g}); using the minimum-norm solution' # noqa: E501
        logger.warning(message)
        warnings.warn(message,IllConditionedRegressionWarning,stacklevel=2)
    B=theta[:n*m].reshape((n,m),order='F')
    D=theta[n*m:n*m+m*p].reshape((p,m),order='F')
    states=[theta[n*m+m*p+n*i:n*m+m*p+n*(i+1)].copy() for i in range(windows)]
    return RegressionSolution(B,D,states,sv,rank,residual)


class EstimationResult:
    """
    An estimated model with its per-window initial states and the
    diagnostics of every stage

    initialStates is keyed by (recordId,offset,length) of each regression window.
    """

    def __init__(self,
        model:StateSpaceModel,
        initialStates:typing.Dict[SegmentKey,np.ndarray],
        svProjected:np.ndarray,
        upsilonShape:typing.Tuple[int,int],
        regression:RegressionSolution,
        identifiability:IdentifiabilityReport,
        ell:int,
        forced:bool=False):
        """ """
        self.model=model
        self.initialStates=initialStates
        self.svProjected=svProjected
        self.upsilonShape=upsilonShape
        self.regression=regression
        self.identifiability=identifiability
        self.ell=ell
        self.forced=forced

    @property
    def upsilonSingularValues(self)->np.ndarray:
        """
        Singular values of the regression matrix
        """
        return self.regression.singularValues
    @property
    def upsilonCondition(self)->float:
        """
        Condition number of the regression matrix
        """
        return self.regression.condition
    @property
    def upsilonRank(self)->int:
        """
        Numerical rank of the regression matrix
        """
        return self.regression.rank

    @property
    def stable(self)->bool:
        """
        Spectral radius of the estimated A below one
        """
        return self.model.isStable()

    def initialStateList(self)->typing.List[np.ndarray]:
        """
        Initial states in window order
        """
        return list(self.initialStates.values())

    def namedInitialStates(self)->typing.Dict[str,np.ndarray]:
        """
        Initial states named recordId@offset:length, as saved in model files
        """
        return {f'{recordId}@{offset}:{length}':x
            for (recordId,offset,length),x in self.initialStates.items()}

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        Model JSON schema plus a diagnostics block
        """
        ret=self.model.toDict(self.namedInitialStates())
        ret['diagnostics']={
            'ell':self.ell,
            'forced':self.forced,
            'identifiability':self.identifiability.toDict(),
            'svProjected':np.asarray(self.svProjected).tolist(),
            'upsilonShape':list(self.upsilonShape),
            'upsilonSingularValues':self.upsilonSingularValues.tolist(),
            'upsilonCondition':self.upsilonCondition,
            'upsilonRank':self.upsilonRank,
            'residualNorm':self.regression.residualNorm,
            'spectralRadius':self.model.spectralRadius,
            'stable':self.stable,
            'windows':[
                {'record':recordId,'offset':offset,'length':length,'state':x.tolist()}
                for (recordId,offset,length),x in self.initialStates.items()]}
        return ret

    def toJson(self)->str:
        """
        Serialize as JSON
        """
        return json.dumps(self.toDict(),indent=2)

    def __repr__(self)->str:
        return f'EstimationResult({self.model!r}, windows={len(self.initialStates)}, stable={self.stable}, forced={self.forced})' # noqa: E501


def fit(
    data:MultiRecordMatrices,
    n:int,
    windows:typing.Optional[typing.Sequence[RegressionWindow]]=None,
    cfg:typing.Optional[RankConfig]=None,
    force:bool=False
    )->EstimationResult:
    """
    Run the whole multi-record MOESP pipeline

    :windows: regression windows for B, D and the initial states
        (default: the segments the data matrices were built from)
    :force: fit even when the identifiability test fails
        (for exploring noisy archives); the result keeps the failed report
    """
    if cfg is None:
        cfg=RankConfig()
    if windows is None:
        windows=data.segments
    if not windows:
        raise DimensionError('no regression windows given and the data matrices carry none')
    keys=[window.key for window in windows]
    if len(set(keys))!=len(keys):
        raise SelectionError('two regression windows cover the same samples of one record')
    report=checkIdentifiability(data,n,cfg)
    if not report.passed:
        if not force:
            raise IdentifiabilityError(report)
        logger.warning('fitting anyway although %s',
            '; '.join(report.failedConditions()))
    m,p,ell=data.m,data.p,data.ell
    projection=projectOutInputs(data,cfg)
    A,C,_,sv=extractAC(projection,n,p,ell,cfg)
    upsilon,outputs=buildUpsilon(A,C,windows)
    solution=solveBDx0(upsilon,outputs,n,m,p,cfg)
    model=StateSpaceModel(A,solution.B,C,solution.D)
    initialStates=dict(zip(keys,solution.initialStates))
    result=EstimationResult(model,initialStates,sv,upsilon.shape,solution,report,ell,
        forced=not report.passed)
    if not result.stable:
        logger.warning('estimated model is unstable (spectral radius %.4g)',
            model.spectralRadius)
    if result.upsilonCondition>config.MAX_CONDITION:
        logger.warning('regression matrix condition number %.3g',result.upsilonCondition)
    logger.debug('%r',result)
    return result
fitMultiRecord=fit
