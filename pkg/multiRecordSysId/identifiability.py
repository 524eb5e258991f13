"""
Numerical rank tests deciding whether a collection of data windows is
rich enough to identify a minimal model of known order n

The gate has three parts:
    rank U = m*ell                (inputs are free)
    rank [U;Y] = m*ell+n          (columns span the length-ell behavior)
    j >= m*ell+n                  (enough columns for the above to be possible)

greedySelect uses the same test as a sorting criterion: records are
accepted one by one only if they add rank.

EXAMPLE:
    cfg=RankConfig(relTol=1e-8)
    report=checkIdentifiability(data,n=2,cfg=cfg)
    if not report.passed:
        print(report.failedConditions())
"""
import typing
import json
import logging
import numpy as np
from . import config
from .errors import LagTooSmallError,RecordTooShortError,DimensionError
from .util import singularValues,thresholdRank
from .dataArchive import (
    Archive,Record,ColumnSelection,SelectionEntry,MultiRecordMatrices,
    buildMultirecord,stackWindows)


logger=logging.getLogger(__name__)

RANK_MODES=('threshold','gap')


class RankConfig:
    """
    How numerical rank is decided

    threshold mode: rank = number of singular values above
        max(relTol*sigma_1,absTol)
    gap mode: rank = position of the largest ratio sigma_r/sigma_(r+1),
        provided it exceeds gapRatio (otherwise every singular value above
        the threshold counts)

    knownLag is the maximal system lag L, if known.  When it is absent
    ell>n is required instead of ell>L.
    """

    def __init__(self,
        relTol:typing.Optional[float]=None,
        absTol:typing.Optional[float]=None,
        knownLag:typing.Optional[int]=None,
        mode:typing.Optional[str]=None,
        gapRatio:typing.Optional[float]=None):
        """ """
        self.relTol=config.RANK_TOL if relTol is None else float(relTol)
        self.absTol=config.ABS_TOL if absTol is None else float(absTol)
        self.knownLag=None if knownLag is None else int(knownLag)
        self.mode=config.RANK_MODE if mode is None else str(mode)
        self.gapRatio=config.GAP_RATIO if gapRatio is None else float(gapRatio)
        if not 0.0<self.relTol<1.0:
            raise ValueError(f'relTol must be in (0,1), got {self.relTol}')
        if self.absTol<0.0:
            raise ValueError(f'absTol must be >= 0, got {self.absTol}')
        if self.mode not in RANK_MODES:
            raise ValueError(f'rank mode must be one of {RANK_MODES}, got {self.mode!r}')
        if self.gapRatio<=1.0:
            raise ValueError(f'gapRatio must exceed 1, got {self.gapRatio}')
        if self.knownLag is not None and self.knownLag<0:
            raise ValueError(f'knownLag must be >= 0, got {self.knownLag}')

    def rankOf(self,sv:np.ndarray)->int:
        """
        Numerical rank of a matrix with singular values sv (largest first)
        """
        rank=thresholdRank(sv,self.relTol,self.absTol)
        if self.mode=='threshold' or rank<2:
            return rank
        kept=np.asarray(sv[:rank],dtype=float)
        ratios=kept[:-1]/kept[1:]
        best=int(np.argmax(ratios))
        if ratios[best]>self.gapRatio:
            return best+1
        return rank

    def checkEll(self,ell:int,n:int)->None:
        """
        Enforce ell>L (or ell>n when L is unknown)
        """
        if self.knownLag is not None:
            if ell<=self.knownLag:
                raise LagTooSmallError(f'ell={ell} must exceed the maximal lag L={self.knownLag}')
        elif ell<=n:
            raise LagTooSmallError(f'ell={ell} must exceed the state dimension n={n}')

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        JSON-friendly form
        """
        return {'relTol':self.relTol,'absTol':self.absTol,'knownLag':self.knownLag,
            'mode':self.mode,'gapRatio':self.gapRatio}

    def __repr__(self)->str:
        return f'RankConfig(relTol={self.relTol:g}, absTol={self.absTol:g}, mode={self.mode!r})'


def numericalRank(
    M:np.ndarray,
    cfg:typing.Optional[RankConfig]=None
    )->typing.Tuple[int,np.ndarray]:
    """
    Rank-revealing SVD

    returns (rank,singularValues) with the full spectrum, largest first
    """
    if cfg is None:
        cfg=RankConfig()
    M=np.asarray(M,dtype=float)
    if M.size==0:
        raise DimensionError('cannot take the rank of an empty matrix')
    sv=singularValues(M)
    return cfg.rankOf(sv),sv


class IdentifiabilityReport:
    """
    Spectra, numerical ranks and verdicts of the identifiability test
    """

    def __init__(self,
        svU:np.ndarray,
        svW:np.ndarray,
        rankU:int,
        rankW:int,
        m:int,
        p:int,
        n:int,
        ell:int,
        j:int):
        """ """
        self.svU=np.asarray(svU,dtype=float)
        self.svW=np.asarray(svW,dtype=float)
        self.rankU=int(rankU)
        self.rankW=int(rankW)
        self.m=m
        self.p=p
        self.n=n
        self.ell=ell
        self.j=j

    @property
    def requiredRankU(self)->int:
        """
        m*ell
        """
        return self.m*self.ell
    @property
    def requiredRankW(self)->int:
        """
        m*ell+n
        """
        return self.m*self.ell+self.n

    @property
    def inputRankOk(self)->bool:
        """
        rank U = m*ell
        """
        return self.rankU==self.requiredRankU
    @property
    def jointRankOk(self)->bool:
        """
        rank [U;Y] = m*ell+n
        """
        return self.rankW==self.requiredRankW
    @property
    def columnFeasible(self)->bool:
        """
        j >= m*ell+n
        """
        return self.j>=self.requiredRankW

    @property
    def passed(self)->bool:
        """
        All three conditions hold
        """
        return self.inputRankOk and self.jointRankOk and self.columnFeasible

    def failedConditions(self)->typing.List[str]:
        """
        A readable line for every violated condition
        """
        ret=[]
        if not self.columnFeasible:
            ret.append(
                f'column count condition: j={self.j} < m*ell+n={self.requiredRankW}')
        if not self.inputRankOk:
            ret.append(
                f'input rank condition: rank U={self.rankU} != m*ell={self.requiredRankU}')
        if not self.jointRankOk:
            ret.append(
                f'joint rank condition: rank [U;Y]={self.rankW} != m*ell+n={self.requiredRankW}')
        return ret

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        JSON-friendly form
        """
        return {
            'ell':self.ell,'m':self.m,'p':self.p,'n':self.n,'j':self.j,
            'svU':self.svU.tolist(),'svW':self.svW.tolist(),
            'rankU':self.rankU,'rankW':self.rankW,
            'requiredRankU':self.requiredRankU,'requiredRankW':self.requiredRankW,
            'inputRankOk':self.inputRankOk,'jointRankOk':self.jointRankOk,
            'columnFeasible':self.columnFeasible,'pass':self.passed,
            'failedConditions':self.failedConditions()}

    def toJson(self)->str:
        """
        Serialize as JSON
        """
        return json.dumps(self.toDict(),indent=2)

    def __str__(self)->str:
        ret=[
            f'ell={self.ell} m={self.m} p={self.p} n={self.n} j={self.j}',
            'sv U     : '+' '.join(f'{s:.4g}' for s in self.svU),
            'sv [U;Y] : '+' '.join(f'{s:.4g}' for s in self.svW),
            f'rank U     = {self.rankU} (need {self.requiredRankU}) {"ok" if self.inputRankOk else "FAIL"}', # noqa: E501
            f'rank [U;Y] = {self.rankW} (need {self.requiredRankW}) {"ok" if self.jointRankOk else "FAIL"}', # noqa: E501
            f'columns    = {self.j} (need >= {self.requiredRankW}) {"ok" if self.columnFeasible else "FAIL"}', # noqa: E501
            'IDENTIFIABLE' if self.passed else 'NOT IDENTIFIABLE']
        return '\n'.join(ret)

    def __repr__(self)->str:
        return f'IdentifiabilityReport(rankU={self.rankU}/{self.requiredRankU}, rankW={self.rankW}/{self.requiredRankW}, j={self.j}, pass={self.passed})' # noqa: E501


def checkIdentifiability(
    data:MultiRecordMatrices,
    n:int,
    cfg:typing.Optional[RankConfig]=None
    )->IdentifiabilityReport:
    """
    Run the rank test on a pair of data matrices

    Raises LagTooSmallError (rather than returning a failed report)
    when ell does not exceed n (or the known lag).
    """
    if cfg is None:
        cfg=RankConfig()
    n=int(n)
    if n<1:
        raise DimensionError(f'model order must be >= 1, got {n}')
    cfg.checkEll(data.ell,n)
    if data.j<1:
        raise DimensionError('data matrices have no columns')
    rankU,svU=numericalRank(data.U,cfg)
    rankW,svW=numericalRank(data.W,cfg)
    report=IdentifiabilityReport(svU,svW,rankU,rankW,data.m,data.p,n,data.ell,data.j)
    logger.debug('%r',report)
    return report


class GreedyStep:
    """
    One record considered by greedySelect

    report describes the accumulated selection after this step.
    """

    def __init__(self,recordId:str,accepted:bool,report:IdentifiabilityReport):
        """ """
        self.recordId=recordId
        self.accepted=accepted
        self.report=report

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        JSON-friendly form
        """
        return {'recordId':self.recordId,'accepted':self.accepted,
            'rankU':self.report.rankU,'rankW':self.report.rankW,
            'j':self.report.j,'pass':self.report.passed}

    def __repr__(self)->str:
        verdict='accepted' if self.accepted else 'rejected'
        return f'GreedyStep({self.recordId!r} {verdict}, {self.report!r})'


def greedySelect(
    archive:Archive,
    n:int,
    ell:int,
    cfg:typing.Optional[RankConfig]=None,
    stride:typing.Optional[int]=None
    )->typing.Tuple[ColumnSelection,typing.List[GreedyStep]]:
    """
    Walk the archive in order, accepting a whole record's windows
    only when they raise rank U or rank [U;Y] of what has been
    accepted so far.  Stops as soon as the accumulated data pass.

    Records too short for a single window are skipped.

    returns (selection,history)
    """
    if cfg is None:
        cfg=RankConfig()
    if stride is None:
        stride=config.STRIDE
    cfg.checkEll(ell,n)
    selection=ColumnSelection()
    history:typing.List[GreedyStep]=[]
    current:typing.Optional[IdentifiabilityReport]=None
    for record in archive:
        count=record.windowCount(ell,stride)
        if count<1:
            logger.debug('skipping record %r: shorter than ell=%d',record.recordId,ell)
            continue
        candidate=selection+ColumnSelection([SelectionEntry(record.recordId,0,count,stride)])
        report=checkIdentifiability(buildMultirecord(archive,candidate,ell),n,cfg)
        prevU=0 if current is None else current.rankU
        prevW=0 if current is None else current.rankW
        accepted=report.rankU>prevU or report.rankW>prevW
        if accepted:
            selection=candidate
            current=report
            logger.info('accepted record %r: rank U %d, rank [U;Y] %d',
                record.recordId,report.rankU,report.rankW)
        else:
            logger.info('rejected record %r: no rank increase',record.recordId)
        # an all-zero first record leaves nothing accepted yet
        history.append(GreedyStep(record.recordId,accepted,current or report))
        if current is not None and current.passed:
            break
    return selection,history


def willemsPeDiagnostic(
    record:Record,
    ell:int,
    n:int,
    cfg:typing.Optional[RankConfig]=None
    )->bool:
    """
    Single-record persistence of excitation check:
    the block-Hankel input matrix of depth ell+n built from the whole
    record must have full row rank m*(ell+n).

    Diagnostic only, it never gates estimation.
    """
    if cfg is None:
        cfg=RankConfig()
    depth=int(ell)+int(n)
    rows=record.m*depth
    columns=record.length-depth+1
    if columns<rows:
        raise RecordTooShortError(
            f'record {record.recordId!r} has {record.length} samples, the depth-{depth} test needs {rows+depth-1}') # noqa: E501
    hankel=stackWindows(record.inputs,list(range(columns)),depth)
    rank,_=numericalRank(hankel,cfg)
    return rank==rows
