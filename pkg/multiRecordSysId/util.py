"""
General useful tools

Small linear algebra helpers shared by the model, archive and estimator
modules.  Everything works on dense float64 numpy arrays.
"""
import typing
import numpy as np
import scipy.linalg
from .errors import DimensionError


ArrayCompatible=typing.Union[np.ndarray,typing.Sequence[typing.Any],float,int]


def asMatrix(
    value:ArrayCompatible,
    rows:typing.Optional[int]=None,
    cols:typing.Optional[int]=None,
    name:str='matrix'
    )->np.ndarray:
    """
    Convert something array-like into a 2d float matrix and
    (optionally) check its shape.

    Scalars become 1x1, and a flat sequence is reshaped to the
    requested shape if it has the right number of elements.
    """
    ret=np.array(value,dtype=float)
    if ret.ndim<2:
        if rows is not None and cols is not None and ret.size==rows*cols:
            ret=ret.reshape((rows,cols))
        else:
            ret=np.atleast_2d(ret)
    if ret.ndim!=2:
        raise DimensionError(f'{name} must be 2-dimensional, got shape {ret.shape}')
    if rows is not None and ret.shape[0]!=rows:
        raise DimensionError(f'{name} must have {rows} rows, got shape {ret.shape}')
    if cols is not None and ret.shape[1]!=cols:
        raise DimensionError(f'{name} must have {cols} columns, got shape {ret.shape}')
    return ret


def asVector(
    value:ArrayCompatible,
    length:typing.Optional[int]=None,
    name:str='vector'
    )->np.ndarray:
    """
    Convert something array-like into a flat float vector
    """
    ret=np.array(value,dtype=float).reshape(-1)
    if length is not None and ret.size!=length:
        raise DimensionError(f'{name} must have length {length}, got {ret.size}')
    return ret


def asSamples(
    value:ArrayCompatible,
    width:typing.Optional[int]=None,
    name:str='samples'
    )->np.ndarray:
    """
    Convert a sequence of sample vectors into an (N,width) array.

    A flat sequence is taken to be N scalar samples.
    """
    ret=np.array(value,dtype=float)
    if ret.ndim==1:
        ret=ret.reshape((-1,1))
    if ret.ndim!=2:
        raise DimensionError(f'{name} must be a sequence of vectors, got shape {ret.shape}')
    if width is not None and ret.shape[1]!=width:
        raise DimensionError(f'{name} must have {width} channels, got {ret.shape[1]}')
    return ret


def frozen(array:np.ndarray)->np.ndarray:
    """
    Return a read-only copy of an array
    """
    ret=np.array(array,dtype=float,copy=True)
    ret.setflags(write=False)
    return ret


def singularValues(matrix:np.ndarray)->np.ndarray:
    """
    Singular values, largest first
    """
    matrix=np.asarray(matrix,dtype=float)
    if matrix.size==0:
        return np.zeros(0)
    return scipy.linalg.svd(matrix,compute_uv=False)


def thresholdRank(
    sv:np.ndarray,
    relTol:float,
    absTol:float=0.0
    )->int:
    """
    Count the singular values above max(relTol*sigma_1,absTol)
    """
    sv=np.asarray(sv,dtype=float)
    if sv.size==0 or sv[0]<=0.0:
        return 0
    cutoff=max(relTol*sv[0],absTol)
    return int(np.count_nonzero(sv>cutoff))


def conditionNumber(sv:np.ndarray)->float:
    """
    Ratio of largest to smallest singular value (inf when singular)
    """
    sv=np.asarray(sv,dtype=float)
    if sv.size==0 or sv[-1]<=0.0:
        return float('inf')
    return float(sv[0]/sv[-1])


def truncatedPinv(
    matrix:np.ndarray,
    relTol:float,
    absTol:float=0.0
    )->typing.Tuple[np.ndarray,int,np.ndarray]:
    """
    Moore-Penrose pseudo-inverse via SVD, dropping singular values at or
    below max(relTol*sigma_1,absTol)

    returns (pinv,rank,singularValues)
    """
    matrix=np.asarray(matrix,dtype=float)
    u,s,vt=scipy.linalg.svd(matrix,full_matrices=False)
    rank=thresholdRank(s,relTol,absTol)
    pinv=(vt[:rank].T/s[:rank])@u[:,:rank].T
    return pinv,rank,s


def truncatedLstsq(
    matrix:np.ndarray,
    rhs:np.ndarray,
    relTol:float,
    absTol:float=0.0
    )->typing.Tuple[np.ndarray,int,np.ndarray]:
    """
    Minimum-norm least-squares solution of matrix @ x = rhs,
    using the same truncation rule as truncatedPinv

    returns (x,rank,singularValues)
    """
    matrix=np.asarray(matrix,dtype=float)
    u,s,vt=scipy.linalg.svd(matrix,full_matrices=False)
    rank=thresholdRank(s,relTol,absTol)
    x=vt[:rank].T@((u[:,:rank].T@rhs)/s[:rank].reshape((-1,)+(1,)*(np.ndim(rhs)-1)))
    return x,rank,s
