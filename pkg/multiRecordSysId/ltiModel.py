"""
Discrete-time linear time-invariant state space models

    x[t+1] = A x[t] + B u[t]
    y[t]   = C x[t] + D u[t]

Includes exact simulation and the structured matrices
(extended observability, block Toeplitz, Markov parameters)
used both by the estimator and by the test oracles.

EXAMPLE:
    model=StateSpaceModel([[0.9,0.2],[0,0.8]],[[1],[1]],[[1,1]],[[1]])
    traj=model.simulate([-1,-1],[0,1,0,0])
    print(traj.outputs[:,0])
    print(model.markovParameters(3))
"""
import typing
import json
import logging
import numpy as np
import scipy.linalg
from . import config
from .errors import DimensionError,SingularTransformError,NumericalError
from .util import ArrayCompatible,asMatrix,asVector,asSamples,frozen


logger=logging.getLogger(__name__)


class StateSpaceModel:
    """
    The quadruple (A,B,C,D) with dimensions (n,m,p)

    Matrices are stored as read-only float arrays, so a model
    can be shared freely between threads.
    """

    def __init__(self,
        A:ArrayCompatible,
        B:ArrayCompatible,
        C:ArrayCompatible,
        D:ArrayCompatible):
        """ """
        A=asMatrix(A,name='A')
        n=A.shape[0]
        if A.shape!=(n,n) or n<1:
            raise DimensionError(f'A must be square and nonempty, got shape {A.shape}')
        B=asMatrix(B,name='B')
        if B.shape[0]!=n and B.size%n==0:
            B=B.reshape((n,-1))
        B=asMatrix(B,rows=n,name='B')
        m=B.shape[1]
        C=asMatrix(C,cols=n,name='C')
        p=C.shape[0]
        D=asMatrix(D,rows=p,cols=m,name='D')
        if m<1 or p<1:
            raise DimensionError(f'model needs at least one input and one output (m={m}, p={p})')
        for name,matrix in (('A',A),('B',B),('C',C),('D',D)):
            if not np.all(np.isfinite(matrix)):
                raise DimensionError(f'{name} contains NaN or Inf')
        self._A=frozen(A)
        self._B=frozen(B)
        self._C=frozen(C)
        self._D=frozen(D)

    @property
    def A(self)->np.ndarray:
        """
        State transition matrix (n x n)
        """
        return self._A
    @property
    def B(self)->np.ndarray:
        """
        Input map (n x m)
        """
        return self._B
    @property
    def C(self)->np.ndarray:
        """
        Output map (p x n)
        """
        return self._C
    @property
    def D(self)->np.ndarray:
        """
        Feedthrough (p x m)
        """
        return self._D

    @property
    def n(self)->int:
        """
        State dimension
        """
        return self._A.shape[0]
    @property
    def m(self)->int:
        """
        Number of inputs
        """
        return self._B.shape[1]
    @property
    def p(self)->int:
        """
        Number of outputs
        """
        return self._C.shape[0]
    @property
    def dimensions(self)->typing.Tuple[int,int,int]:
        """
        (n,m,p)
        """
        return (self.n,self.m,self.p)

    @property
    def poles(self)->np.ndarray:
        """
        Eigenvalues of A
        """
        return scipy.linalg.eigvals(self._A)

    @property
    def spectralRadius(self)->float:
        """
        Largest eigenvalue magnitude of A
        """
        return float(np.max(np.abs(self.poles)))

    def isStable(self)->bool:
        """
        Whether all eigenvalues of A lie strictly inside the unit circle
        """
        return self.spectralRadius<1.0

    def simulate(self,x1:ArrayCompatible,inputs:ArrayCompatible)->"Trajectory":
        """
        See simulate()
        """
        return simulate(self,x1,inputs)

    def observabilityMatrix(self,ell:int)->np.ndarray:
        """
        See observabilityMatrix()
        """
        return observabilityMatrix(self,ell)

    def toeplitzMatrix(self,ell:int)->np.ndarray:
        """
        See toeplitzMatrix()
        """
        return toeplitzMatrix(self,ell)

    def markovParameters(self,count:int)->typing.List[np.ndarray]:
        """
        See markovParameters()
        """
        return markovParameters(self,count)

    def applySimilarity(self,T:ArrayCompatible)->"StateSpaceModel":
        """
        See applySimilarity()
        """
        return applySimilarity(self,T)

    def toDict(self,
        initialStates:typing.Optional[typing.Dict[str,ArrayCompatible]]=None
        )->typing.Dict[str,typing.Any]:
        """
        Model JSON schema:
            {"n":..,"m":..,"p":..,"A":[[..]],"B":..,"C":..,"D":..,
             "initialStates":[{"name":..,"state":[..]}]}
        """
        ret:typing.Dict[str,typing.Any]={
            'n':self.n,'m':self.m,'p':self.p,
            'A':self._A.tolist(),'B':self._B.tolist(),
            'C':self._C.tolist(),'D':self._D.tolist()}
        if initialStates:
            ret['initialStates']=[
                {'name':str(name),'state':asVector(x,self.n).tolist()}
                for name,x in initialStates.items()]
        return ret

    @classmethod
    def fromDict(cls,data:typing.Dict[str,typing.Any])->"StateSpaceModel":
        """
        Build a model from the model JSON schema
        (any "initialStates" entry is ignored here, see namedInitialStates)
        """
        try:
            n,m,p=int(data['n']),int(data['m']),int(data['p'])
            return cls(
                asMatrix(data['A'],n,n,'A'),
                asMatrix(data['B'],n,m,'B'),
                asMatrix(data['C'],p,n,'C'),
                asMatrix(data['D'],p,m,'D'))
        except KeyError as e:
            raise DimensionError(f'model description is missing field {e}') from e

    def __eq__(self,other:typing.Any)->bool:
        if not isinstance(other,StateSpaceModel):
            return False
        return self.dimensions==other.dimensions \
            and np.array_equal(self._A,other._A) \
            and np.array_equal(self._B,other._B) \
            and np.array_equal(self._C,other._C) \
            and np.array_equal(self._D,other._D)

    def __hash__(self):
        return hash((self.dimensions,self._A.tobytes(),self._D.tobytes()))

    def __repr__(self)->str:
        return f'StateSpaceModel(n={self.n}, m={self.m}, p={self.p})'


class Trajectory:
    """
    A simulated run: inputs u_t, outputs y_t and the states x_t
    that produced them, t=1..N
    """

    def __init__(self,
        inputs:np.ndarray,
        outputs:np.ndarray,
        states:np.ndarray):
        """
        :states: (N+1,n) array, states[0] is the initial state
            and states[N] the state after the last input
        """
        if len(inputs)!=len(outputs) or len(inputs)<1:
            raise DimensionError(
                f'inputs and outputs must have equal nonzero length ({len(inputs)} vs {len(outputs)})') # noqa: E501
        self.inputs=frozen(inputs)
        self.outputs=frozen(outputs)
        self.states=frozen(states)

    @property
    def initialState(self)->np.ndarray:
        """
        x_1
        """
        return self.states[0]

    @property
    def length(self)->int:
        """
        Number of samples N
        """
        return len(self.inputs)
    def __len__(self)->int:
        return self.length

    def __repr__(self)->str:
        return f'Trajectory(length={self.length})'


def simulate(
    model:StateSpaceModel,
    x1:ArrayCompatible,
    inputs:ArrayCompatible
    )->Trajectory:
    """
    Exact simulation from initial state x1

    :inputs: sequence of m-vectors (a flat sequence is fine when m=1)
    """
    x=asVector(x1,model.n,'initial state')
    u=asSamples(inputs,model.m,'inputs')
    if len(u)<1:
        raise DimensionError('need at least one input sample')
    A,B,C,D=model.A,model.B,model.C,model.D
    states=np.empty((len(u)+1,model.n))
    outputs=np.empty((len(u),model.p))
    states[0]=x
    with np.errstate(over='ignore',invalid='ignore'):
        for t,ut in enumerate(u):
            outputs[t]=C@states[t]+D@ut
            states[t+1]=A@states[t]+B@ut
    if not np.all(np.isfinite(outputs)):
        raise NumericalError('simulation overflowed (model is unstable over this horizon)')
    return Trajectory(u,outputs,states)


def _checkEll(ell:int)->int:
    ell=int(ell)
    if ell<1:
        raise DimensionError(f'block count must be >= 1, got {ell}')
    return ell


def observabilityMatrix(model:StateSpaceModel,ell:int)->np.ndarray:
    """
    Extended observability matrix [C; CA; ... ; CA^(ell-1)],
    shape (ell*p, n)
    """
    ell=_checkEll(ell)
    blocks=[model.C]
    for _ in range(1,ell):
        blocks.append(blocks[-1]@model.A)
    return np.vstack(blocks)


def markovParameters(model:StateSpaceModel,count:int)->typing.List[np.ndarray]:
    """
    Impulse response blocks [D, CB, CAB, ..., CA^(count-2)B]
    """
    count=_checkEll(count)
    ret=[model.D.copy()]
    if count>1:
        CAk=model.C
        for _ in range(1,count):
            ret.append(CAk@model.B)
            CAk=CAk@model.A
    return ret


def toeplitzMatrix(model:StateSpaceModel,ell:int)->np.ndarray:
    """
    Lower block-triangular Toeplitz matrix of impulse response parameters:
        block (i,i)=D, block (i,j)=CA^(i-j-1)B for i>j, zero above.
    Shape (ell*p, ell*m)
    """
    ell=_checkEll(ell)
    p,m=model.p,model.m
    markov=markovParameters(model,ell)
    ret=np.zeros((ell*p,ell*m))
    for i in range(ell):
        for j in range(i+1):
            ret[i*p:(i+1)*p,j*m:(j+1)*m]=markov[i-j]
    return ret


def applySimilarity(
    model:StateSpaceModel,
    T:ArrayCompatible,
    maxCondition:typing.Optional[float]=None
    )->StateSpaceModel:
    """
    Change state coordinates x' = T x, giving
        (T A T^-1, T B, C T^-1, D)

    T is inverted through its SVD.  Transforms whose condition number
    exceeds maxCondition (default config.MAX_CONDITION) are refused.
    """
    if maxCondition is None:
        maxCondition=config.MAX_CONDITION
    T=asMatrix(T,model.n,model.n,'T')
    u,s,vt=scipy.linalg.svd(T)
    if s[-1]<=0.0 or s[0]/s[-1]>maxCondition:
        cond=float('inf') if s[-1]<=0.0 else s[0]/s[-1]
        raise SingularTransformError(
            f'similarity transform is singular or near-singular (condition {cond:.3g})')
    Tinv=(vt.T/s)@u.T
    return StateSpaceModel(T@model.A@Tinv,T@model.B,model.C@Tinv,model.D)


def namedInitialStates(
    data:typing.Dict[str,typing.Any]
    )->typing.Dict[str,np.ndarray]:
    """
    Pull the optional named initial states out of a model JSON object
    """
    ret={}
    for item in data.get('initialStates',[]) or []:
        ret[str(item['name'])]=asVector(item['state'])
    return ret


def saveModel(
    model:StateSpaceModel,
    filename:str,
    initialStates:typing.Optional[typing.Dict[str,ArrayCompatible]]=None,
    extra:typing.Optional[typing.Dict[str,typing.Any]]=None
    )->None:
    """
    Write a model to a JSON file

    :extra: additional top-level fields (eg a diagnostics block)
    """
    data=model.toDict(initialStates)
    if extra:
        data.update(extra)
    with open(filename,'w',encoding='utf-8') as f:
        json.dump(data,f,indent=2)
        f.write('\n')
    logger.info('wrote model %r to %s',model,filename)


def readModelJson(filename:str)->typing.Dict[str,typing.Any]:
    """
    The raw model JSON object, extra fields included
    """
    with open(filename,'r',encoding='utf-8') as f:
        return json.load(f)


def loadModel(filename:str)->StateSpaceModel:
    """
    Read a model from a JSON file
    """
    return StateSpaceModel.fromDict(readModelJson(filename))
