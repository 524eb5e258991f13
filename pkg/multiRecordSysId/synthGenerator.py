"""
Seeded synthetic archives from known models

All randomness comes from numpy's PCG64 bit generator seeded with
GeneratorSpec.seed.  Draws happen in a fixed order:
    1. random initial states, record by record
    2. inputs, record by record
    3. output noise, record by record
so changing only the noise level gives an archive with identical inputs
and initial states (a noise-free twin).

EXAMPLE:
    spec=sevenRecordSpec()
    archive=generate(spec)
    writeArchiveCsv(archive,'sevenRecordExample.csv')
"""
import typing
import os
import json
import logging
import numpy as np
import scipy.linalg
from .errors import DimensionError
from .util import asVector
from .ltiModel import StateSpaceModel,simulate
from .dataArchive import Record,Archive


logger=logging.getLogger(__name__)

DATA_DIRECTORY=os.path.join(os.path.dirname(os.path.abspath(__file__)),'data')

INPUT_LAWS=('uniform','gaussian','constant','sinusoid')

InitialStateSpec=typing.Union[str,typing.Sequence[typing.Optional[typing.Sequence[float]]]]


class GeneratorSpec:
    """
    Everything needed to reproduce a synthetic archive

    :initialStates: "random" or one entry per record, where None
        means a random state for that record
    :inputLaw: {"kind":"uniform","low":0,"high":1}
        or {"kind":"gaussian","sigma":1}
        or {"kind":"constant","level":1}
        or {"kind":"sinusoid","frequency":0.05,"amplitude":1}
        (frequency in cycles per sample; each input channel gets a
        random phase)
    :gap: time steps left empty between consecutive records
    """

    def __init__(self,
        model:StateSpaceModel,
        recordLengths:typing.Sequence[int],
        initialStates:InitialStateSpec='random',
        inputLaw:typing.Optional[typing.Dict[str,typing.Any]]=None,
        outputNoiseSigma:float=0.0,
        seed:int=0,
        recordIds:typing.Optional[typing.Sequence[str]]=None,
        gap:int=0,
        initialStateScale:float=1.0):
        """ """
        self.model=model
        self.recordLengths=[int(length) for length in recordLengths]
        if not self.recordLengths or min(self.recordLengths)<1:
            raise DimensionError('every record needs at least one sample')
        if recordIds is None:
            recordIds=[str(i+1) for i in range(len(self.recordLengths))]
        self.recordIds=[str(recordId) for recordId in recordIds]
        if len(self.recordIds)!=len(self.recordLengths):
            raise DimensionError(
                f'{len(self.recordIds)} record ids for {len(self.recordLengths)} records')
        if isinstance(initialStates,str):
            if initialStates!='random':
                raise ValueError(f'initialStates must be "random" or a list, got {initialStates!r}')
            self.initialStates:typing.List[typing.Optional[np.ndarray]]=[None]*len(self.recordLengths) # noqa: E501
        else:
            if len(initialStates)!=len(self.recordLengths):
                raise DimensionError(
                    f'{len(initialStates)} initial states for {len(self.recordLengths)} records')
            self.initialStates=[
                None if x is None else asVector(x,model.n,'initial state')
                for x in initialStates]
        if inputLaw is None:
            inputLaw={'kind':'uniform','low':0.0,'high':1.0}
        self.inputLaw=dict(inputLaw)
        if self.inputLaw.get('kind') not in INPUT_LAWS:
            raise ValueError(f'input law kind must be one of {INPUT_LAWS}, got {self.inputLaw.get("kind")!r}') # noqa: E501
        self.outputNoiseSigma=float(outputNoiseSigma)
        if self.outputNoiseSigma<0.0:
            raise ValueError(f'output noise sigma must be >= 0, got {self.outputNoiseSigma}')
        self.seed=int(seed)
        self.gap=int(gap)
        if self.gap<0:
            raise ValueError(f'gap must be >= 0, got {self.gap}')
        self.initialStateScale=float(initialStateScale)

    def withNoise(self,sigma:float)->"GeneratorSpec":
        """
        Same spec with another output noise level
        """
        ret=GeneratorSpec.fromDict(self.toDict())
        ret.outputNoiseSigma=float(sigma)
        if ret.outputNoiseSigma<0.0:
            raise ValueError(f'output noise sigma must be >= 0, got {sigma}')
        return ret

    def withSeed(self,seed:int)->"GeneratorSpec":
        """
        Same spec with another seed
        """
        ret=GeneratorSpec.fromDict(self.toDict())
        ret.seed=int(seed)
        return ret

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        JSON-friendly form (the generator spec file format)
        """
        return {
            'model':self.model.toDict(),
            'recordLengths':list(self.recordLengths),
            'recordIds':list(self.recordIds),
            'initialStates':[None if x is None else x.tolist() for x in self.initialStates],
            'inputLaw':dict(self.inputLaw),
            'outputNoiseSigma':self.outputNoiseSigma,
            'seed':self.seed,
            'gap':self.gap,
            'initialStateScale':self.initialStateScale}

    @classmethod
    def fromDict(cls,data:typing.Dict[str,typing.Any])->"GeneratorSpec":
        """
        Build from the generator spec file format
        """
        try:
            model=StateSpaceModel.fromDict(data['model'])
            lengths=data['recordLengths']
        except KeyError as e:
            raise DimensionError(f'generator spec is missing field {e}') from e
        return cls(model,lengths,
            initialStates=data.get('initialStates','random'),
            inputLaw=data.get('inputLaw'),
            outputNoiseSigma=data.get('outputNoiseSigma',0.0),
            seed=data.get('seed',0),
            recordIds=data.get('recordIds'),
            gap=data.get('gap',0),
            initialStateScale=data.get('initialStateScale',1.0))

    def __repr__(self)->str:
        return f'GeneratorSpec({self.model!r}, {len(self.recordLengths)} records, sigma={self.outputNoiseSigma:g}, seed={self.seed})' # noqa: E501


def loadGeneratorSpec(filename:str)->GeneratorSpec:
    """
    Read a generator spec JSON file
    """
    with open(filename,'r',encoding='utf-8') as f:
        return GeneratorSpec.fromDict(json.load(f))


def sevenRecordSpec()->GeneratorSpec:
    """
    Seven 20-sample records of a two-state single-input single-output
    system with uniform [0,1] white inputs and no noise.
    Records 4 to 6 start from known states.
    """
    return loadGeneratorSpec(os.path.join(DATA_DIRECTORY,'sevenRecordExample.json'))


def turbineAnalogSpec()->GeneratorSpec:
    """
    Seventeen records of a stable 4-state, 2-input 2-output model:
    four long records, the rest short, mild output noise
    """
    return loadGeneratorSpec(os.path.join(DATA_DIRECTORY,'turbineAnalog.json'))


def _drawInputs(
    law:typing.Dict[str,typing.Any],
    length:int,
    m:int,
    rng:np.random.Generator
    )->np.ndarray:
    kind=law['kind']
    if kind=='uniform':
        return rng.uniform(float(law.get('low',0.0)),float(law.get('high',1.0)),size=(length,m))
    if kind=='gaussian':
        return rng.normal(0.0,float(law.get('sigma',1.0)),size=(length,m))
    if kind=='constant':
        return np.full((length,m),float(law.get('level',1.0)))
    phases=rng.uniform(0.0,2*np.pi,size=m)
    t=np.arange(length).reshape((-1,1))
    return float(law.get('amplitude',1.0))*np.sin(
        2*np.pi*float(law.get('frequency',0.05))*t+phases)


def generateWithStates(
    spec:GeneratorSpec
    )->typing.Tuple[Archive,typing.Dict[str,np.ndarray]]:
    """
    Like generate(), also returning the initial state each record started from
    """
    rng=np.random.Generator(np.random.PCG64(spec.seed))
    model=spec.model
    states=[
        rng.normal(0.0,spec.initialStateScale,size=model.n) if x is None else x
        for x in spec.initialStates]
    inputs=[_drawInputs(spec.inputLaw,length,model.m,rng) for length in spec.recordLengths]
    outputs=[simulate(model,x,u).outputs for x,u in zip(states,inputs)]
    if spec.outputNoiseSigma>0.0:
        outputs=[y+rng.normal(0.0,spec.outputNoiseSigma,size=y.shape) for y in outputs]
    records=[]
    start=0
    for recordId,u,y in zip(spec.recordIds,inputs,outputs):
        records.append(Record(recordId,u,y,start))
        start+=len(u)+spec.gap
    archive=Archive(records)
    logger.info('generated %r from %r',archive,spec)
    return archive,{recordId:np.array(x) for recordId,x in zip(spec.recordIds,states)}


def generate(spec:GeneratorSpec)->Archive:
    """
    Simulate every record of the spec, adding white gaussian output
    noise when the spec asks for it

    A deterministic function of the spec (including its seed).
    """
    return generateWithStates(spec)[0]


def randomStableModel(
    n:int,
    m:int,
    p:int,
    rng:np.random.Generator,
    radius:typing.Tuple[float,float]=(0.3,0.9)
    )->StateSpaceModel:
    """
    Random model with every pole magnitude in `radius`

    A is Q S Q^T with Q orthogonal and S block upper triangular with
    real poles and complex pairs on its diagonal.
    """
    n,m,p=int(n),int(m),int(p)
    low,high=radius
    S=np.zeros((n,n))
    i=0
    while i<n:
        magnitude=rng.uniform(low,high)
        if i+1<n and rng.uniform()<0.5:
            angle=rng.uniform(0.1,np.pi-0.1)
            c,s=magnitude*np.cos(angle),magnitude*np.sin(angle)
            S[i:i+2,i:i+2]=[[c,-s],[s,c]]
            i+=2
        else:
            S[i,i]=magnitude*rng.choice((-1.0,1.0))
            i+=1
    S+=np.triu(rng.normal(0.0,0.3,size=(n,n)),2)
    Q,_=scipy.linalg.qr(rng.normal(size=(n,n)))
    A=Q@S@Q.T
    return StateSpaceModel(A,
        rng.normal(size=(n,m)),
        rng.normal(size=(p,n)),
        rng.normal(size=(p,m)))
