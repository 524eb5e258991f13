"""
Shared fixtures: the seven-record two-state archive, the seventeen-record
turbine-like archive, and seeded random generators
"""
import numpy as np
import pytest

from multiRecordSysId.ltiModel import StateSpaceModel
from multiRecordSysId.dataArchive import Record,Archive,ColumnSelection,buildMultirecord
from multiRecordSysId.synthGenerator import (
    GeneratorSpec,sevenRecordSpec,turbineAnalogSpec,generateWithStates,randomStableModel)


EXAMPLE_COUNTS=[0,0,0,2,2,1,0]
EXAMPLE_ELL=3


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


@pytest.fixture
def twoStateModel():
    return StateSpaceModel([[0.9,0.2],[0.0,0.8]],[[1.0],[1.0]],[[1.0,1.0]],[[1.0]])


@pytest.fixture(scope='module')
def exampleSpec():
    return sevenRecordSpec()


@pytest.fixture(scope='module')
def exampleArchiveAndStates(exampleSpec):
    return generateWithStates(exampleSpec)


@pytest.fixture(scope='module')
def exampleArchive(exampleArchiveAndStates):
    return exampleArchiveAndStates[0]


@pytest.fixture(scope='module')
def exampleSelection(exampleArchive):
    return ColumnSelection.fromCounts(exampleArchive,EXAMPLE_COUNTS)


@pytest.fixture(scope='module')
def exampleData(exampleArchive,exampleSelection):
    return buildMultirecord(exampleArchive,exampleSelection,EXAMPLE_ELL)


@pytest.fixture(scope='module')
def turbineSpec():
    return turbineAnalogSpec()


@pytest.fixture
def constantArchive():
    """
    Three identical records driven by a constant input
    """
    model=StateSpaceModel([[0.5]],[[1.0]],[[1.0]],[[0.0]])
    spec=GeneratorSpec(model,[12,12,12],initialStates=[[0.0]]*3,
        inputLaw={'kind':'constant','level':1.0},seed=3)
    return generateWithStates(spec)[0]


def smallRandomArchive(seed:int,lengths=(25,30,40)):
    """
    Random minimal model (n<=4, m,p<=2) and a noise-free archive from it
    """
    rng=np.random.Generator(np.random.PCG64(seed))
    n=int(rng.integers(1,5))
    m=int(rng.integers(1,3))
    p=int(rng.integers(1,3))
    model=randomStableModel(n,m,p,rng)
    spec=GeneratorSpec(model,list(lengths),inputLaw={'kind':'gaussian','sigma':1.0},seed=seed)
    archive,states=generateWithStates(spec)
    return model,archive,states


def recordFromModel(model,x1,inputs,recordId='r'):
    """
    Noise-free record simulated from x1
    """
    traj=model.simulate(x1,inputs)
    return Record(recordId,traj.inputs,traj.outputs)


def archiveOf(*records):
    return Archive(records)
