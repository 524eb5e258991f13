import json
import warnings
import numpy as np
import pytest

from multiRecordSysId.errors import (
    IdentifiabilityError,InsufficientExcitationError,DimensionError,SelectionError,
    IllConditionedRegressionWarning)
from multiRecordSysId.ltiModel import StateSpaceModel
from multiRecordSysId.dataArchive import (
    Archive,ColumnSelection,RegressionWindow,buildMultirecord,regressionWindows)
from multiRecordSysId.identifiability import RankConfig
from multiRecordSysId.moespEstimator import (
    projectOutInputs,inputRowBasis,projectOntoComplement,extractAC,buildUpsilon,
    solveBDx0,fit,fitMultiRecord)
from multiRecordSysId.validation import markovDistance,alignSimilarity

from conftest import recordFromModel


def test_projection_is_orthogonal_to_inputs(exampleData):
    projection=projectOutInputs(exampleData)
    np.testing.assert_allclose(projection.projected@exampleData.U.T,0.0,atol=1e-12)
    assert projection.inputRowRank==3
    assert projection.projectorRank==2


def test_projection_is_idempotent(rng):
    U=rng.normal(size=(4,12))
    Y=rng.normal(size=(3,12))
    basis=inputRowBasis(U)
    once=projectOntoComplement(Y,basis)
    np.testing.assert_allclose(projectOntoComplement(once,basis),once,atol=1e-12)


def test_extract_ac_seven_record_fixture(exampleData,twoStateModel):
    projection=projectOutInputs(exampleData)
    A,C,gamma,sv=extractAC(projection,2,1,3)
    assert gamma.shape==(3,2)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(A).real),[0.8,0.9],atol=1e-8)
    assert sv[1]>1e-6*sv[0]


def test_extract_ac_insufficient_rank(exampleData):
    projection=projectOutInputs(exampleData)
    projection.projected=np.zeros_like(projection.projected)
    with pytest.raises(InsufficientExcitationError):
        extractAC(projection,2,1,3)


def test_upsilon_shape_and_structure(twoStateModel):
    u=np.array([[1.0],[2.0],[3.0]])
    window=RegressionWindow('r',0,u,np.zeros((3,1)))
    upsilon,outputs=buildUpsilon(twoStateModel.A,twoStateModel.C,[window])
    assert upsilon.shape==(3,2+1+2)
    A,C=twoStateModel.A,twoStateModel.C
    # first row: no B contribution yet
    np.testing.assert_allclose(upsilon[0],[0,0,1,1,1])
    # third row: B block is u_1 C A + u_2 C
    np.testing.assert_allclose(upsilon[2,:2],1.0*(C@A)[0]+2.0*C[0])
    np.testing.assert_allclose(upsilon[2,3:],(C@A@A)[0])
    assert outputs.shape==(3,)


def test_upsilon_reproduces_outputs(rng):
    model=StateSpaceModel([[0.5,0.2],[0.0,-0.3]],[[1.0,0.0],[0.4,1.0]],
        [[1.0,0.0],[0.5,1.0]],[[0.1,0.2],[0.0,0.3]])
    windows=[]
    states=[]
    for i in range(2):
        x1=rng.normal(size=2)
        record=recordFromModel(model,x1,rng.normal(size=(6,2)))
        windows.append(RegressionWindow(str(i),0,record.inputs,record.outputs))
        states.append(x1)
    upsilon,outputs=buildUpsilon(model.A,model.C,windows)
    theta=np.concatenate([model.B.reshape(-1,order='F'),model.D.reshape(-1,order='F')]+states)
    np.testing.assert_allclose(upsilon@theta,outputs,atol=1e-12)


def test_solve_unpacks_column_major(rng):
    model=StateSpaceModel([[0.5,0.2],[0.0,-0.3]],[[1.0,0.0],[0.4,1.0]],
        [[1.0,0.0],[0.5,1.0]],[[0.1,0.2],[0.0,0.3]])
    x1=rng.normal(size=2)
    record=recordFromModel(model,x1,rng.normal(size=(10,2)))
    window=RegressionWindow('r',0,record.inputs,record.outputs)
    upsilon,outputs=buildUpsilon(model.A,model.C,[window])
    solution=solveBDx0(upsilon,outputs,2,2,2)
    np.testing.assert_allclose(solution.B,model.B,atol=1e-10)
    np.testing.assert_allclose(solution.D,model.D,atol=1e-10)
    np.testing.assert_allclose(solution.initialStates[0],x1,atol=1e-10)
    assert solution.rank==upsilon.shape[1]


def test_solve_dimension_check():
    with pytest.raises(DimensionError):
        solveBDx0(np.zeros((4,4)),np.zeros(4),2,1,1)


def test_fit_seven_record_fixture(exampleData,twoStateModel,exampleArchiveAndStates):
    result=fit(exampleData,2)
    assert result.upsilonShape==(11,9)
    assert result.upsilonRank==9
    assert not result.forced
    assert result.stable
    assert markovDistance(twoStateModel,result.model,8,relative=True)<=1e-6
    np.testing.assert_allclose(result.model.D,[[1.0]],atol=1e-8)
    np.testing.assert_allclose(np.sort(result.model.poles.real),[0.8,0.9],atol=1e-6)
    T,residual=alignSimilarity(twoStateModel,result.model,3)
    assert residual<=1e-8
    _,truthStates=exampleArchiveAndStates
    for (recordId,offset,_),xhat in result.initialStates.items():
        assert offset==0
        np.testing.assert_allclose(T@xhat,truthStates[recordId],atol=1e-6)


def test_fit_alias():
    assert fitMultiRecord is fit


def test_fit_refuses_unidentifiable(exampleArchive):
    data=buildMultirecord(exampleArchive,ColumnSelection([('4',0,2),('5',0,2)]),3)
    with pytest.raises(IdentifiabilityError,match='column count'):
        fit(data,2)


def test_forced_fit_on_constant_inputs_warns():
    model=StateSpaceModel([[0.5,0.1],[0.0,0.3]],[[1.0],[0.5]],[[1.0,0.4]],[[0.2]])
    rng=np.random.Generator(np.random.PCG64(1))
    archive=Archive([
        recordFromModel(model,rng.normal(size=2),np.ones(15),str(i)) for i in range(3)])
    data=buildMultirecord(archive,ColumnSelection.wholeRecords(archive,3),3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        result=fit(data,2,force=True)
    assert result.forced
    assert not result.identifiability.passed
    assert result.upsilonRank<result.upsilonShape[1]
    assert any(issubclass(w.category,IllConditionedRegressionWarning) for w in caught)


def test_explicit_windows(exampleArchive,exampleSelection,exampleData,twoStateModel):
    windows=regressionWindows(exampleArchive,exampleSelection,3)[:2]
    result=fit(exampleData,2,windows=windows)
    assert result.upsilonShape==(8,7)
    assert markovDistance(twoStateModel,result.model,8,relative=True)<=1e-6


def test_result_json(exampleData):
    result=fit(exampleData,2)
    data=json.loads(result.toJson())
    assert data['n']==2
    assert data['diagnostics']['upsilonShape']==[11,9]
    assert [item['name'] for item in data['initialStates']]==['4@0:4','5@0:4','6@0:3']


def test_rank_config_passes_through(exampleData):
    with pytest.raises(IdentifiabilityError):
        # a huge tolerance hides the state directions
        fit(exampleData,2,cfg=RankConfig(relTol=0.9))


def test_entries_sharing_an_offset_keep_every_state(exampleArchive,exampleArchiveAndStates,twoStateModel): # noqa: E501
    selection=ColumnSelection([('4',0,2),('4',0,3),('5',0,2),('6',0,1)])
    result=fit(buildMultirecord(exampleArchive,selection,3),2)
    assert result.upsilonShape==(16,11)
    assert sorted(result.initialStates)==[('4',0,4),('4',0,5),('5',0,4),('6',0,3)]
    T,_=alignSimilarity(twoStateModel,result.model,3)
    _,truthStates=exampleArchiveAndStates
    np.testing.assert_allclose(T@result.initialStates[('4',0,4)],truthStates['4'],atol=1e-6)
    np.testing.assert_allclose(T@result.initialStates[('4',0,5)],truthStates['4'],atol=1e-6)
    assert len(result.toDict()['initialStates'])==4


def test_windows_over_the_same_span_are_refused(exampleArchive,exampleSelection,exampleData):
    windows=regressionWindows(exampleArchive,exampleSelection,3)
    with pytest.raises(SelectionError):
        fit(exampleData,2,windows=windows+windows[:1])


def test_column_order_does_not_change_the_model(exampleArchive,exampleSelection,twoStateModel):
    reordered=ColumnSelection(list(reversed(exampleSelection.entries)))
    first=fit(buildMultirecord(exampleArchive,exampleSelection,3),2)
    second=fit(buildMultirecord(exampleArchive,reordered,3),2)
    assert markovDistance(first.model,second.model,8)<=1e-8
    T1,_=alignSimilarity(twoStateModel,first.model,3)
    T2,_=alignSimilarity(twoStateModel,second.model,3)
    assert list(second.initialStates)==list(reversed(list(first.initialStates)))
    for key,x in first.initialStates.items():
        np.testing.assert_allclose(T1@x,T2@second.initialStates[key],atol=1e-8)


def test_unstable_system_is_still_extracted(rng):
    model=StateSpaceModel([[1.05,0.1],[0.0,0.6]],[[1.0],[1.0]],[[1.0,1.0]],[[0.0]])
    archive=Archive([
        recordFromModel(model,rng.normal(size=2),rng.uniform(size=12),str(i)) for i in range(3)])
    result=fit(buildMultirecord(archive,ColumnSelection.wholeRecords(archive,3),3),2)
    np.testing.assert_allclose(np.sort(result.model.poles.real),[0.6,1.05],atol=1e-6)
    assert not result.stable
    assert not result.toDict()['diagnostics']['stable']
