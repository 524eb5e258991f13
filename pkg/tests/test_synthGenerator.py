import json
import numpy as np
import pytest

from multiRecordSysId.ltiModel import StateSpaceModel,observabilityMatrix,toeplitzMatrix
from multiRecordSysId.dataArchive import ColumnSelection,buildMultirecord
from multiRecordSysId.synthGenerator import (
    GeneratorSpec,generate,generateWithStates,randomStableModel,loadGeneratorSpec)


def test_seven_record_example_layout(exampleSpec,exampleArchiveAndStates):
    archive,states=exampleArchiveAndStates
    assert archive.recordIds==['1','2','3','4','5','6','7']
    assert all(record.length==20 for record in archive)
    np.testing.assert_array_equal(states['4'],[-1.0,-1.0])
    np.testing.assert_array_equal(states['5'],[0.5,1.0])
    np.testing.assert_array_equal(states['6'],[1.0,0.5])
    allInputs=np.vstack([record.inputs for record in archive])
    assert allInputs.min()>=0.0 and allInputs.max()<=1.0
    assert exampleSpec.outputNoiseSigma==0.0


def test_records_start_after_gaps(exampleSpec,exampleArchive):
    starts=[record.startTime for record in exampleArchive]
    assert starts[1]-starts[0]==20+exampleSpec.gap


def test_same_seed_same_archive(exampleSpec):
    a=generate(exampleSpec)
    b=generate(exampleSpec)
    for x,y in zip(a,b):
        np.testing.assert_array_equal(x.outputs,y.outputs)
    c=generate(exampleSpec.withSeed(exampleSpec.seed+1))
    assert not np.array_equal(a['1'].inputs,c['1'].inputs)


def test_zero_input_zero_state_gives_zero_archive():
    model=StateSpaceModel([[0.5]],[[1.0]],[[1.0]],[[0.0]])
    spec=GeneratorSpec(model,[5,3],initialStates=[[0.0],[0.0]],
        inputLaw={'kind':'constant','level':0.0})
    for record in generate(spec):
        np.testing.assert_array_equal(record.outputs,0.0)


def test_noise_free_twin_shares_inputs(turbineSpec):
    noisy=generate(turbineSpec)
    clean=generate(turbineSpec.withNoise(0.0))
    for a,b in zip(noisy,clean):
        np.testing.assert_array_equal(a.inputs,b.inputs)
    assert not np.array_equal(noisy['5'].outputs,clean['5'].outputs)


def test_noise_level():
    model=StateSpaceModel([[0.5]],[[1.0]],[[1.0]],[[0.0]])
    spec=GeneratorSpec(model,[5000],inputLaw={'kind':'gaussian','sigma':1.0},
        outputNoiseSigma=0.2,seed=11)
    noisy=generate(spec)['1'].outputs
    clean=generate(spec.withNoise(0.0))['1'].outputs
    assert np.std(noisy-clean)==pytest.approx(0.2,rel=0.1)


def test_data_identity_holds_exactly(exampleSpec,exampleArchive):
    ell=3
    model=exampleSpec.model
    selection=ColumnSelection.wholeRecords(exampleArchive,ell)
    data=buildMultirecord(exampleArchive,selection,ell)
    _,states=generateWithStates(exampleSpec)
    X=np.column_stack([
        model.simulate(states[recordId],exampleArchive[recordId].inputs).states[offset]
        for recordId,offset in data.provenance])
    residual=data.Y-observabilityMatrix(model,ell)@X-toeplitzMatrix(model,ell)@data.U
    assert np.linalg.norm(residual)<=1e-10*np.linalg.norm(data.Y)


def test_sinusoid_inputs():
    model=StateSpaceModel([[0.5]],[[1.0,0.0]],[[1.0]],[[0.0,0.0]])
    spec=GeneratorSpec(model,[50],inputLaw={'kind':'sinusoid','frequency':0.1,'amplitude':2.0})
    u=generate(spec)['1'].inputs
    assert u.shape==(50,2)
    assert np.abs(u).max()<=2.0
    np.testing.assert_allclose(u[10],u[0],atol=1e-12)


def test_random_stable_model(rng):
    for _ in range(20):
        model=randomStableModel(4,2,3,rng)
        assert model.dimensions==(4,2,3)
        assert model.spectralRadius<0.9+1e-9
        assert model.spectralRadius>=0.3-1e-9


def test_spec_validation(twoStateModel):
    with pytest.raises(ValueError):
        GeneratorSpec(twoStateModel,[10],outputNoiseSigma=-1.0)
    with pytest.raises(ValueError):
        GeneratorSpec(twoStateModel,[0])
    with pytest.raises(ValueError):
        GeneratorSpec(twoStateModel,[10],inputLaw={'kind':'chirp'})
    with pytest.raises(ValueError):
        GeneratorSpec(twoStateModel,[10,10],initialStates=[[0,0]])


def test_spec_file_round_trip(tmp_path,exampleSpec):
    filename=tmp_path/'spec.json'
    filename.write_text(json.dumps(exampleSpec.toDict()))
    loaded=loadGeneratorSpec(str(filename))
    assert loaded.model==exampleSpec.model
    for a,b in zip(generate(loaded),generate(exampleSpec)):
        np.testing.assert_array_equal(a.outputs,b.outputs)


def test_turbine_analog_layout(turbineSpec):
    archive=generate(turbineSpec)
    assert len(archive)==17
    assert (archive.m,archive.p)==(2,2)
    assert sorted(record.length for record in archive if record.length>=172)==[172,193,245,265]
    assert turbineSpec.model.isStable()
