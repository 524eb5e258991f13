import os
import json
import numpy as np
import pytest

from multiRecordSysId.cli import main,RunConfig,UsageError,cmdValidate
from multiRecordSysId.errors import LagTooSmallError
from multiRecordSysId.ltiModel import StateSpaceModel,loadModel,saveModel,readModelJson
from multiRecordSysId.dataArchive import Archive,Record,writeArchiveCsv,loadSelection,loadArchiveCsv
from multiRecordSysId.validation import markovDistance,predictValidate
from multiRecordSysId.synthGenerator import DATA_DIRECTORY

from conftest import recordFromModel


EXAMPLE_SPEC=os.path.join(DATA_DIRECTORY,'sevenRecordExample.json')
TURBINE_SPEC=os.path.join(DATA_DIRECTORY,'turbineAnalog.json')


@pytest.fixture
def exampleCsv(tmp_path):
    filename=str(tmp_path/'example.csv')
    assert main(['mrsid','generate','--spec',EXAMPLE_SPEC,'--out',filename])==0
    return filename


@pytest.fixture
def exampleSelectionFile(tmp_path):
    filename=tmp_path/'sel.txt'
    filename.write_text('# three short runs\n4,0,2\n5,0,2\n6,0,1\n')
    return str(filename)


def _run(*args):
    return main(['mrsid']+[str(a) for a in args])


def test_generate_writes_archive(exampleCsv):
    with open(exampleCsv,encoding='utf-8') as f:
        header=f.readline().strip()
    assert header=='t,seg,u1,y1'


def test_scan_turbine_archive(tmp_path,capsys):
    archive=str(tmp_path/'turbine.csv')
    assert _run('generate','--spec',TURBINE_SPEC,'--out',archive)==0
    out=str(tmp_path/'scan.json')
    assert _run('scan','--archive',archive,'--ell',5,'--order',4,'--out',out)==0
    with open(out,encoding='utf-8') as f:
        rows=json.load(f)
    assert len(rows)==17
    assert len([row for row in rows if row['length']>=172])==4
    for row in rows:
        assert row['windows']==max(0,row['length']-5+1)
    assert 'record' in capsys.readouterr().out


def test_scan_single_long_record(tmp_path,twoStateModel,rng):
    archive=str(tmp_path/'one.csv')
    writeArchiveCsv(Archive([recordFromModel(twoStateModel,[0,0],rng.uniform(size=30),'only')]),archive) # noqa: E501
    out=str(tmp_path/'scan.json')
    assert _run('scan','--archive',archive,'--ell',3,'--order',2,'--out',out)==0
    with open(out,encoding='utf-8') as f:
        rows=json.load(f)
    assert rows==[{'record':'only','length':30,'windows':28,'rankU':3,'rankW':5,'identifiable':True}]


def test_scan_empty_file(tmp_path,capsys):
    archive=tmp_path/'empty.csv'
    archive.write_text('')
    assert _run('scan','--archive',str(archive),'--ell',3,'--order',2)==1
    assert 'empty' in capsys.readouterr().err


def test_check_selection_file(exampleCsv,exampleSelectionFile,tmp_path):
    out=str(tmp_path/'report.json')
    assert _run('check','--archive',exampleCsv,'--ell',3,'--order',2,
        '--select',exampleSelectionFile,'--out',out)==0
    with open(out,encoding='utf-8') as f:
        report=json.load(f)
    assert report['rankU']==3 and report['rankW']==5 and report['pass']


def test_check_greedy(exampleCsv):
    assert _run('check','--archive',exampleCsv,'--ell',3,'--order',2,'--greedy')==0


def test_select_writes_selection(exampleCsv,tmp_path):
    out=str(tmp_path/'greedy.txt')
    assert _run('select','--archive',exampleCsv,'--ell',3,'--order',2,'--out',out)==0
    selection=loadSelection(out)
    assert selection.columnCount>=5


def test_fit_seven_record_fixture(exampleCsv,exampleSelectionFile,tmp_path,twoStateModel):
    out=str(tmp_path/'model.json')
    assert _run('fit','--archive',exampleCsv,'--ell',3,'--order',2,
        '--select',exampleSelectionFile,'--out',out)==0
    model=loadModel(out)
    assert markovDistance(twoStateModel,model,8,relative=True)<=1e-6
    with open(str(tmp_path/'model.diagnostics.json'),encoding='utf-8') as f:
        diagnostics=json.load(f)
    assert diagnostics['upsilonShape']==[11,9]
    assert diagnostics['identifiability']['pass']
    with open(str(tmp_path/'model.sv.csv'),encoding='utf-8') as f:
        assert f.readline().strip()=='index,U,UY,projected,upsilon'


def test_fit_is_reproducible(exampleCsv,exampleSelectionFile,tmp_path):
    outputs=[]
    for name in ('a','b'):
        out=str(tmp_path/f'{name}.json')
        assert _run('fit','--archive',exampleCsv,'--ell',3,'--order',2,
            '--select',exampleSelectionFile,'--out',out,'--seed',7)==0
        with open(out,'rb') as f:
            outputs.append(f.read())
    assert outputs[0]==outputs[1]


def test_fit_constant_inputs_exit_code(tmp_path,capsys):
    model=StateSpaceModel([[0.5]],[[1.0]],[[1.0]],[[0.0]])
    archive=str(tmp_path/'const.csv')
    writeArchiveCsv(Archive([recordFromModel(model,[0.0],np.ones(12),str(i)) for i in range(3)]),archive) # noqa: E501
    assert _run('fit','--archive',archive,'--ell',3,'--order',1,'--out',str(tmp_path/'m.json'))==2
    assert 'input rank condition' in capsys.readouterr().err


def test_fit_too_few_columns_exit_code(exampleCsv,tmp_path,capsys):
    selection=tmp_path/'short.txt'
    selection.write_text('4,0,2\n5,0,2\n')
    assert _run('fit','--archive',exampleCsv,'--ell',3,'--order',2,
        '--select',str(selection),'--out',str(tmp_path/'m.json'))==2
    assert 'column count condition' in capsys.readouterr().err


def test_forced_fit_numerical_failure(tmp_path,rng):
    # zero outputs leave nothing for the state directions
    records=[Record(str(i),rng.uniform(size=20),np.zeros(20)) for i in range(2)]
    archive=str(tmp_path/'zero.csv')
    writeArchiveCsv(Archive(records),archive)
    assert _run('fit','--archive',archive,'--ell',3,'--order',2,'--force',
        '--out',str(tmp_path/'m.json'))==3


def test_ell_must_exceed_order(exampleCsv):
    assert _run('check','--archive',exampleCsv,'--ell',2,'--order',2)==1
    with pytest.raises(LagTooSmallError):
        RunConfig(exampleCsv,2,2)


def test_usage_errors(exampleCsv):
    assert _run()==1
    assert _run('fit','--archive',exampleCsv)==1
    assert _run('check','--archive',exampleCsv,'--ell',3,'--order',2,'--greedy','--select','x')==1
    with pytest.raises(UsageError):
        RunConfig(exampleCsv,3,2,selectionPath='x',greedy=True)


def test_validate_table(exampleCsv,exampleSelectionFile,tmp_path,capsys):
    model=str(tmp_path/'model.json')
    assert _run('fit','--archive',exampleCsv,'--ell',3,'--order',2,
        '--select',exampleSelectionFile,'--out',model)==0
    capsys.readouterr()
    out=str(tmp_path/'validation.json')
    assert _run('validate','--model',model,'--archive',exampleCsv,'--record',7,'--out',out)==0
    assert 'x100' in capsys.readouterr().out
    with open(out,encoding='utf-8') as f:
        reports=json.load(f)
    assert reports['model']['validationRecordId']=='7'
    assert max(reports['model']['perChannelRms'])<=1e-8


def test_validate_unknown_record(exampleCsv,tmp_path,twoStateModel):
    model=str(tmp_path/'truth.json')
    saveModel(twoStateModel,model)
    assert _run('validate','--model',model,'--archive',exampleCsv,'--record','nope')==1


def test_greedy_with_every_record_rejected(tmp_path,capsys):
    records=[Record(str(i),np.zeros(15),np.zeros(15)) for i in range(3)]
    archive=str(tmp_path/'zeros.csv')
    writeArchiveCsv(Archive(records),archive)
    assert _run('check','--archive',archive,'--ell',3,'--order',2,'--greedy')==2
    assert 'not identifiable' in capsys.readouterr().err
    assert _run('fit','--archive',archive,'--ell',3,'--order',2,'--greedy',
        '--out',str(tmp_path/'m.json'))==2


def test_fitted_ell_sets_validation_state_window(exampleCsv,tmp_path):
    model=str(tmp_path/'model.json')
    assert _run('fit','--archive',exampleCsv,'--ell',5,'--order',2,'--out',model)==0
    assert readModelJson(model)['ell']==5
    record=loadArchiveCsv(exampleCsv).record('7')
    reports=cmdValidate([model],exampleCsv,'7')
    expected=predictValidate(loadModel(model),record,nFit=10)
    np.testing.assert_array_equal(reports['model'].estimatedValidationX0,
        expected.estimatedValidationX0)
