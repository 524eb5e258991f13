"""
Command line workflow

    mrsid generate --spec spec.json --out archive.csv
    mrsid scan --archive archive.csv --ell 5 --order 4
    mrsid check --archive archive.csv --ell 3 --order 2 (--select sel.txt | --greedy)
    mrsid select --archive archive.csv --ell 3 --order 2 --out sel.txt
    mrsid fit --archive archive.csv --ell 3 --order 2 (--select sel.txt | --greedy) --out model.json
    mrsid validate --model model.json --archive archive.csv --record 17

Exit codes:
    0  success (for check: the data are identifiable)
    1  usage, file or format error
    2  identifiability test failed
    3  numerical failure
"""
import typing
import os
import sys
import json
import argparse
import logging
from . import config
from .errors import SysIdError,IdentifiabilityError,NumericalError,SelectionError
from .ltiModel import StateSpaceModel,saveModel,readModelJson
from .dataArchive import (
    Archive,ColumnSelection,loadArchiveCsv,writeArchiveCsv,
    loadSelection,writeSelection,buildMultirecord)
from .identifiability import (
    RankConfig,IdentifiabilityReport,GreedyStep,checkIdentifiability,greedySelect)
from .moespEstimator import EstimationResult,fit
from .validation import ValidationReport,predictValidate,formatRmsTable,singularValueCsv
from .synthGenerator import loadGeneratorSpec,generate


logger=logging.getLogger(__name__)

EXIT_OK=0
EXIT_USAGE=1
EXIT_NOT_IDENTIFIABLE=2
EXIT_NUMERICAL=3


class UsageError(SysIdError):
    """
    Bad command line
    """


class RunConfig:
    """
    Settings shared by the commands that work on an archive
    """

    def __init__(self,
        archivePath:str,
        ell:int,
        order:int,
        rankConfig:typing.Optional[RankConfig]=None,
        stride:typing.Optional[int]=None,
        selectionPath:typing.Optional[str]=None,
        greedy:bool=False,
        outPath:typing.Optional[str]=None,
        seed:typing.Optional[int]=None,
        force:bool=False,
        center:bool=False):
        """ """
        self.archivePath=archivePath
        self.ell=int(ell)
        self.order=int(order)
        if self.order<1:
            raise UsageError(f'--order must be >= 1, got {self.order}')
        self.rankConfig=RankConfig() if rankConfig is None else rankConfig
        self.rankConfig.checkEll(self.ell,self.order)
        self.stride=config.STRIDE if stride is None else int(stride)
        if self.stride<1:
            raise UsageError(f'--stride must be >= 1, got {self.stride}')
        if selectionPath is not None and greedy:
            raise UsageError('give either --select or --greedy, not both')
        self.selectionPath=selectionPath
        self.greedy=greedy
        self.outPath=outPath
        self.seed=seed
        self.force=force
        self.center=center

    @classmethod
    def fromArgs(cls,args:argparse.Namespace)->"RunConfig":
        """
        Build from parsed command line arguments
        """
        rankConfig=RankConfig(
            relTol=args.rank_tol,absTol=args.abs_tol,knownLag=args.known_lag,
            mode=args.rank_mode,gapRatio=args.gap_ratio)
        return cls(args.archive,args.ell,args.order,rankConfig,
            stride=args.stride,
            selectionPath=getattr(args,'select',None),
            greedy=getattr(args,'greedy',False),
            outPath=getattr(args,'out',None),
            seed=args.seed,
            force=args.force,
            center=args.center)

    def loadArchive(self)->Archive:
        """
        Read the archive named on the command line
        """
        return loadArchiveCsv(self.archivePath,center=self.center)

    def selection(
        self,
        archive:Archive
        )->typing.Tuple[ColumnSelection,typing.List[GreedyStep]]:
        """
        Columns chosen by --select, by --greedy, or else every
        window of every record

        returns (selection,greedyHistory)
        """
        if self.selectionPath is not None:
            return loadSelection(self.selectionPath),[]
        if self.greedy:
            selection,history=greedySelect(archive,self.order,self.ell,self.rankConfig,self.stride)
            if not selection.entries:
                if not history:
                    raise SelectionError(f'no record holds a window of ell={self.ell} samples')
                raise IdentifiabilityError(history[-1].report)
            return selection,history
        return ColumnSelection.wholeRecords(archive,self.ell,self.stride),[]

    def toDict(self)->typing.Dict[str,typing.Any]:
        """
        JSON-friendly form, recorded alongside fit results
        """
        return {
            'archive':self.archivePath,'ell':self.ell,'order':self.order,
            'rank':self.rankConfig.toDict(),'stride':self.stride,
            'select':self.selectionPath,'greedy':self.greedy,
            'seed':self.seed,'force':self.force,'center':self.center}

    def __repr__(self)->str:
        return f'RunConfig({self.archivePath!r}, ell={self.ell}, order={self.order})'


def _dumpJson(data:typing.Any,filename:str)->None:
    with open(filename,'w',encoding='utf-8') as f:
        json.dump(data,f,indent=2)
        f.write('\n')


def cmdGenerate(
    specPath:str,
    outPath:str,
    seed:typing.Optional[int]=None,
    noise:typing.Optional[float]=None
    )->Archive:
    """
    Generate a synthetic archive from a generator spec file
    """
    spec=loadGeneratorSpec(specPath)
    if seed is not None:
        spec=spec.withSeed(seed)
    if noise is not None:
        spec=spec.withNoise(noise)
    archive=generate(spec)
    writeArchiveCsv(archive,outPath)
    return archive


def cmdScan(
    archivePath:str,
    cfg:RunConfig
    )->typing.List[typing.Dict[str,typing.Any]]:
    """
    Per-record inventory: length, usable windows at ell and whether
    the record on its own passes the identifiability test
    """
    archive=loadArchiveCsv(archivePath,center=cfg.center)
    rows=[]
    for record in archive:
        windows=record.windowCount(cfg.ell,cfg.stride)
        row:typing.Dict[str,typing.Any]={
            'record':record.recordId,'length':record.length,'windows':windows,
            'rankU':None,'rankW':None,'identifiable':False}
        if windows>0:
            selection=ColumnSelection([(record.recordId,0,windows,cfg.stride)])
            report=checkIdentifiability(
                buildMultirecord(archive,selection,cfg.ell),cfg.order,cfg.rankConfig)
            row.update(rankU=report.rankU,rankW=report.rankW,identifiable=report.passed)
        rows.append(row)
    return rows


def cmdCheck(
    cfg:RunConfig
    )->typing.Tuple[IdentifiabilityReport,ColumnSelection,typing.List[GreedyStep]]:
    """
    Run the identifiability test on the configured selection
    """
    archive=cfg.loadArchive()
    selection,history=cfg.selection(archive)
    data=buildMultirecord(archive,selection,cfg.ell)
    return checkIdentifiability(data,cfg.order,cfg.rankConfig),selection,history


def cmdSelect(
    cfg:RunConfig
    )->typing.Tuple[ColumnSelection,typing.List[GreedyStep]]:
    """
    Greedy record selection, written as a selection file when --out is given
    """
    archive=cfg.loadArchive()
    selection,history=greedySelect(archive,cfg.order,cfg.ell,cfg.rankConfig,cfg.stride)
    if cfg.outPath is not None and selection.entries:
        writeSelection(selection,cfg.outPath)
    return selection,history


def _outputPaths(outPath:str)->typing.Tuple[str,str]:
    base=outPath[:-5] if outPath.lower().endswith('.json') else outPath
    return base+'.diagnostics.json',base+'.sv.csv'


def cmdFit(cfg:RunConfig)->EstimationResult:
    """
    Fit a model and write:
        <out>                   model JSON with named initial states
        <out>.diagnostics.json  spectra, ranks, condition numbers
        <out>.sv.csv            singular value spectra for plotting
    """
    if cfg.outPath is None:
        raise UsageError('fit needs --out')
    archive=cfg.loadArchive()
    selection,history=cfg.selection(archive)
    data=buildMultirecord(archive,selection,cfg.ell)
    result=fit(data,cfg.order,cfg=cfg.rankConfig,force=cfg.force)
    diagnosticsPath,svPath=_outputPaths(cfg.outPath)
    saveModel(result.model,cfg.outPath,result.namedInitialStates(),extra={'ell':result.ell})
    diagnostics=result.toDict()['diagnostics']
    diagnostics['run']=cfg.toDict()
    diagnostics['selection']=[
        {'record':e.recordId,'offset':e.offset,'count':e.count,'stride':e.stride}
        for e in selection]
    diagnostics['greedy']=[step.toDict() for step in history]
    _dumpJson(diagnostics,diagnosticsPath)
    singularValueCsv({
        'U':result.identifiability.svU,
        'UY':result.identifiability.svW,
        'projected':result.svProjected,
        'upsilon':result.upsilonSingularValues},svPath)
    return result


def cmdValidate(
    modelPaths:typing.Sequence[str],
    archivePath:str,
    recordId:str,
    nFit:typing.Optional[int]=None,
    horizon:typing.Optional[int]=None,
    center:bool=False
    )->typing.Dict[str,ValidationReport]:
    """
    Validate one or more saved models on a held-out record

    Model files written by fit carry their ell, which sets the default nFit.
    """
    record=loadArchiveCsv(archivePath,center=center).record(recordId)
    ret={}
    for path in modelPaths:
        name=os.path.splitext(os.path.basename(path))[0]
        data=readModelJson(path)
        ret[name]=predictValidate(StateSpaceModel.fromDict(data),record,
            nFit=nFit,horizon=horizon,ell=data.get('ell'))
    return ret


class _Parser(argparse.ArgumentParser):
    """
    Turns argparse's own exit into a UsageError so exit codes stay ours
    """

    def error(self,message:str)->typing.NoReturn:  # type: ignore[override]
        raise UsageError(message)


def _addRunArguments(parser:argparse.ArgumentParser,selection:bool=True)->None:
    parser.add_argument('--archive',required=True,help='archive CSV (t,seg,u1..,y1..)')
    parser.add_argument('--ell',type=int,required=True,help='window length (block rows)')
    parser.add_argument('--order',type=int,required=True,help='model order n')
    parser.add_argument('--rank-tol',type=float,default=None,
        help=f'relative singular value threshold (default {config.RANK_TOL:g})')
    parser.add_argument('--abs-tol',type=float,default=None,help='absolute singular value floor')
    parser.add_argument('--rank-mode',choices=('threshold','gap'),default=None)
    parser.add_argument('--gap-ratio',type=float,default=None)
    parser.add_argument('--known-lag',type=int,default=None,help='maximal system lag L, if known')
    parser.add_argument('--stride',type=int,default=None)
    parser.add_argument('--seed',type=int,default=None)
    parser.add_argument('--force',action='store_true',help='fit even if not identifiable')
    parser.add_argument('--center',action='store_true',help='remove channel means')
    if selection:
        group=parser.add_mutually_exclusive_group()
        group.add_argument('--select',default=None,help='selection file')
        group.add_argument('--greedy',action='store_true',help='greedy record selection')


def buildParser()->argparse.ArgumentParser:
    """
    Command line parser for all subcommands
    """
    parser=_Parser(prog='mrsid',description='Multi-record subspace system identification')
    parser.add_argument('--verbose','-v',action='store_true',help='debug logging')
    commands=parser.add_subparsers(dest='command',parser_class=_Parser)
    commands.required=True
    sub=commands.add_parser('generate',help='generate a synthetic archive')
    sub.add_argument('--spec',required=True,help='generator spec JSON')
    sub.add_argument('--out',required=True,help='archive CSV to write')
    sub.add_argument('--seed',type=int,default=None)
    sub.add_argument('--noise',type=float,default=None,help='output noise sigma override')
    sub=commands.add_parser('scan',help='per-record inventory')
    _addRunArguments(sub,selection=False)
    sub.add_argument('--out',default=None,help='also write the inventory as JSON')
    sub=commands.add_parser('check',help='identifiability test')
    _addRunArguments(sub)
    sub.add_argument('--out',default=None,help='also write the report as JSON')
    sub=commands.add_parser('select',help='greedy record selection')
    _addRunArguments(sub,selection=False)
    sub.add_argument('--out',default=None,help='selection file to write')
    sub=commands.add_parser('fit',help='estimate a model')
    _addRunArguments(sub)
    sub.add_argument('--out',required=True,help='model JSON to write')
    sub=commands.add_parser('validate',help='prediction RMS on a held-out record')
    sub.add_argument('--model',action='append',required=True,help='model JSON (repeatable)')
    sub.add_argument('--archive',required=True)
    sub.add_argument('--record',required=True,help='validation record id')
    sub.add_argument('--nfit',type=int,default=None,help='samples used for the initial state')
    sub.add_argument('--horizon',type=int,default=None)
    sub.add_argument('--center',action='store_true')
    sub.add_argument('--out',default=None,help='also write the reports as JSON')
    return parser


def _run(args:argparse.Namespace)->int:
    if args.command=='generate':
        archive=cmdGenerate(args.spec,args.out,args.seed,args.noise)
        print(f'wrote {len(archive)} records to {args.out}')
        return EXIT_OK
    if args.command=='validate':
        reports=cmdValidate(args.model,args.archive,args.record,args.nfit,args.horizon,args.center)
        print(formatRmsTable(reports))
        if args.out is not None:
            _dumpJson({name:report.toDict() for name,report in reports.items()},args.out)
        return EXIT_OK
    cfg=RunConfig.fromArgs(args)
    if args.command=='scan':
        rows=cmdScan(cfg.archivePath,cfg)
        print(f'{"record":>8} {"length":>7} {"windows":>8} {"rankU":>6} {"rankUY":>7}  identifiable')
        for row in rows:
            print(f'{row["record"]:>8} {row["length"]:>7} {row["windows"]:>8} {str(row["rankU"]):>6} {str(row["rankW"]):>7}  {"yes" if row["identifiable"] else "no"}') # noqa: E501
        if cfg.outPath is not None:
            _dumpJson(rows,cfg.outPath)
        return EXIT_OK
    if args.command=='check':
        report,_,history=cmdCheck(cfg)
        for step in history:
            print(repr(step))
        print(report)
        if cfg.outPath is not None:
            _dumpJson(report.toDict(),cfg.outPath)
        if not report.passed:
            print('; '.join(report.failedConditions()),file=sys.stderr)
            return EXIT_NOT_IDENTIFIABLE
        return EXIT_OK
    if args.command=='select':
        selection,history=cmdSelect(cfg)
        for step in history:
            print(repr(step))
        if not history or not history[-1].report.passed:
            print('no identifiable selection found',file=sys.stderr)
            return EXIT_NOT_IDENTIFIABLE
        print(f'selected {selection.columnCount} columns from {len(selection)} records')
        return EXIT_OK
    result=cmdFit(cfg)
    if result.forced:
        print('WARNING: data failed the identifiability test, model was fit anyway',
            file=sys.stderr)
    if not result.stable:
        print(f'WARNING: estimated model is unstable (spectral radius {result.model.spectralRadius:.4g})', # noqa: E501
            file=sys.stderr)
    print(f'wrote {result.model!r} to {cfg.outPath}')
    return EXIT_OK


def main(argv:typing.Optional[typing.List[str]]=None)->int:
    """
    Main program entrypoint

    :argv: full argument vector including the program name
        (default sys.argv)
    """
    if argv is None:
        argv=sys.argv
    try:
        args=buildParser().parse_args(argv[1:])
    except UsageError as e:
        print(f'usage error: {e}',file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e: # --help
        return int(e.code or 0)
    level=logging.DEBUG if args.verbose else getattr(logging,config.LOG_LEVEL.upper(),logging.WARNING)
    logging.basicConfig(level=level,format='%(levelname)s %(name)s: %(message)s')
    try:
        return _run(args)
    except IdentifiabilityError as e:
        print(str(e),file=sys.stderr)
        return EXIT_NOT_IDENTIFIABLE
    except NumericalError as e:
        print(f'numerical failure: {e}',file=sys.stderr)
        return EXIT_NUMERICAL
    except (SysIdError,ValueError,OSError) as e:
        print(f'error: {e}',file=sys.stderr)
        return EXIT_USAGE


if __name__=="__main__":
    sys.exit(main(sys.argv))
