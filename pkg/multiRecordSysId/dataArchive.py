"""
Archives of non-contiguous input/output records, and the data matrices
built from them

A Record is one contiguous run of samples.  Gaps in the archive (shutdowns,
logging outages) always start a new Record.  A ColumnSelection picks
length-ell windows out of named records, and buildMultirecord stacks each
window into one column of the data matrices U and Y.  Selecting the
windows 0..j-1 of a single record gives back the classic block-Hankel
matrices (buildHankel).

EXAMPLE:
    archive=loadArchiveCsv('turbine.csv')
    selection=ColumnSelection([('5',0,241),('6',0,261)])
    data=buildMultirecord(archive,selection,ell=5)
    print(data.U.shape,data.Y.shape,dataPairCount(selection,5))
"""
import typing
import logging
import numpy as np
import pandas as pd
from .errors import ArchiveFormatError,SelectionError,RecordTooShortError,DimensionError
from .util import ArrayCompatible,asSamples,frozen


logger=logging.getLogger(__name__)

Provenance=typing.Tuple[str,int]
# (recordId,offset,length) of a regression window
SegmentKey=typing.Tuple[str,int,int]


class Record:
    """
    A contiguous, uniformly sampled sequence of (u_t,y_t) pairs
    """

    def __init__(self,
        recordId:str,
        inputs:ArrayCompatible,
        outputs:ArrayCompatible,
        startTime:int=0):
        """
        :startTime: sample index of the first sample
        """
        self.recordId=str(recordId)
        self.startTime=int(startTime)
        self._inputs=frozen(asSamples(inputs,name=f'record {recordId} inputs'))
        self._outputs=frozen(asSamples(outputs,name=f'record {recordId} outputs'))
        if len(self._inputs)!=len(self._outputs):
            raise DimensionError(
                f'record {recordId}: {len(self._inputs)} input samples but {len(self._outputs)} output samples') # noqa: E501
        if len(self._inputs)<1:
            raise DimensionError(f'record {recordId} is empty')

    @property
    def inputs(self)->np.ndarray:
        """
        (N,m) input samples
        """
        return self._inputs
    @property
    def outputs(self)->np.ndarray:
        """
        (N,p) output samples
        """
        return self._outputs

    @property
    def length(self)->int:
        """
        Number of samples
        """
        return len(self._inputs)
    def __len__(self)->int:
        return self.length

    @property
    def m(self)->int:
        """
        Number of input channels
        """
        return self._inputs.shape[1]
    @property
    def p(self)->int:
        """
        Number of output channels
        """
        return self._outputs.shape[1]

    @property
    def times(self)->np.ndarray:
        """
        Sample indices of every sample
        """
        return np.arange(self.startTime,self.startTime+self.length)

    def windowCount(self,ell:int,stride:int=1)->int:
        """
        How many length-ell windows fit, taking every stride-th offset
        """
        if self.length<ell:
            return 0
        return (self.length-ell)//stride+1

    def __repr__(self)->str:
        return f'Record({self.recordId!r}, start={self.startTime}, length={self.length})'


class Archive:
    """
    An ordered collection of records sharing the same channels
    """

    def __init__(self,records:typing.Iterable[Record]):
        """ """
        self.records:typing.List[Record]=list(records)
        if not self.records:
            raise ArchiveFormatError('archive contains no records')
        self._byId:typing.Dict[str,Record]={}
        for record in self.records:
            if record.recordId in self._byId:
                raise ArchiveFormatError(f'duplicate record id {record.recordId!r}')
            if (record.m,record.p)!=(self.records[0].m,self.records[0].p):
                raise DimensionError(
                    f'record {record.recordId!r} has {record.m} inputs/{record.p} outputs, expected {self.records[0].m}/{self.records[0].p}') # noqa: E501
            self._byId[record.recordId]=record

    @property
    def m(self)->int:
        """
        Number of input channels
        """
        return self.records[0].m
    @property
    def p(self)->int:
        """
        Number of output channels
        """
        return self.records[0].p

    @property
    def recordIds(self)->typing.List[str]:
        """
        Record ids in archive order
        """
        return [record.recordId for record in self.records]

    def record(self,recordId:str)->Record:
        """
        Look up a record by id
        """
        try:
            return self._byId[str(recordId)]
        except KeyError:
            raise SelectionError(f'no record with id {recordId!r} in archive') from None
    __getitem__=record

    def __contains__(self,recordId:typing.Any)->bool:
        return str(recordId) in self._byId

    def __iter__(self)->typing.Iterator[Record]:
        return iter(self.records)

    def __len__(self)->int:
        return len(self.records)

    def windowCount(self,ell:int,stride:int=1)->int:
        """
        Total number of length-ell windows over all records
        """
        return sum(record.windowCount(ell,stride) for record in self.records)

    def subset(self,recordIds:typing.Iterable[str])->"Archive":
        """
        A new archive holding only the named records (in the given order)
        """
        return Archive([self.record(recordId) for recordId in recordIds])

    def centered(self)->"Archive":
        """
        A copy with the per-channel mean (over every sample of every record)
        removed from inputs and outputs
        """
        uMean=np.mean(np.vstack([r.inputs for r in self.records]),axis=0)
        yMean=np.mean(np.vstack([r.outputs for r in self.records]),axis=0)
        return Archive([
            Record(r.recordId,r.inputs-uMean,r.outputs-yMean,r.startTime)
            for r in self.records])

    def __repr__(self)->str:
        return f'Archive({len(self.records)} records, m={self.m}, p={self.p})'


class SelectionEntry:
    """
    Take `count` windows from one record, starting at `offset`
    and advancing `stride` samples each time
    """

    def __init__(self,recordId:str,offset:int,count:int,stride:int=1):
        """ """
        self.recordId=str(recordId)
        self.offset=int(offset)
        self.count=int(count)
        self.stride=int(stride)
        if self.offset<0 or self.count<1 or self.stride<1:
            raise SelectionError(
                f'bad selection entry {self.recordId},{self.offset},{self.count},{self.stride}')

    @property
    def offsets(self)->typing.List[int]:
        """
        Start offset of every window
        """
        return [self.offset+k*self.stride for k in range(self.count)]

    def spanLength(self,ell:int)->int:
        """
        Number of contiguous samples covered by all windows of this entry
        """
        return (self.count-1)*self.stride+ell

    def __eq__(self,other:typing.Any)->bool:
        if not isinstance(other,SelectionEntry):
            return False
        return (self.recordId,self.offset,self.count,self.stride)==(other.recordId,other.offset,other.count,other.stride) # noqa: E501

    def __repr__(self)->str:
        return f'SelectionEntry({self.recordId!r}, {self.offset}, {self.count}, stride={self.stride})'


SelectionEntryCompatible=typing.Union[SelectionEntry,typing.Sequence[typing.Any]]


class ColumnSelection:
    """
    Which windows of which records become data matrix columns

    Built from SelectionEntry objects or plain (recordId,offset,count[,stride])
    tuples.
    """

    def __init__(self,entries:typing.Iterable[SelectionEntryCompatible]=()):
        """ """
        self.entries:typing.List[SelectionEntry]=[]
        for entry in entries:
            self.add(entry)

    def add(self,entry:SelectionEntryCompatible)->None:
        """
        Append an entry
        """
        if not isinstance(entry,SelectionEntry):
            entry=SelectionEntry(*entry)
        self.entries.append(entry)

    @classmethod
    def fromCounts(cls,
        archive:Archive,
        counts:typing.Sequence[int],
        stride:int=1
        )->"ColumnSelection":
        """
        Selection vector form: counts[i] windows from the i-th record
        of the archive, starting at its first sample.  Zero counts are skipped.
        """
        if len(counts)!=len(archive):
            raise SelectionError(f'{len(counts)} counts given for {len(archive)} records')
        return cls(
            SelectionEntry(record.recordId,0,count,stride)
            for record,count in zip(archive,counts) if count>0)

    @classmethod
    def wholeRecords(cls,
        archive:Archive,
        ell:int,
        stride:int=1
        )->"ColumnSelection":
        """
        Every window of every record long enough to hold one
        """
        return cls(
            SelectionEntry(record.recordId,0,record.windowCount(ell,stride),stride)
            for record in archive if record.windowCount(ell,stride)>0)

    @property
    def columnCount(self)->int:
        """
        Total number of windows, j
        """
        return sum(entry.count for entry in self.entries)

    def windows(self)->typing.Iterator[Provenance]:
        """
        (recordId,offset) of every window, in column order
        """
        for entry in self.entries:
            for offset in entry.offsets:
                yield (entry.recordId,offset)

    def validate(self,archive:Archive,ell:int)->None:
        """
        Make sure every window lies inside its record
        """
        if not self.entries:
            raise SelectionError('selection is empty')
        seen=[]
        for entry in self.entries:
            if entry in seen:
                raise SelectionError(f'{entry!r} is selected twice')
            seen.append(entry)
        for entry in self.entries:
            record=archive.record(entry.recordId)
            if entry.offset+entry.spanLength(ell)>record.length:
                raise SelectionError(
                    f'windows of {entry!r} need {entry.offset+entry.spanLength(ell)} samples, record {record.recordId!r} has {record.length}') # noqa: E501

    def __add__(self,other:"ColumnSelection")->"ColumnSelection":
        return ColumnSelection(self.entries+other.entries)

    def __iter__(self)->typing.Iterator[SelectionEntry]:
        return iter(self.entries)

    def __len__(self)->int:
        return len(self.entries)

    def __repr__(self)->str:
        return f'ColumnSelection({self.entries!r})'


class RegressionWindow:
    """
    One contiguous span of samples that shares a single unknown
    initial state in the B/D/x regression.

    It covers all windows of one selection entry, so it may be longer
    than ell.
    """

    def __init__(self,
        recordId:str,
        offset:int,
        inputs:np.ndarray,
        outputs:np.ndarray):
        """ """
        self.recordId=recordId
        self.offset=offset
        self.inputs=frozen(inputs)
        self.outputs=frozen(outputs)

    @property
    def provenance(self)->Provenance:
        """
        (recordId,offset) of the first sample
        """
        return (self.recordId,self.offset)

    @property
    def key(self)->SegmentKey:
        """
        (recordId,offset,length) of the span
        """
        return (self.recordId,self.offset,self.length)

    @property
    def length(self)->int:
        """
        Number of samples
        """
        return len(self.inputs)
    def __len__(self)->int:
        return self.length

    def __repr__(self)->str:
        return f'RegressionWindow({self.recordId!r}, offset={self.offset}, length={self.length})'


class MultiRecordMatrices:
    """
    The data matrices U (ell*m x j) and Y (ell*p x j), the origin of
    every column, and the regression windows they were drawn from
    """

    def __init__(self,
        U:np.ndarray,
        Y:np.ndarray,
        ell:int,
        provenance:typing.Sequence[Provenance],
        segments:typing.Sequence[RegressionWindow]=()):
        """ """
        if U.shape[1]!=Y.shape[1]:
            raise DimensionError(f'U has {U.shape[1]} columns but Y has {Y.shape[1]}')
        if U.shape[0]%ell or Y.shape[0]%ell:
            raise DimensionError(f'data matrix rows are not a multiple of ell={ell}')
        if len(provenance)!=U.shape[1]:
            raise DimensionError('one provenance entry is needed per column')
        self.U=frozen(U)
        self.Y=frozen(Y)
        self.ell=int(ell)
        self.provenance:typing.List[Provenance]=list(provenance)
        self.segments:typing.List[RegressionWindow]=list(segments)

    @property
    def j(self)->int:
        """
        Number of columns
        """
        return self.U.shape[1]
    @property
    def m(self)->int:
        """
        Number of input channels
        """
        return self.U.shape[0]//self.ell
    @property
    def p(self)->int:
        """
        Number of output channels
        """
        return self.Y.shape[0]//self.ell

    @property
    def W(self)->np.ndarray:
        """
        Stacked [U;Y]
        """
        return np.vstack((self.U,self.Y))

    @property
    def interleaved(self)->np.ndarray:
        """
        The same data with rows ordered w_t=[u_t;y_t] block by block
        (a row permutation of W)
        """
        m,p=self.m,self.p
        blocks=[]
        for t in range(self.ell):
            blocks.append(self.U[t*m:(t+1)*m])
            blocks.append(self.Y[t*p:(t+1)*p])
        return np.vstack(blocks)

    def __repr__(self)->str:
        return f'MultiRecordMatrices(ell={self.ell}, j={self.j}, m={self.m}, p={self.p})'


def stackWindows(samples:np.ndarray,offsets:typing.Sequence[int],ell:int)->np.ndarray:
    """
    Column k is samples[offsets[k]:offsets[k]+ell] stacked into one vector
    """
    width=samples.shape[1]
    ret=np.empty((ell*width,len(offsets)))
    for k,offset in enumerate(offsets):
        ret[:,k]=samples[offset:offset+ell].reshape(-1)
    return ret


def buildHankel(record:Record,ell:int,j:int)->MultiRecordMatrices:
    """
    Classic single-record block-Hankel data matrices:
    column k stacks samples k..k+ell-1
    """
    ell,j=int(ell),int(j)
    if ell<1 or j<1:
        raise SelectionError(f'ell and j must be positive (ell={ell}, j={j})')
    if record.length<ell+j-1:
        raise RecordTooShortError(
            f'record {record.recordId!r} has {record.length} samples, need ell+j-1={ell+j-1}')
    offsets=list(range(j))
    segment=RegressionWindow(record.recordId,0,
        record.inputs[:ell+j-1],record.outputs[:ell+j-1])
    return MultiRecordMatrices(
        stackWindows(record.inputs,offsets,ell),
        stackWindows(record.outputs,offsets,ell),
        ell,[(record.recordId,k) for k in offsets],[segment])


def buildMultirecord(
    archive:Archive,
    selection:ColumnSelection,
    ell:int
    )->MultiRecordMatrices:
    """
    Multi-record data matrices: one column per selected window,
    columns in selection order.

    Column order does not affect any singular value downstream.
    """
    ell=int(ell)
    if ell<1:
        raise SelectionError(f'ell must be positive, got {ell}')
    selection.validate(archive,ell)
    uBlocks=[]
    yBlocks=[]
    provenance:typing.List[Provenance]=[]
    segments=[]
    for entry in selection:
        record=archive.record(entry.recordId)
        offsets=entry.offsets
        uBlocks.append(stackWindows(record.inputs,offsets,ell))
        yBlocks.append(stackWindows(record.outputs,offsets,ell))
        provenance.extend((record.recordId,offset) for offset in offsets)
        end=entry.offset+entry.spanLength(ell)
        segments.append(RegressionWindow(record.recordId,entry.offset,
            record.inputs[entry.offset:end],record.outputs[entry.offset:end]))
    data=MultiRecordMatrices(np.hstack(uBlocks),np.hstack(yBlocks),ell,provenance,segments)
    logger.debug('built %r from %d selection entries',data,len(selection))
    return data


def dataPairCount(selection:ColumnSelection,ell:int)->int:
    """
    Number of distinct (u_t,y_t) samples touched by the selection,
    counting overlapping windows once
    """
    touched:typing.Set[typing.Tuple[str,int]]=set()
    for recordId,offset in selection.windows():
        touched.update((recordId,t) for t in range(offset,offset+ell))
    return len(touched)


def regressionWindows(
    archive:Archive,
    selection:ColumnSelection,
    ell:int
    )->typing.List[RegressionWindow]:
    """
    The regression windows of a selection, without building the matrices
    """
    selection.validate(archive,ell)
    ret=[]
    for entry in selection:
        record=archive.record(entry.recordId)
        end=entry.offset+entry.spanLength(ell)
        ret.append(RegressionWindow(record.recordId,entry.offset,
            record.inputs[entry.offset:end],record.outputs[entry.offset:end]))
    return ret


def archiveColumns(m:int,p:int)->typing.List[str]:
    """
    CSV header for an archive with m inputs and p outputs
    """
    return ['t','seg']+[f'u{i+1}' for i in range(m)]+[f'y{i+1}' for i in range(p)]


def _channelCounts(columns:typing.Sequence[str],row:int=1)->typing.Tuple[int,int]:
    """
    Work out m and p from an archive header
    """
    columns=[str(c).strip() for c in columns]
    if len(columns)<4 or columns[0]!='t' or columns[1]!='seg':
        raise ArchiveFormatError(
            f'header must be t,seg,u1..um,y1..yp, got {",".join(columns)}',row)
    m=sum(1 for c in columns if c.startswith('u'))
    p=len(columns)-2-m
    if m<1 or p<1 or columns!=archiveColumns(m,p):
        raise ArchiveFormatError(
            f'header must be t,seg,u1..um,y1..yp, got {",".join(columns)}',row)
    return m,p


def loadArchiveCsv(
    filename:str,
    m:typing.Optional[int]=None,
    p:typing.Optional[int]=None,
    center:bool=False
    )->Archive:
    """
    Read an archive from CSV

    Header: t,seg,u1,...,um,y1,...,yp
    Rows are grouped by segment id (in order of first appearance), sorted
    by t within each segment, and must be contiguous in t.

    :m: expected number of inputs (inferred from the header if None)
    :p: expected number of outputs (inferred from the header if None)
    :center: remove per-channel means after loading
    """
    try:
        frame=pd.read_csv(filename,dtype=str,keep_default_na=False,skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ArchiveFormatError(f'"{filename}" is empty') from None
    except pd.errors.ParserError as e:
        raise ArchiveFormatError(f'"{filename}": {e}') from None
    fileM,fileP=_channelCounts(list(frame.columns))
    if (m is not None and m!=fileM) or (p is not None and p!=fileP):
        raise ArchiveFormatError(
            f'expected {m} inputs/{p} outputs, file has {fileM}/{fileP}',1)
    if frame.empty:
        raise ArchiveFormatError(f'"{filename}" has a header but no data rows')
    raw=frame.to_numpy(dtype=object)
    times=np.empty(len(raw),dtype=np.int64)
    values=np.empty((len(raw),fileM+fileP))
    segments:typing.Dict[str,typing.List[int]]={}
    for index,fields in enumerate(raw):
        row=index+2 # header is row 1
        if any(pd.isna(v) or str(v).strip()=='' for v in fields):
            raise ArchiveFormatError('missing field',row)
        try:
            t=float(fields[0])
        except ValueError:
            raise ArchiveFormatError(f'time index {fields[0]!r} is not a number',row) from None
        if not t.is_integer():
            raise ArchiveFormatError(f'time index {fields[0]!r} is not an integer',row)
        times[index]=int(t)
        try:
            values[index]=[float(v) for v in fields[2:]]
        except ValueError:
            raise ArchiveFormatError('non-numeric sample value',row) from None
        if not np.all(np.isfinite(values[index])):
            raise ArchiveFormatError('sample value is NaN or Inf',row)
        segments.setdefault(str(fields[1]).strip(),[]).append(index)
    records=[]
    for seg,indices in segments.items():
        rows=np.array(indices)
        rows=rows[np.argsort(times[rows],kind='stable')]
        t=times[rows]
        breaks=np.nonzero(np.diff(t)!=1)[0]
        if breaks.size:
            raise ArchiveFormatError(
                f'segment {seg!r} is not contiguous: t={t[breaks[0]]} followed by t={t[breaks[0]+1]}', # noqa: E501
                int(rows[breaks[0]+1])+2)
        records.append(Record(seg,values[rows,:fileM],values[rows,fileM:],int(t[0])))
    archive=Archive(records)
    logger.info('loaded %r from %s',archive,filename)
    if center:
        archive=archive.centered()
    return archive


def writeArchiveCsv(archive:Archive,filename:str)->None:
    """
    Write an archive in the format read by loadArchiveCsv
    """
    frames=[]
    columns=archiveColumns(archive.m,archive.p)
    for record in archive:
        frame=pd.DataFrame(np.hstack((record.inputs,record.outputs)),columns=columns[2:])
        frame.insert(0,'seg',record.recordId)
        frame.insert(0,'t',record.times)
        frames.append(frame)
    pd.concat(frames,ignore_index=True).to_csv(filename,index=False,float_format='%.17g')
    logger.info('wrote %r to %s',archive,filename)


def loadSelection(filename:str)->ColumnSelection:
    """
    Read a selection file: lines of record_id,offset,count[,stride]
    (blank lines and lines starting with # are ignored)
    """
    selection=ColumnSelection()
    with open(filename,'r',encoding='utf-8') as f:
        for lineNo,line in enumerate(f,1):
            line=line.strip()
            if not line or line.startswith('#'):
                continue
            cols=[c.strip() for c in line.split(',')]
            if len(cols) not in (3,4):
                raise ArchiveFormatError(f'expected record_id,offset,count[,stride], got {line!r}',lineNo) # noqa: E501
            try:
                selection.add(SelectionEntry(cols[0],*[int(c) for c in cols[1:]]))
            except ValueError as e:
                raise ArchiveFormatError(str(e),lineNo) from None
    if not selection.entries:
        raise ArchiveFormatError(f'selection file "{filename}" is empty')
    return selection


def writeSelection(selection:ColumnSelection,filename:str)->None:
    """
    Write a selection file readable by loadSelection
    """
    with open(filename,'w',encoding='utf-8') as f:
        for entry in selection:
            f.write(f'{entry.recordId},{entry.offset},{entry.count},{entry.stride}\n')
