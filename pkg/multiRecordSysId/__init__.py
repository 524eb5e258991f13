r"""
Multi-record subspace system identification

Estimates a discrete-time state space model from an archive of short,
non-contiguous input/output records by stacking windows from every
record into one pair of data matrices.

EXAMPLE:
    archive=loadArchiveCsv('archive.csv')
    selection,history=greedySelect(archive,n=2,ell=3)
    result=fit(buildMultirecord(archive,selection,3),n=2)
    print(result.model.A)
    print(predictValidate(result,archive.record('7')))
"""
from .errors import *
from .ltiModel import *
from .dataArchive import *
from .identifiability import *
from .moespEstimator import *
from .validation import *
from .synthGenerator import *
from .cli import main
