"""
Package-wide defaults

Most values can be overridden from the environment, eg:
    MRSID_RANK_TOL=1e-6 mrsid check --archive data.csv --ell 5 --order 4 --greedy
"""
import os


# relative singular value threshold used for every numerical rank decision
RANK_TOL=float(os.environ.get('MRSID_RANK_TOL','1e-8'))

# absolute singular value floor
ABS_TOL=float(os.environ.get('MRSID_ABS_TOL','0'))

# "threshold" for noise-free data, "gap" for graded spectra of archival data
RANK_MODE=os.environ.get('MRSID_RANK_MODE','threshold')

# minimum singular value ratio that counts as a gap in "gap" mode
GAP_RATIO=float(os.environ.get('MRSID_GAP_RATIO','10'))

# similarity transforms with a larger condition number are refused
MAX_CONDITION=float(os.environ.get('MRSID_MAX_CONDITION','1e12'))

# window stride used when a whole record is turned into data matrix columns
STRIDE=int(os.environ.get('MRSID_STRIDE','1'))

LOG_LEVEL=os.environ.get('MRSID_LOG_LEVEL','WARNING')

# Markov parameters compared per state dimension by model distances
MARKOV_PER_STATE=4
