"""hpfold: fold HP-model proteins on the square lattice with deep Q-learning.

A chain is grown one monomer at a time as a self-avoiding walk; a Q-network
(a stacked LSTM by default) learns which relative move, left, forward or
right, leads to the most hydrophobic contacts. The package also ships a
random-search baseline, exhaustive enumeration for short chains, the
standard benchmark sequences and a database of degenerate optimal folds.
"""

__version__ = "0.1.0"

from hpfold.config import OracleConfig, RunConfig, TrainerConfig
from hpfold.core.lattice import Action, HPSequence
from hpfold.core.trial import TrialRunner, fold_sequence

__all__ = [
    "Action",
    "HPSequence",
    "OracleConfig",
    "RunConfig",
    "TrainerConfig",
    "TrialRunner",
    "fold_sequence",
    "__version__",
]
