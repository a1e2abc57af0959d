"""One-hot state encoding fed to the Q-network.

Each of the N monomers becomes a row of six binary features::

    column  0   1   2   3   4   5
            -   L   F   R   H   P

Columns 0-3 give the move that placed the monomer ('-' for the fixed
prefix and for monomers not yet placed); columns 4-5 give its type. The
flat form is the row-major N*6 vector of 0/1 values.
"""

import numpy as np

from hpfold.core.lattice import WalkState, as_sequence

MOVEMENT_CODES = ("-", "L", "F", "R")
MONOMER_CODES = ("H", "P")
FEATURES = len(MOVEMENT_CODES) + len(MONOMER_CODES)

_UNPLACED = 0
_H_COLUMN = 4
_P_COLUMN = 5


def encode(state: WalkState, seq) -> np.ndarray:
    """Encode a walk as an N x 6 binary matrix.

    :param state: walk over ``seq``
    :param seq: HP sequence
    :return: uint8 array of shape (N, 6)
    """
    seq = as_sequence(seq)
    n = len(seq)
    x = np.zeros((n, FEATURES), dtype=np.uint8)
    x[:, _UNPLACED] = 1
    for i, action in enumerate(state.actions, start=2):
        x[i, _UNPLACED] = 0
        x[i, 1 + int(action)] = 1
    hydrophobic = np.frombuffer(seq.monomers.encode(), dtype=np.uint8) == ord("H")
    x[hydrophobic, _H_COLUMN] = 1
    x[~hydrophobic, _P_COLUMN] = 1
    return x


def flatten(x: np.ndarray) -> np.ndarray:
    """Row-major flat form used in checkpoints and dumps."""
    return np.ascontiguousarray(x, dtype=np.uint8).reshape(-1)


def unflatten(flat: np.ndarray) -> np.ndarray:
    flat = np.asarray(flat, dtype=np.uint8)
    if flat.size % FEATURES:
        raise ValueError(f"Flat encoding length {flat.size} is not a multiple of {FEATURES}")
    return flat.reshape(-1, FEATURES)


def describe(x: np.ndarray) -> list:
    """Rows as ``[movement, monomer]`` pairs, e.g. ``[["-", "H"], ["L", "P"]]``."""
    rows = []
    for row in np.asarray(x):
        rows.append([MOVEMENT_CODES[int(np.argmax(row[:4]))], MONOMER_CODES[int(np.argmax(row[4:]))]])
    return rows
