# econometrics/fixed_effects.py
"""
Fixed-effect absorption with pyhdfe.

One fixed effect is removed exactly by within-group demeaning. Two or more
are absorbed by accelerated alternating projections until no entry moves by
more than the tolerance between sweeps.
"""

import logging

import numpy as np
import pandas as pd
import pyhdfe
from pyhdfe.utilities import max_norm_convergence

from config.exceptions import AbsorptionError

logger = logging.getLogger(__name__)

TOL = 1e-10
MAX_SWEEPS = 10_000


def group_codes(frame, key):
    """Dense integer codes 0..G-1 for a fixed-effect key ("a" or "a:b")."""
    columns = key.split(":")
    if len(columns) == 1:
        codes, _ = pd.factorize(frame[columns[0]], sort=True)
        return codes.astype(np.int64)
    return frame.groupby(columns, sort=True).ngroup().to_numpy(dtype=np.int64)


def compact(codes):
    """Renumber codes to 0..G-1 after rows were dropped."""
    _, dense = np.unique(codes, return_inverse=True)
    return dense.astype(np.int64)


def singleton_mask(codes_list):
    """
    Rows to keep once singleton groups are removed.

    Dropping a singleton in one dimension can create a new one in another,
    so the pass repeats until nothing changes.
    """
    if not codes_list:
        return np.ones(0, dtype=bool)
    keep = np.ones(codes_list[0].size, dtype=bool)
    while True:
        drop = np.zeros_like(keep)
        for codes in codes_list:
            counts = np.bincount(codes[keep], minlength=codes.max() + 1 if codes.size else 0)
            drop |= keep & (counts[codes] == 1)
        if not drop.any():
            return keep
        keep &= ~drop


def _fe_ids(codes_list):
    # later dimensions with a single level are spanned by the first one's constant
    kept = [codes_list[0], *(c for c in codes_list[1:] if c.size and c.max() > 0)]
    return np.column_stack(kept)


class SweepCounter:
    """pyhdfe convergence callback that counts the sweeps it is asked about."""

    def __init__(self, tol=TOL):
        self.tol = tol
        self.sweeps = 0

    def __call__(self, last_matrix, matrix):
        self.sweeps += 1
        return max_norm_convergence(last_matrix, matrix, tol=self.tol)


def _residualize(matrix, ids, tol, max_sweeps):
    if ids.shape[1] == 1:
        algorithm = pyhdfe.create(ids, drop_singletons=False, compute_degrees=False, residualize_method="within")
        return algorithm.residualize(matrix), 1
    counter = SweepCounter(tol)
    algorithm = pyhdfe.create(
        ids,
        drop_singletons=False,
        compute_degrees=False,
        residualize_method="map",
        options={"iteration_limit": max_sweeps, "converged": counter},
    )
    return algorithm.residualize(matrix), counter.sweeps


def absorb_fixed_effects(matrix, codes_list, *, tol=TOL, max_sweeps=MAX_SWEEPS, names=None):
    """
    Residualize the columns of matrix on the fixed effects in codes_list.

    Returns (residualized matrix, sweeps). One fixed effect is exact after a
    single sweep. Raises AbsorptionError naming the first column that does
    not converge when the sweeps run out.
    """
    matrix = np.array(matrix, dtype=float, copy=True)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if not codes_list or matrix.shape[1] == 0:
        return matrix, 0
    ids = _fe_ids(codes_list)
    try:
        out, sweeps = _residualize(matrix, ids, tol, max_sweeps)
    except RuntimeError as exc:
        worst = 0
        for j in range(matrix.shape[1]):
            try:
                _residualize(matrix[:, [j]], ids, tol, max_sweeps)
            except RuntimeError:
                worst = j
                break
        column = names[worst] if names is not None else worst
        raise AbsorptionError(
            f"fixed-effect absorption did not converge after {max_sweeps} sweeps (column {column!r}): {exc}",
            column=column,
            sweeps=max_sweeps,
        ) from exc
    logger.debug(f"Fixed effects absorbed in {sweeps} sweeps")
    return out, sweeps


def absorbed_dof(codes_list, clusters=None):
    """
    Degrees of freedom used by the fixed effects for the small-sample factor.

    Fixed effects nested in the clusters cost nothing; pyhdfe counts the
    rest pairwise, netting out redundant constants.
    """
    if not codes_list:
        return 0
    ids = _fe_ids(codes_list)
    cluster_ids = None if clusters is None else compact(np.asarray(clusters))[:, None]
    algorithm = pyhdfe.create(
        ids,
        cluster_ids=cluster_ids,
        drop_singletons=False,
        compute_degrees=True,
        residualize_method="within" if ids.shape[1] == 1 else "map",
    )
    return int(algorithm.degrees)
