"""Pure-numpy fallback for the value-iteration sweep kernel."""

import numpy as np


def sweep(data, indices, indptr, state_indptr, g, maximize):
    """One sweep: per-row expected value of g, then per-state extremum.

    Same contract as the compiled kernel: rows are (state, action) pairs
    grouped contiguously by state; every row has nonempty support and
    every state has at least one row.
    """
    q = np.add.reduceat(data * g[indices], indptr[:-1])
    reducer = np.maximum if maximize else np.minimum
    v = reducer.reduceat(q, state_indptr[:-1])
    return q, v
