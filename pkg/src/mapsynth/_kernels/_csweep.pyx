# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled value-iteration sweep over a CSR state-action layout."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sweep(
    double[::1] data,
    long[::1] indices,
    long[::1] indptr,
    long[::1] state_indptr,
    double[::1] g,
    bint maximize,
):
    """One sweep: per-row expected value of g, then per-state extremum.

    Rows are (state, action) pairs grouped contiguously by state.  Returns
    (q, v) where q has one entry per row and v one entry per state.
    """
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t n_states = state_indptr.shape[0] - 1
    q_arr = np.empty(n_rows, dtype=np.float64)
    v_arr = np.empty(n_states, dtype=np.float64)
    cdef double[::1] q = q_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t r, s, j
    cdef double acc, best

    for r in range(n_rows):
        acc = 0.0
        for j in range(indptr[r], indptr[r + 1]):
            acc += data[j] * g[indices[j]]
        q[r] = acc

    for s in range(n_states):
        best = q[state_indptr[s]]
        for r in range(state_indptr[s] + 1, state_indptr[s + 1]):
            if maximize:
                if q[r] > best:
                    best = q[r]
            else:
                if q[r] < best:
                    best = q[r]
        v[s] = best

    return q_arr, v_arr
