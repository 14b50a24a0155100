# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the loops in ``_pykernels``; same signatures, same arithmetic."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

from libc.stdint cimport INT64_MAX, INT64_MIN

DEF MODE_NONE = 0
DEF MODE_INCLUSIVE = 1
DEF MODE_STRICT = 2
DEF MODE_EQ = 3


def bm25_scores(const cnp.int64_t[::1] indptr,
                const cnp.int64_t[::1] post_doc,
                const double[::1] post_tf,
                const double[::1] doc_len,
                const cnp.int64_t[::1] terms,
                const double[::1] idf,
                double k1, double b, double avgdl):
    cdef Py_ssize_t n = doc_len.shape[0]
    scores_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] scores = scores_arr
    cdef Py_ssize_t q, p, d
    cdef cnp.int64_t t
    cdef double tf, dl, w
    with nogil:
        for q in range(terms.shape[0]):
            t = terms[q]
            w = idf[q]
            for p in range(indptr[t], indptr[t + 1]):
                d = post_doc[p]
                tf = post_tf[p]
                dl = doc_len[d]
                scores[d] += w * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl))
    return scores_arr


def window_mask(const cnp.int64_t[::1] earliest,
                const cnp.int64_t[::1] latest,
                const cnp.uint8_t[::1] timed,
                int start_mode, cnp.int64_t s_lo, cnp.int64_t s_hi,
                int end_mode, cnp.int64_t e_lo, cnp.int64_t e_hi):
    cdef Py_ssize_t n = earliest.shape[0]
    out_arr = np.ones(n, dtype=np.bool_)
    if start_mode == MODE_NONE and end_mode == MODE_NONE:
        return out_arr
    # Each side reduces to "x in [lo, hi]" on one of the two arrays; picking the
    # array and bounds up front leaves a branch-free loop the compiler vectorises.
    cdef cnp.int64_t lo1 = INT64_MIN, hi1 = INT64_MAX, lo2 = INT64_MIN, hi2 = INT64_MAX
    cdef const cnp.int64_t[::1] xs = latest
    cdef const cnp.int64_t[::1] ys = earliest
    if start_mode == MODE_INCLUSIVE:
        lo1 = s_lo
    elif start_mode == MODE_STRICT:
        lo1 = s_hi + 1
    elif start_mode == MODE_EQ:
        xs, lo1, hi1 = earliest, s_lo, s_hi
    if end_mode == MODE_INCLUSIVE:
        hi2 = e_hi
    elif end_mode == MODE_STRICT:
        hi2 = e_lo - 1
    elif end_mode == MODE_EQ:
        ys, lo2, hi2 = latest, e_lo, e_hi
    cdef cnp.npy_bool[::1] out = out_arr
    cdef Py_ssize_t i
    cdef cnp.int64_t x, y
    with nogil:
        for i in range(n):
            x = xs[i]
            y = ys[i]
            out[i] = (timed[i] != 0) & (x >= lo1) & (x <= hi1) & (y >= lo2) & (y <= hi2)
    return out_arr


def threshold_pairs(const double[:, ::1] block, cnp.int64_t row_offset,
                    cnp.int64_t col_offset, double theta):
    cdef Py_ssize_t r = block.shape[0], c = block.shape[1]
    cdef Py_ssize_t i, j, k = 0
    cdef Py_ssize_t j0
    # First pass counts, second fills: avoids Python list appends in the loop.
    with nogil:
        for i in range(r):
            j0 = row_offset + i + 1 - col_offset
            if j0 < 0:
                j0 = 0
            for j in range(j0, c):
                if block[i, j] >= theta:
                    k += 1
    gi_arr = np.empty(k, dtype=np.int64)
    gj_arr = np.empty(k, dtype=np.int64)
    sim_arr = np.empty(k, dtype=np.float64)
    cdef cnp.int64_t[::1] gi = gi_arr
    cdef cnp.int64_t[::1] gj = gj_arr
    cdef double[::1] sim = sim_arr
    k = 0
    with nogil:
        for i in range(r):
            j0 = row_offset + i + 1 - col_offset
            if j0 < 0:
                j0 = 0
            for j in range(j0, c):
                if block[i, j] >= theta:
                    gi[k] = row_offset + i
                    gj[k] = col_offset + j
                    sim[k] = block[i, j]
                    k += 1
    return gi_arr, gj_arr, sim_arr
