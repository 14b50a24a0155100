"""numpy implementations of the hot loops; the reference for the compiled ones."""

from __future__ import annotations

import numpy as np

MODE_NONE = 0
MODE_INCLUSIVE = 1  # GE / LE
MODE_STRICT = 2  # GT / LT
MODE_EQ = 3


def bm25_scores(indptr, post_doc, post_tf, doc_len, terms, idf, k1, b, avgdl):
    scores = np.zeros(doc_len.shape[0], dtype=np.float64)
    for q in range(terms.shape[0]):
        t = terms[q]
        lo, hi = indptr[t], indptr[t + 1]
        docs = post_doc[lo:hi]
        tf = post_tf[lo:hi]
        dl = doc_len[docs]
        scores[docs] += idf[q] * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl))
    return scores


def window_mask(earliest, latest, timed, start_mode, s_lo, s_hi, end_mode, e_lo, e_hi):
    if start_mode == MODE_NONE and end_mode == MODE_NONE:
        return np.ones(earliest.shape[0], dtype=bool)
    mask = timed.astype(bool).copy()
    if start_mode == MODE_INCLUSIVE:
        mask &= latest >= s_lo
    elif start_mode == MODE_STRICT:
        mask &= latest > s_hi
    elif start_mode == MODE_EQ:
        mask &= (earliest >= s_lo) & (earliest <= s_hi)
    if end_mode == MODE_INCLUSIVE:
        mask &= earliest <= e_hi
    elif end_mode == MODE_STRICT:
        mask &= earliest < e_lo
    elif end_mode == MODE_EQ:
        mask &= (latest >= e_lo) & (latest <= e_hi)
    return mask


def threshold_pairs(block, row_offset, col_offset, theta):
    rows, cols = np.nonzero(block >= theta)
    gi = rows.astype(np.int64) + row_offset
    gj = cols.astype(np.int64) + col_offset
    keep = gi < gj
    return gi[keep], gj[keep], block[rows[keep], cols[keep]].astype(np.float64)
