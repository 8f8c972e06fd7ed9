# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels. Mirrors _pure.py exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def find_zero_run(cnp.uint8_t[::1] bm, Py_ssize_t n):
    cdef Py_ssize_t size = bm.shape[0]
    cdef Py_ssize_t best_start = -1
    cdef Py_ssize_t best_len = 0
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t j, run
    while i < size:
        if bm[i]:
            i += 1
            continue
        j = i
        while j < size and not bm[j]:
            j += 1
        run = j - i
        if run >= n:
            return i, n
        if run > best_len:
            best_start = i
            best_len = run
        i = j
    return best_start, best_len


def find_single_owner_run(cnp.uint8_t[::1] bm_mu, cnp.uint8_t[::1] owner_count,
                          cnp.int64_t[::1] owner0, Py_ssize_t n):
    cdef Py_ssize_t size = bm_mu.shape[0]
    cdef Py_ssize_t best_start = -1
    cdef Py_ssize_t best_len = 0
    cdef cnp.int64_t best_rnti = 0
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t j, run
    cdef cnp.int64_t rnti
    while i < size:
        if bm_mu[i] or owner_count[i] != 1:
            i += 1
            continue
        rnti = owner0[i]
        j = i
        while j < size and not bm_mu[j] and owner_count[j] == 1 and owner0[j] == rnti:
            j += 1
        run = j - i
        if run >= n:
            return i, n, int(rnti)
        if run > best_len:
            best_start = i
            best_len = run
            best_rnti = rnti
        i = j
    if best_len == 0:
        return -1, 0, 0
    return best_start, best_len, int(best_rnti)
