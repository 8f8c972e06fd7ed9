"""Pure-python reference implementations of the scan kernels.

Semantics are identical to the compiled core; both operate on integer
arrays, so results are bit-identical across backends.
"""


def find_zero_run(bm, n):
    """First run of zeros with length >= n (truncated to n), else the
    longest zero run (lowest start on ties).

    Returns (start, length) or (-1, 0) when the bitmap has no zero bit.
    """
    size = len(bm)
    best_start = -1
    best_len = 0
    i = 0
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


def find_single_owner_run(bm_mu, owner_count, owner0, n):
    """First run of bm_mu zeros whose REs all belong to the same single
    owner, with length >= n (truncated to n), else the longest such run.

    Returns (start, length, rnti) or (-1, 0, 0) when no pairable run
    exists.
    """
    size = len(bm_mu)
    best_start = -1
    best_len = 0
    best_rnti = 0
    i = 0
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
            best_rnti = int(rnti)
        i = j
    if best_len == 0:
        return -1, 0, 0
    return best_start, best_len, best_rnti
