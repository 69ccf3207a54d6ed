# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled candidate search; mirrors ``_scoring.best_candidate_numpy``."""

from libc.math cimport pow
from libc.stdlib cimport free, malloc


cdef inline bint _before(long a_l, long a_r, long b_l, long b_r) noexcept nogil:
    return a_l < b_l or (a_l == b_l and a_r < b_r)


def best_candidate(
    const double[:, ::1] corr,
    const double[:, ::1] self_a,
    const double[:, ::1] self_b,
    const double[::1] expo,
    const int[:, ::1] pair_dirs,
    const int[:, :, ::1] pair_base,
    int shift,
):
    """Return ``(score, p, l1, l2)`` of the best candidate; ``p = -1`` if none scores > 0."""
    cdef Py_ssize_t P = pair_dirs.shape[0]
    cdef Py_ssize_t L = self_a.shape[1]
    cdef int R = corr.shape[0]
    cdef Py_ssize_t p, k, l1, l2
    cdef int m, k1, k2
    cdef int row[4]
    cdef int c
    cdef int* cols = <int*> malloc(4 * L * sizeof(int))
    if cols == NULL:
        raise MemoryError()
    cdef double prod, sa, best_p, s, thr
    cdef bint found
    cdef Py_ssize_t K = self_a.shape[0]
    cdef double* top_a = <double*> malloc(K * sizeof(double))
    cdef double* top_b = <double*> malloc(K * sizeof(double))
    if top_a == NULL or top_b == NULL:
        free(cols)
        free(top_a)
        free(top_b)
        raise MemoryError()
    cdef long bl1, bl2
    cdef double best = 0.0
    cdef long best_pair = -1, best_l1 = 0, best_l2 = 0
    cdef long key_l, key_r, best_key_l = 0, best_key_r = 0
    with nogil:
        for k in range(K):
            top_a[k] = 0.0
            top_b[k] = 0.0
            for l1 in range(L):
                if self_a[k, l1] > top_a[k]:
                    top_a[k] = self_a[k, l1]
                if self_b[k, l1] > top_b[k]:
                    top_b[k] = self_b[k, l1]
        for p in range(P):
            k1 = pair_dirs[p, 0]
            k2 = pair_dirs[p, 1]
            # products at or below thr cannot reach the current best score;
            # the margin absorbs rounding in pow so ties are still seen
            thr = 0.0
            if best > 0.0:
                thr = pow(best, 1.0 / expo[p]) * (1.0 - 1e-12)
                if top_a[k1] * top_b[k2] <= thr:
                    continue
            for m in range(4):
                for l2 in range(L):
                    c = (pair_base[p, m, 1] - <int>l2 * shift) % R
                    cols[m * L + l2] = c + R if c < 0 else c
            best_p = thr
            found = False
            bl1 = 0
            bl2 = 0
            for l1 in range(L):
                sa = self_a[k1, l1]
                if sa <= best_p:
                    continue
                for m in range(4):
                    row[m] = (pair_base[p, m, 0] - <int>l1 * shift) % R
                    if row[m] < 0:
                        row[m] += R
                for l2 in range(L):
                    # every factor lies in [0, 1], so stop once the product cannot win
                    prod = sa * self_b[k2, l2]
                    if prod <= best_p:
                        continue
                    prod = prod * corr[row[0], cols[l2]]
                    if prod <= best_p:
                        continue
                    prod = prod * corr[row[1], cols[L + l2]]
                    if prod <= best_p:
                        continue
                    prod = prod * corr[row[2], cols[2 * L + l2]]
                    if prod <= best_p:
                        continue
                    prod = prod * corr[row[3], cols[3 * L + l2]]
                    if prod > best_p:
                        best_p = prod
                        found = True
                        bl1 = l1
                        bl2 = l2
            if not found:
                continue
            s = pow(best_p, expo[p])
            key_l = k1 * L + bl1
            key_r = k2 * L + bl2
            if s > best or (s == best and best_pair >= 0 and _before(key_l, key_r, best_key_l, best_key_r)):
                best = s
                best_pair = p
                best_l1 = bl1
                best_l2 = bl2
                best_key_l = key_l
                best_key_r = key_r
    free(cols)
    free(top_a)
    free(top_b)
    return best, best_pair, best_l1, best_l2
