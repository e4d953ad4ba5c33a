# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled best-split search; the hot kernel of forest training.

Must agree bit-for-bit with py_backend.best_split on the Gini criterion:
class counts are exact integers, and the score is two divisions plus one
addition applied in the same order as the NumPy twin. Ties break to the
lowest feature index, then the lowest threshold (strict-improvement scans
in ascending order on both).
"""

from libc.stdlib cimport free, malloc, qsort
from libc.string cimport memset
from libc.math cimport INFINITY, log


cdef struct ValLab:
    double v
    int lab


cdef int _cmp_vallab(const void* a, const void* b) noexcept nogil:
    cdef double av = (<const ValLab*> a).v
    cdef double bv = (<const ValLab*> b).v
    if av < bv:
        return -1
    elif av > bv:
        return 1
    return 0


cdef inline double _xlogx(long long c) noexcept nogil:
    if c <= 0:
        return 0.0
    return c * log(<double> c)


def best_split(
    double[:, ::1] X,
    int[:] y,
    long long[:] idx,
    long long[:] features,
    int n_classes,
    int min_leaf,
    int criterion=0,
):
    """Same contract as py_backend.best_split; criterion 0=gini, 1=entropy."""
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    if n < 2 * min_leaf:
        return None

    cdef ValLab* buf = <ValLab*> malloc(n * sizeof(ValLab))
    cdef long long* left = <long long*> malloc(n_classes * sizeof(long long))
    cdef long long* total = <long long*> malloc(n_classes * sizeof(long long))
    if buf == NULL or left == NULL or total == NULL:
        free(buf)
        free(left)
        free(total)
        raise MemoryError()

    cdef long long best_feature = -1
    cdef double best_thr = 0.0
    cdef double best_score = -INFINITY
    cdef Py_ssize_t best_nl = 0

    cdef Py_ssize_t fi, i, f
    cdef int lab
    cdef long long nl, nr, l_old, r_old
    cdef long long ssq_left, ssq_right, ssq_total
    cdef double score, se_left, se_right, se_total
    cdef bint use_entropy = criterion == 1

    try:
        memset(total, 0, n_classes * sizeof(long long))
        for i in range(n):
            total[y[idx[i]]] += 1
        ssq_total = 0
        se_total = 0.0
        for lab in range(n_classes):
            ssq_total += total[lab] * total[lab]
            if use_entropy:
                se_total += _xlogx(total[lab])

        for fi in range(nf):
            f = <Py_ssize_t> features[fi]
            for i in range(n):
                buf[i].v = X[idx[i], f]
                buf[i].lab = y[idx[i]]
            qsort(buf, n, sizeof(ValLab), _cmp_vallab)

            memset(left, 0, n_classes * sizeof(long long))
            ssq_left = 0
            ssq_right = ssq_total
            se_left = 0.0
            se_right = se_total

            for i in range(n - 1):
                lab = buf[i].lab
                l_old = left[lab]
                r_old = total[lab] - l_old
                left[lab] = l_old + 1
                ssq_left += 2 * l_old + 1
                ssq_right -= 2 * r_old - 1
                if use_entropy:
                    se_left += _xlogx(l_old + 1) - _xlogx(l_old)
                    se_right += _xlogx(r_old - 1) - _xlogx(r_old)
                nl = i + 1
                nr = n - nl
                if buf[i].v != buf[i + 1].v and nl >= min_leaf and nr >= min_leaf:
                    if use_entropy:
                        score = (se_left - nl * log(<double> nl)) + (se_right - nr * log(<double> nr))
                    else:
                        score = (<double> ssq_left) / (<double> nl) + (<double> ssq_right) / (<double> nr)
                    if score > best_score:
                        best_score = score
                        best_feature = f
                        best_thr = (buf[i].v + buf[i + 1].v) / 2.0
                        best_nl = nl
    finally:
        free(buf)
        free(left)
        free(total)

    if best_feature < 0:
        return None
    return (int(best_feature), best_thr, best_score, int(best_nl))
