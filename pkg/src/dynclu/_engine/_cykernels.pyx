# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simulation kernels.

Each edge owns a PCG64 bit generator; the kernels pull doubles straight
from its C interface, so the stream consumed per edge is identical to
what ``numpy.random.Generator.random`` would deliver.  The skip-ahead
threshold arithmetic mirrors ``_pykernels`` expression for expression,
which is what makes the two backends bit-compatible on that engine.
"""

from libc.math cimport log, pow
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t


cdef inline bitgen_t *_bitgen(object bitgen_obj):
    return <bitgen_t *> PyCapsule_GetPointer(bitgen_obj.capsule, "BitGenerator")


def skip_counts_uniform(double[::1] e, double[::1] decay, Py_ssize_t k,
                        list bitgens, unsigned int[::1] counts):
    """Skip-ahead with one decay factor per edge (equidistant sampling)."""
    cdef Py_ssize_t n_edges = e.shape[0]
    cdef Py_ssize_t i, j
    cdef bitgen_t *bg
    cdef double u, ei, ri, p
    cdef int s
    for i in range(n_edges):
        bg = _bitgen(bitgens[i])
        ei = e[i]
        ri = decay[i]
        with nogil:
            u = bg.next_double(bg.state)
            s = u < ei
            for j in range(k):
                u = bg.next_double(bg.state)
                p = ei + (s - ei) * ri
                s = u < p
                counts[j] += s


def skip_counts_matrix(double[::1] e, double[:, ::1] decay,
                       list bitgens, unsigned int[::1] counts):
    """Skip-ahead with per-edge, per-step decay factors (Poisson sampling)."""
    cdef Py_ssize_t n_edges = decay.shape[0]
    cdef Py_ssize_t k = decay.shape[1]
    cdef Py_ssize_t i, j
    cdef bitgen_t *bg
    cdef double u, ei, p
    cdef int s
    for i in range(n_edges):
        bg = _bitgen(bitgens[i])
        ei = e[i]
        with nogil:
            u = bg.next_double(bg.state)
            s = u < ei
            for j in range(k):
                u = bg.next_double(bg.state)
                p = ei + (s - ei) * decay[i, j]
                s = u < p
                counts[j] += s


cdef inline double _draw_duration(bitgen_t *bg, int code, double p0, double p1) noexcept nogil:
    # u in (0, 1]: keeps log() finite
    cdef double u = 1.0 - bg.next_double(bg.state)
    if code == 0:
        return -log(u) / p0
    if code == 1:
        return pow(-log(u) / p0, 1.0 / p1)
    return p0 * (pow(u, -1.0 / p1) - 1.0)


def renewal_counts(unsigned char[::1] init_state, double[::1] init_end,
                   int on_code, double[::1] on_p0, double[::1] on_p1,
                   int off_code, double[::1] off_p0, double[::1] off_p1,
                   double[::1] times, list bitgens, unsigned int[::1] counts):
    """General event-driven engine: roll each edge past every sampling time."""
    cdef Py_ssize_t n_edges = init_state.shape[0]
    cdef Py_ssize_t k = times.shape[0]
    cdef Py_ssize_t i, j
    cdef bitgen_t *bg
    cdef double end
    cdef int s
    for i in range(n_edges):
        bg = _bitgen(bitgens[i])
        s = init_state[i]
        end = init_end[i]
        with nogil:
            j = 0
            while j < k:
                if times[j] < end:
                    counts[j] += s
                    j += 1
                elif s:
                    s = 0
                    end += _draw_duration(bg, off_code, off_p0[i], off_p1[i])
                else:
                    s = 1
                    end += _draw_duration(bg, on_code, on_p0[i], on_p1[i])
