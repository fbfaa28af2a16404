# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Signatures mirror :mod:`fluctmipt._pykernels`."""

import numpy as np
from libc.math cimport pow, NAN

ctypedef double complex cplx


def apply_gate(cplx[::1] psi_c, const int[::1] i00, const int[::1] i11,
               const int[::1] i01, const int[::1] i10, const cplx[::1] c):
    # real/imag arithmetic spelled out: same formula as numpy's complex multiply
    cdef double[::1] psi = np.asarray(psi_c).view(np.float64)
    cdef double u0r = c[0].real, u0i = c[0].imag, u1r = c[1].real, u1i = c[1].imag
    cdef double m00r = c[2].real, m00i = c[2].imag, m01r = c[3].real, m01i = c[3].imag
    cdef double m10r = c[4].real, m10i = c[4].imag, m11r = c[5].real, m11i = c[5].imag
    cdef double ar, ai, br, bi
    cdef Py_ssize_t k, n, x, y
    n = i00.shape[0]
    for k in range(n):
        x = 2 * i00[k]
        ar = psi[x]
        ai = psi[x + 1]
        psi[x] = u0r * ar - u0i * ai
        psi[x + 1] = u0r * ai + u0i * ar
    n = i11.shape[0]
    for k in range(n):
        x = 2 * i11[k]
        ar = psi[x]
        ai = psi[x + 1]
        psi[x] = u1r * ar - u1i * ai
        psi[x + 1] = u1r * ai + u1i * ar
    n = i01.shape[0]
    for k in range(n):
        x = 2 * i01[k]
        y = 2 * i10[k]
        ar = psi[x]
        ai = psi[x + 1]
        br = psi[y]
        bi = psi[y + 1]
        psi[x] = (m00r * ar - m00i * ai) + (m01r * br - m01i * bi)
        psi[x + 1] = (m00r * ai + m00i * ar) + (m01r * bi + m01i * br)
        psi[y] = (m10r * ar - m10i * ai) + (m11r * br - m11i * bi)
        psi[y + 1] = (m10r * ai + m10i * ar) + (m11r * bi + m11i * br)


def prob_up(const cplx[::1] psi, const long long[::1] states, int site):
    cdef Py_ssize_t k, n = psi.shape[0]
    cdef long long bit = (<long long> 1) << site
    cdef double acc = 0.0
    cdef cplx z
    for k in range(n):
        if states[k] & bit:
            z = psi[k]
            acc += z.real * z.real + z.imag * z.imag
    return acc


def project(cplx[::1] psi, const long long[::1] states, int site, bint up, double scale):
    cdef Py_ssize_t k, n = psi.shape[0]
    cdef long long bit = (<long long> 1) << site
    cdef bint is_up
    cdef double[::1] v = np.asarray(psi).view(np.float64)
    for k in range(n):
        is_up = (states[k] & bit) != 0
        if is_up == up:
            v[2 * k] = v[2 * k] * scale
            v[2 * k + 1] = v[2 * k + 1] * scale
        else:
            v[2 * k] = 0.0
            v[2 * k + 1] = 0.0


def norm_sq(const cplx[::1] psi):
    cdef Py_ssize_t k, n = psi.shape[0]
    cdef double acc = 0.0
    cdef cplx z
    for k in range(n):
        z = psi[k]
        acc += z.real * z.real + z.imag * z.imag
    return acc


cdef inline double _interp(const double[::1] xs, const double[::1] ys,
                           Py_ssize_t lo, Py_ssize_t hi, double x) nogil:
    # clamped linear interpolation on xs[lo:hi], xs strictly increasing
    cdef Py_ssize_t a, b, m
    if x <= xs[lo]:
        return ys[lo]
    if x >= xs[hi - 1]:
        return ys[hi - 1]
    a = lo
    b = hi - 1
    while b - a > 1:
        m = (a + b) // 2
        if xs[m] <= x:
            a = m
        else:
            b = m
    return ys[a] + (ys[b] - ys[a]) * (x - xs[a]) / (xs[b] - xs[a])


cdef double _cost(double pc, double nu, double omega, bint subtract,
                  const double[::1] sizes, const double[::1] p, const double[::1] y,
                  const double[::1] w, const Py_ssize_t[::1] pt_off,
                  const double[::1] node_p, const double[::1] node_y,
                  const Py_ssize_t[::1] node_off,
                  double[::1] fac, double[::1] scl, double[::1] yc) nogil:
    cdef Py_ssize_t g, h, k, G = sizes.shape[0]
    cdef Py_ssize_t count = 0, nover
    cdef double x, Y, acc, pp, total = 0.0
    for g in range(G):
        fac[g] = pow(sizes[g], 1.0 / nu)
        scl[g] = pow(sizes[g], omega)
        if subtract:
            yc[g] = _interp(node_p, node_y, node_off[g], node_off[g + 1], pc)
        else:
            yc[g] = 0.0
    for g in range(G):
        for k in range(pt_off[g], pt_off[g + 1]):
            x = (p[k] - pc) * fac[g]
            acc = 0.0
            nover = 0
            for h in range(G):
                if h == g:
                    continue
                pp = pc + x / fac[h]
                if pp < node_p[node_off[h]] or pp > node_p[node_off[h + 1] - 1]:
                    continue
                acc += (_interp(node_p, node_y, node_off[h], node_off[h + 1], pp) - yc[h]) * scl[h]
                nover += 1
            if nover == 0:
                continue
            Y = (y[k] - yc[g]) * scl[g]
            acc = acc / nover
            total += (Y - acc) * (Y - acc) * w[k] / (scl[g] * scl[g])
            count += 1
    if count == 0:
        return NAN
    return total / count


def collapse_cost_grid(const double[::1] pcs, const double[::1] nus, double omega, bint subtract,
                       const double[::1] sizes, const double[::1] p, const double[::1] y,
                       const double[::1] w, const Py_ssize_t[::1] pt_off,
                       const double[::1] node_p, const double[::1] node_y,
                       const Py_ssize_t[::1] node_off):
    """Cost for every (pcs[i], nus[i]) pair; NaN where no point overlaps."""
    cdef Py_ssize_t i, n = pcs.shape[0], G = sizes.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] fac = np.empty(G), scl = np.empty(G), yc = np.empty(G)
    with nogil:
        for i in range(n):
            o[i] = _cost(pcs[i], nus[i], omega, subtract, sizes, p, y, w, pt_off,
                         node_p, node_y, node_off, fac, scl, yc)
    return out
