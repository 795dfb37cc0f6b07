# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sequence-sum kernel. Mirrors ``_kernels_py.chain_sums`` exactly."""

from libc.math cimport pow
from libc.stdlib cimport malloc, free

cdef inline void _abc(int m, int n, double ei, double ej,
                      double* a, double* b, double* c) noexcept nogil:
    cdef double qi = 1.0 - ei
    cdef double qj = 1.0 - ej
    a[0] = 0.0
    b[0] = 0.0
    c[0] = 0.0
    if m == 1 and n == 1:
        a[0] = 0.5 * ei * ej
    elif m == 2 and n == 0:
        b[0] = ei * ei / 3.0
    elif m == 0 and n == 2:
        c[0] = ej * ej / 3.0
    elif m == 2 and n == 1:
        a[0] = ei * ej * qi
        b[0] = ei * ei * qj / 3.0
    elif m == 1 and n == 2:
        a[0] = ei * ej * qj
        c[0] = ej * ej * qi / 3.0
    elif m == 2 and n == 2:
        a[0] = 2.0 * ei * ej * qi * qj
        b[0] = ei * ei * qj * qj / 3.0
        c[0] = ej * ej * qi * qi / 3.0


cdef struct Frame:
    int depth
    int nu1
    int prev
    int n2
    double w
    double c0
    double c1
    double hat


def chain_sums(probs, eta, double s):
    cdef int n_src = len(probs)
    cdef int k, m, n, nu, nu1
    cdef double* P = <double*> malloc(3 * n_src * sizeof(double))
    cdef double* T = <double*> malloc(27 * (n_src if n_src > 1 else 1) * sizeof(double))
    # 2 frames per level suffice (3 children pushed, one popped immediately)
    cdef Frame* stack = <Frame*> malloc((3 * n_src + 4) * sizeof(Frame))
    cdef int top = 0
    cdef Frame f
    cdef double a, b, c, t, nc0, nc1, pn, beta
    cdef double tot0 = 0.0, tot1 = 0.0, tot2 = 0.0
    cdef long long visited = 0
    cdef double ei, ej
    if P == NULL or T == NULL or stack == NULL:
        free(P); free(T); free(stack)
        raise MemoryError()
    try:
        for k in range(n_src):
            for m in range(3):
                P[3 * k + m] = float(probs[k][m])
        for k in range(n_src - 1):
            ei = float(eta[2 * k + 1])
            ej = float(eta[2 * k + 2])
            for m in range(3):
                for n in range(3):
                    _abc(m, n, ei, ej, &T[27 * k + 9 * m + 3 * n],
                         &T[27 * k + 9 * m + 3 * n + 1], &T[27 * k + 9 * m + 3 * n + 2])
        with nogil:
            for nu1 in range(3):
                if P[nu1] != 0.0:
                    stack[top].depth = 1
                    stack[top].nu1 = nu1
                    stack[top].prev = nu1
                    stack[top].n2 = 1 if nu1 == 2 else 0
                    stack[top].w = P[nu1]
                    stack[top].c0 = 1.0
                    stack[top].c1 = 0.0
                    stack[top].hat = 1.0
                    top += 1
            while top > 0:
                top -= 1
                f = stack[top]
                visited += 1
                if f.depth == n_src:
                    beta = f.c0 + f.c1
                    tot0 += f.w * beta
                    if f.nu1 > 0 and f.prev > 0:
                        tot1 += f.w * beta
                        if f.nu1 == 1 and f.prev == 1:
                            tot2 += f.w * (0.25 * beta + 0.75 * pow(2.0 / 3.0, f.n2) * f.hat)
                    continue
                for nu in range(3):
                    pn = P[3 * f.depth + nu]
                    if pn == 0.0:
                        continue
                    k = 27 * (f.depth - 1) + 9 * f.prev + 3 * nu
                    a = T[k]
                    b = T[k + 1]
                    c = T[k + 2]
                    if a == 0.0 and b == 0.0 and c == 0.0:
                        continue
                    t = f.c0 + f.c1
                    nc0 = a * t + b * (f.c0 + s * f.c1)
                    nc1 = c * t
                    if nc0 == 0.0 and nc1 == 0.0:
                        continue
                    stack[top].depth = f.depth + 1
                    stack[top].nu1 = f.nu1
                    stack[top].prev = nu
                    stack[top].n2 = f.n2 + (1 if nu == 2 else 0)
                    stack[top].w = f.w * pn
                    stack[top].c0 = nc0
                    stack[top].c1 = nc1
                    stack[top].hat = f.hat * a
                    top += 1
    finally:
        free(P)
        free(T)
        free(stack)
    return tot0, tot1, tot2, visited
