# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince stepper for quadratic objectives.

Mirrors ``_fallback.dopri5_quadratic`` step for step; the vector field is
evaluated with hand-written dense loops so the whole step loop runs without
touching the interpreter.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0, B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0
cdef double D4 = -10690763975.0 / 1880347072.0, D5 = 701980252875.0 / 199316789632.0
cdef double D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0
cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 10.0, PI_BETA = 0.04
cdef double EXPO = 0.2 - 0.04 * 0.75
cdef double UNDERFLOW = 1e-14


cdef extern from "_csrc/qrhs.h":
    void pdavd_qrhs(int n, int m, const double *Qt, const double *q, const double *A, const double *At,
                    const double *b, double alpha, double beta, double theta, double t,
                    const double *s, double *out, double *work) noexcept nogil


cdef struct Model:
    int n
    int m
    double *Q
    double *q
    double *A
    double *At
    double *b
    double alpha
    double beta
    double theta
    double *work


cdef inline void rhs(Model *M, double t, const double *s, double *out) noexcept nogil:
    pdavd_qrhs(M.n, M.m, M.Q, M.q, M.A, M.At, M.b, M.alpha, M.beta, M.theta, t, s, out, M.work)


cdef inline double rms_scaled(const double *v, const double *sc, int d) noexcept nogil:
    cdef double acc = 0.0, z
    cdef int i
    for i in range(d):
        z = v[i] / sc[i]
        acc = acc + z * z
    return sqrt(acc / d)


def dopri5_quadratic(Q, q, A, b, double alpha, double beta, double theta,
                     y0, double t0, times, double atol, double rtol,
                     double h0=0.0, long long max_steps=1000000000):
    """Integrate the quadratic-objective system and sample at ``times``.

    Returns ``(samples, stats)`` with the same meaning as the pure-Python
    ``_fallback.dopri5_quadratic``.
    """
    cdef cnp.ndarray[double, ndim=2, mode="c"] Qa = np.ascontiguousarray(np.asarray(Q, dtype=np.float64).T)
    cdef int n = Qa.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] Aa = np.ascontiguousarray(A, dtype=np.float64).reshape(-1, n)
    cdef int m = Aa.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] Ata = np.ascontiguousarray(Aa.T)
    cdef cnp.ndarray[double, ndim=1, mode="c"] qa = np.ascontiguousarray(q, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] ba = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] ystart = np.array(y0, dtype=np.float64)
    cdef int d = 2 * (n + m)
    cdef int N = ts.shape[0]
    if ystart.shape[0] != d:
        raise ValueError("state length does not match problem dimensions")
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.full((N, d), np.nan)

    cdef double *work = <double *> malloc(sizeof(double) * (17 * d + 3 * m + 3))
    if work == NULL:
        raise MemoryError()
    cdef double *y = work
    cdef double *ynew = work + d
    cdef double *tmp = work + 2 * d
    cdef double *k1 = work + 3 * d
    cdef double *k2 = work + 4 * d
    cdef double *k3 = work + 5 * d
    cdef double *k4 = work + 6 * d
    cdef double *k5 = work + 7 * d
    cdef double *k6 = work + 8 * d
    cdef double *k7 = work + 9 * d
    cdef double *sc = work + 10 * d
    cdef double *ev = work + 11 * d
    cdef double *ydiff = work + 12 * d
    cdef double *bspl = work + 13 * d
    cdef double *r4 = work + 14 * d
    cdef double *r5 = work + 15 * d
    cdef double *swap

    cdef Model M
    M.n = n
    M.m = m
    M.Q = &Qa[0, 0] if n > 0 else NULL
    M.q = &qa[0] if n > 0 else NULL
    M.A = &Aa[0, 0] if m > 0 else NULL
    M.At = &Ata[0, 0] if m > 0 else NULL
    M.b = &ba[0] if m > 0 else NULL
    M.alpha = alpha
    M.beta = beta
    M.theta = theta
    M.work = work + 16 * d

    cdef long long naccept = 0, nreject = 0, nfev = 0, nstep = 0
    cdef int status = 0
    cdef double t = t0, t_end = ts[N - 1], h, hnew, err, fac, fac11, facold = 1e-4
    cdef double t_new, s, s1, d0, d1, d2, big, hh
    cdef bint rejected = False, last, capture
    cdef int i, k = 0

    for i in range(d):
        y[i] = ystart[i]
    while k < N and ts[k] <= t:
        for i in range(d):
            out[k, i] = y[i]
        k += 1
    if k == N:
        free(work)
        return out, {"naccept": 0, "nreject": 0, "nfev": 0, "status": 0, "t_last": t0}

    try:
        with nogil:
            rhs(&M, t, y, k1)
            nfev += 1
            if h0 > 0:
                h = h0
            else:
                for i in range(d):
                    sc[i] = atol + rtol * fabs(y[i])
                d0 = rms_scaled(y, sc, d)
                d1 = rms_scaled(k1, sc, d)
                if d0 < 1e-5 or d1 < 1e-5:
                    hh = 1e-6
                else:
                    hh = 0.01 * d0 / d1
                if hh > t_end - t:
                    hh = t_end - t
                for i in range(d):
                    tmp[i] = y[i] + hh * k1[i]
                rhs(&M, t + hh, tmp, k2)
                nfev += 1
                for i in range(d):
                    ev[i] = k2[i] - k1[i]
                d2 = rms_scaled(ev, sc, d) / hh
                big = d1 if d1 > d2 else d2
                if big <= 1e-15:
                    h = 1e-6 if 1e-6 > hh * 1e-3 else hh * 1e-3
                else:
                    h = pow(0.01 / big, 0.2)
                if 100.0 * hh < h:
                    h = 100.0 * hh
                if t_end - t < h:
                    h = t_end - t

            while k < N:
                if nstep >= max_steps:
                    status = 3
                    break
                if h < UNDERFLOW * fabs(t):
                    status = 1
                    break
                last = False
                if t + 1.01 * h >= t_end:
                    h = t_end - t
                    last = True
                nstep += 1

                for i in range(d):
                    tmp[i] = y[i] + h * (A21 * k1[i])
                rhs(&M, t + C2 * h, tmp, k2)
                for i in range(d):
                    tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
                rhs(&M, t + C3 * h, tmp, k3)
                for i in range(d):
                    tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                rhs(&M, t + C4 * h, tmp, k4)
                for i in range(d):
                    tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
                rhs(&M, t + C5 * h, tmp, k5)
                for i in range(d):
                    tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
                rhs(&M, t + h, tmp, k6)
                for i in range(d):
                    ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
                rhs(&M, t + h, ynew, k7)
                nfev += 6

                for i in range(d):
                    ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                    sc[i] = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(ynew[i]) else fabs(ynew[i]))
                err = rms_scaled(ev, sc, d)
                if not isfinite(err):
                    status = 2
                    break

                fac11 = pow(err, EXPO)
                if err <= 1.0:
                    fac = fac11 / pow(facold, PI_BETA)
                    fac = fac / SAFETY
                    if fac > 1.0 / FAC_MIN:
                        fac = 1.0 / FAC_MIN
                    if fac < 1.0 / FAC_MAX:
                        fac = 1.0 / FAC_MAX
                    hnew = h / fac
                    facold = err if err > 1e-4 else 1e-4
                    naccept += 1

                    t_new = t_end if last else t + h
                    capture = k < N and ts[k] <= t_new
                    if capture:
                        for i in range(d):
                            ydiff[i] = ynew[i] - y[i]
                            bspl[i] = h * k1[i] - ydiff[i]
                            r4[i] = ydiff[i] - h * k7[i] - bspl[i]
                            r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                        while k < N and ts[k] <= t_new:
                            if ts[k] == t_new:
                                for i in range(d):
                                    out[k, i] = ynew[i]
                            else:
                                s = (ts[k] - t) / h
                                s1 = 1.0 - s
                                for i in range(d):
                                    out[k, i] = y[i] + s * (ydiff[i] + s1 * (bspl[i] + s * (r4[i] + s1 * r5[i])))
                            k += 1
                    t = t_new
                    swap = y
                    y = ynew
                    ynew = swap
                    swap = k1
                    k1 = k7
                    k7 = swap
                    if rejected and hnew > h:
                        hnew = h
                    rejected = False
                    h = hnew
                else:
                    fac = fac11 / SAFETY
                    if fac > 1.0 / FAC_MIN:
                        fac = 1.0 / FAC_MIN
                    h = h / fac
                    rejected = True
                    nreject += 1
    finally:
        free(work)

    return out, {"naccept": naccept, "nreject": nreject, "nfev": nfev,
                 "status": status, "t_last": t}
