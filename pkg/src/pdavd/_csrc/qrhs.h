/* Vector field of the primal-dual system for a quadratic objective.
 *
 * State layout s = [x (n), lam (m), u (n), nu (m)].
 *   out = [u, nu,
 *          -(alpha/t) u - (Qx + q) - A^T (lam + theta t nu + beta (Ax - b)),
 *          -(alpha/t) nu + (Ax - b) + theta t A u]
 * Qt is Q transposed (row-major), At is A transposed (row-major n x m).
 * work needs 3 m doubles.
 */
#ifndef PDAVD_QRHS_H
#define PDAVD_QRHS_H

/* On x86-64 with GCC, build an AVX2/FMA clone next to the baseline one; the
 * loader picks the best clone for the running CPU. */
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__linux__)
#define PDAVD_CLONES __attribute__((target_clones("arch=haswell", "default")))
#else
#define PDAVD_CLONES
#endif

PDAVD_CLONES
static void pdavd_qrhs(int n, int m,
                              const double *restrict Qt, const double *restrict q,
                              const double *restrict A, const double *restrict At,
                              const double *restrict b,
                              double alpha, double beta, double theta, double t,
                              const double *restrict s, double *restrict out,
                              double *restrict work)
{
    const double *x = s, *lam = s + n, *u = s + n + m, *nu = s + 2 * n + m;
    double *restrict ou = out + n + m;
    double *restrict onu = out + 2 * n + m;
    double *restrict r = work, *restrict au = work + m, *restrict w = work + 2 * m;
    const double damp = alpha / t, tt = theta * t;
    int i, j;

    for (i = 0; i < m; ++i) { r[i] = -b[i]; au[i] = 0.0; }
    for (j = 0; j < n; ++j) {
        const double *restrict row = At + (long)j * m;
        const double xj = x[j], uj = u[j];
        for (i = 0; i < m; ++i) { r[i] += row[i] * xj; au[i] += row[i] * uj; }
    }
    for (i = 0; i < m; ++i) {
        w[i] = lam[i] + tt * nu[i] + beta * r[i];
        onu[i] = -damp * nu[i] + r[i] + tt * au[i];
        out[n + i] = nu[i];
    }
    for (i = 0; i < n; ++i) { out[i] = u[i]; ou[i] = -damp * u[i] - q[i]; }
    for (j = 0; j < n; ++j) {
        const double *restrict row = Qt + (long)j * n;
        const double xj = x[j];
        for (i = 0; i < n; ++i) ou[i] -= row[i] * xj;
    }
    for (j = 0; j < m; ++j) {
        const double *restrict row = A + (long)j * n;
        const double wj = w[j];
        for (i = 0; i < n; ++i) ou[i] -= row[i] * wj;
    }
}

#endif
