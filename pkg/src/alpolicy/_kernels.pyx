# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, INFINITY

cnp.import_array()


def svm_fit_subgradient(const double[:, ::1] X, const double[::1] y, double lam, int n_iter):
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1], i, j, t
    cdef Py_ssize_t n_pos = 0, n_neg = 0
    cdef double eta, shrink, margin, gb, b = 0.0
    for i in range(m):
        if y[i] > 0:
            n_pos += 1
        else:
            n_neg += 1
    w_arr = np.zeros(d, dtype=np.float64)
    g_arr = np.zeros(d, dtype=np.float64)
    coef_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] g = g_arr
    cdef double[::1] coef = coef_arr
    for i in range(m):
        # class weight |L|/(2|L_y|) times y_i, divided by |L|
        if y[i] > 0:
            coef[i] = 0.5 / n_pos
        else:
            coef[i] = -0.5 / n_neg
    for t in range(n_iter):
        eta = 1.0 / (lam * (t + 1))
        for j in range(d):
            g[j] = 0.0
        gb = 0.0
        for i in range(m):
            margin = b
            for j in range(d):
                margin += w[j] * X[i, j]
            if y[i] * margin < 1.0:
                for j in range(d):
                    g[j] += coef[i] * X[i, j]
                gb += coef[i]
        shrink = 1.0 - eta * lam
        for j in range(d):
            w[j] = shrink * w[j] + eta * g[j]
        b += eta * gb
    return w_arr, b


def column_histograms(const double[:, ::1] Z, int nbins):
    cdef Py_ssize_t n = Z.shape[0], d = Z.shape[1], i, j
    cdef long k
    out_arr = np.zeros((d, nbins), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if n == 0:
        return out_arr
    for i in range(n):
        for j in range(d):
            k = <long>floor(Z[i, j] * nbins)
            if k < 0:
                k = 0
            elif k >= nbins:
                k = nbins - 1
            out[j, k] += 1.0
    for j in range(d):
        for k in range(nbins):
            out[j, k] /= n
    return out_arr


def joint_histograms(const double[:, ::1] Z, const double[::1] post, int nbins):
    cdef Py_ssize_t n = Z.shape[0], d = Z.shape[1], i, j
    cdef long k, p
    out_arr = np.zeros((d, nbins * nbins), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if n == 0:
        return out_arr
    for i in range(n):
        p = <long>floor(post[i] * nbins)
        if p < 0:
            p = 0
        elif p >= nbins:
            p = nbins - 1
        for j in range(d):
            k = <long>floor(Z[i, j] * nbins)
            if k < 0:
                k = 0
            elif k >= nbins:
                k = nbins - 1
            out[j, k * nbins + p] += 1.0
    for j in range(d):
        for k in range(nbins * nbins):
            out[j, k] /= n
    return out_arr


def min_distances(const double[:, ::1] A, const double[:, ::1] B):
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], d = A.shape[1], i, k, j
    cdef double best, acc, diff
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        best = 1e300
        for k in range(m):
            acc = 0.0
            for j in range(d):
                diff = A[i, j] - B[k, j]
                acc += diff * diff
            if acc < best:
                best = acc
        out[i] = sqrt(best) if m > 0 else np.inf
    return out_arr


def svm_fit_smo(const double[:, ::1] X, const double[::1] y, double lam, double tol, int max_iter):
    """Exact dual solve of the class-weighted hinge objective (libsvm-style SMO)."""
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1], i, j, k, it
    cdef Py_ssize_t n_pos = 0, n_neg = 0
    cdef double gmax, gmax2, gmin_obj, v, b_ij, a_ij, obj, quad, delta, diff, total
    cdef double old_i, old_j, di, dj, yG, ub, lb, sum_free, rho
    cdef Py_ssize_t nr_free
    cdef double TAU = 1e-12
    for i in range(m):
        if y[i] > 0:
            n_pos += 1
        else:
            n_neg += 1
    K_arr = np.empty((m, m), dtype=np.float64)
    cdef double[:, ::1] K = K_arr
    for i in range(m):
        for j in range(i, m):
            v = 0.0
            for k in range(d):
                v += X[i, k] * X[j, k]
            K[i, j] = v
            K[j, i] = v
    alpha_arr = np.zeros(m, dtype=np.float64)
    G_arr = np.full(m, -1.0, dtype=np.float64)
    C_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr
    cdef double[::1] C = C_arr
    for i in range(m):
        # box bound c_y / (lam * m) with c_y = m / (2 m_y)
        C[i] = 0.5 / (lam * (n_pos if y[i] > 0 else n_neg))
    for it in range(max_iter):
        gmax = -INFINITY
        i = -1
        for k in range(m):
            if (y[k] > 0 and alpha[k] < C[k]) or (y[k] < 0 and alpha[k] > 0):
                if -y[k] * G[k] > gmax:
                    gmax = -y[k] * G[k]
                    i = k
        gmax2 = -INFINITY
        gmin_obj = INFINITY
        j = -1
        for k in range(m):
            if (y[k] > 0 and alpha[k] > 0) or (y[k] < 0 and alpha[k] < C[k]):
                yG = y[k] * G[k]
                if yG > gmax2:
                    gmax2 = yG
                b_ij = gmax + yG
                if i >= 0 and b_ij > 0:
                    a_ij = K[i, i] + K[k, k] - 2.0 * K[i, k]
                    if a_ij <= 0:
                        a_ij = TAU
                    obj = -(b_ij * b_ij) / a_ij
                    if obj < gmin_obj:
                        gmin_obj = obj
                        j = k
        if i < 0 or j < 0 or gmax + gmax2 < tol:
            break
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = -diff
            if diff > C[i] - C[j]:
                if alpha[i] > C[i]:
                    alpha[i] = C[i]
                    alpha[j] = C[i] - diff
            else:
                if alpha[j] > C[j]:
                    alpha[j] = C[j]
                    alpha[i] = C[j] + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C[i]:
                if alpha[i] > C[i]:
                    alpha[i] = C[i]
                    alpha[j] = total - C[i]
            else:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = total
            if total > C[j]:
                if alpha[j] > C[j]:
                    alpha[j] = C[j]
                    alpha[i] = total - C[j]
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = total
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for k in range(m):
            G[k] += y[k] * (y[i] * K[k, i] * di + y[j] * K[k, j] * dj)
    ub = INFINITY
    lb = -INFINITY
    sum_free = 0.0
    nr_free = 0
    for k in range(m):
        yG = y[k] * G[k]
        if alpha[k] >= C[k]:
            if y[k] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[k] <= 0:
            if y[k] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nr_free += 1
            sum_free += yG
    rho = sum_free / nr_free if nr_free > 0 else 0.5 * (ub + lb)
    w_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] w = w_arr
    for k in range(m):
        if alpha[k] != 0:
            for j in range(d):
                w[j] += alpha[k] * y[k] * X[k, j]
    return w_arr, -rho
