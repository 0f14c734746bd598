"""Pure numpy versions of the compiled kernels, used when the extension is unavailable."""
import numpy as np


def svm_fit_subgradient(X, y, lam, n_iter):
    m, d = X.shape
    pos = y > 0
    coef = np.where(pos, 0.5 / max(pos.sum(), 1), -0.5 / max((~pos).sum(), 1))
    w = np.zeros(d)
    b = 0.0
    for t in range(n_iter):
        eta = 1.0 / (lam * (t + 1))
        active = y * (X @ w + b) < 1.0
        c = coef[active]
        g = c @ X[active]
        w = (1.0 - eta * lam) * w + eta * g
        b += eta * c.sum()
    return w, float(b)


def column_histograms(Z, nbins):
    n, d = Z.shape
    out = np.zeros((d, nbins))
    if n == 0:
        return out
    bins = np.clip(np.floor(Z * nbins).astype(np.int64), 0, nbins - 1)
    flat = bins.T + (np.arange(d) * nbins)[:, None]
    out += np.bincount(flat.ravel(), minlength=d * nbins).reshape(d, nbins)
    return out / n


def joint_histograms(Z, post, nbins):
    n, d = Z.shape
    out = np.zeros((d, nbins * nbins))
    if n == 0:
        return out
    fb = np.clip(np.floor(Z * nbins).astype(np.int64), 0, nbins - 1)
    pb = np.clip(np.floor(post * nbins).astype(np.int64), 0, nbins - 1)
    slot = fb.T * nbins + pb[None, :] + (np.arange(d) * nbins * nbins)[:, None]
    out += np.bincount(slot.ravel(), minlength=d * nbins * nbins).reshape(d, -1)
    return out / n


def min_distances(A, B):
    if B.shape[0] == 0:
        return np.full(A.shape[0], np.inf)
    sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(sq.min(axis=1))


def svm_fit_smo(X, y, lam, tol, max_iter):
    m, d = X.shape
    K = X @ X.T
    n_pos = int(np.count_nonzero(y > 0))
    n_neg = m - n_pos
    C = np.where(y > 0, 0.5 / (lam * max(n_pos, 1)), 0.5 / (lam * max(n_neg, 1)))
    alpha = np.zeros(m)
    G = -np.ones(m)
    tau = 1e-12
    yl = y.tolist()
    for _ in range(max_iter):
        pos = y > 0
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        if not up.any() or not low.any():
            break
        score = np.where(up, -y * G, -np.inf)
        i = int(np.argmax(score))
        gmax = score[i]
        yG = y * G
        gmax2 = yG[low].max()
        if gmax + gmax2 < tol:
            break
        b = gmax + yG
        a = K[i, i] + np.diag(K) - 2.0 * K[i]
        a = np.where(a <= 0, tau, a)
        cand = low & (b > 0)
        if not cand.any():
            break
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        ai, aj = alpha[i], alpha[j]
        Ci, Cj = C[i], C[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = tau
        if yl[i] != yl[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > Ci - Cj:
                if ni > Ci:
                    ni, nj = Ci, Ci - diff
            elif nj > Cj:
                nj, ni = Cj, Cj + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > Ci:
                if ni > Ci:
                    ni, nj = Ci, total - Ci
            elif nj < 0:
                nj, ni = 0.0, total
            if total > Cj:
                if nj > Cj:
                    nj, ni = Cj, total - Cj
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        G += y * (y[i] * K[:, i] * (ni - ai) + y[j] * K[:, j] * (nj - aj))
    yG = y * G
    at_ub = alpha >= C
    at_lb = alpha <= 0
    free = ~at_ub & ~at_lb
    if free.any():
        rho = yG[free].mean()
    else:
        ub_set = (at_ub & (y < 0)) | (at_lb & (y > 0))
        lb_set = (at_ub & (y > 0)) | (at_lb & (y < 0))
        ub = yG[ub_set].min() if ub_set.any() else np.inf
        lb = yG[lb_set].max() if lb_set.any() else -np.inf
        rho = 0.5 * (ub + lb)
    w = (alpha * y) @ X
    return w, float(-rho)
